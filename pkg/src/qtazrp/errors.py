"""Exception hierarchy. Every numerical guard raises loudly rather than
returning a degraded number."""


class QtazrpError(Exception):
    """Base class for all package errors."""


class StateError(QtazrpError, ValueError):
    """Malformed particle configuration or parameter."""


class ContourPlacementError(QtazrpError):
    """An S-matrix or kernel denominator vanished on the chosen contour."""


class OverflowGuardError(QtazrpError):
    """``t * (1/r - 1)`` is too large for double precision on this contour."""


class CostBudgetError(QtazrpError):
    """The requested tensor-product grid exceeds the evaluation budget."""


class ConvergenceError(QtazrpError):
    """Node doubling did not settle before the maximum node count."""

    def __init__(self, message, previous=None, current=None):
        super().__init__(message)
        self.previous = previous
        self.current = current


class NumericalQualityError(QtazrpError):
    """A computed probability failed the imaginary-part or range diagnostic."""
