"""Particle configurations of the zero range process.

Positions are listed left-most first, ``(x_N, ..., x_1)`` with
``x_N <= ... <= x_1``; ``x_1`` is the right-most particle.
"""
from collections import Counter
from dataclasses import dataclass
from itertools import combinations_with_replacement

from .errors import StateError


@dataclass(frozen=True, order=True)
class ZrpState:
    positions: tuple

    def __post_init__(self):
        pos = tuple(int(p) for p in self.positions)
        if not pos:
            raise StateError("a state needs at least one particle")
        if any(a > b for a, b in zip(pos, pos[1:])):
            raise StateError(
                f"positions must be listed left-most first (nondecreasing), got {pos}"
            )
        object.__setattr__(self, "positions", pos)

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            return cls.parse(value)
        return cls(tuple(value))

    @classmethod
    def parse(cls, text):
        """Parse ``"0,0,1"`` (left-most first)."""
        try:
            pos = tuple(int(tok) for tok in text.replace(" ", "").split(",") if tok)
        except ValueError as exc:
            raise StateError(f"cannot parse state {text!r}") from exc
        return cls(pos)

    def __len__(self):
        return len(self.positions)

    @property
    def n(self):
        return len(self.positions)

    def x(self, i):
        """The ``i``-th right-most position, ``1 <= i <= N``."""
        return self.positions[self.n - i]

    @property
    def right_to_left(self):
        """``(x_1, ..., x_N)``."""
        return self.positions[::-1]

    @property
    def occupancy(self):
        """Map site -> number of particles, sites in increasing order."""
        return dict(sorted(Counter(self.positions).items()))

    @property
    def occupied_sites(self):
        return tuple(self.occupancy)

    def displacement(self, Y):
        """Total number of jumps separating ``Y`` from this state."""
        return sum(self.positions) - sum(ZrpState.coerce(Y).positions)

    def is_step(self):
        return len(set(self.positions)) == 1

    def reachable_from(self, Y):
        """True when a totally asymmetric evolution can carry ``Y`` to ``self``."""
        Y = ZrpState.coerce(Y)
        return len(Y) == self.n and all(a >= b for a, b in zip(self.positions, Y.positions))

    def occupancy_form(self):
        """Echo as ``((x)^n, ...)`` left-most site first."""
        return "(" + ",".join(f"({s})^{n}" for s, n in self.occupancy.items()) + ")"

    def __str__(self):
        return ",".join(str(p) for p in self.positions)


def reachable_states(Y, cutoff):
    """All states reachable from ``Y`` with total displacement ``<= cutoff``.

    Yielded in lexicographic order of the left-most-first position tuple.
    """
    Y = ZrpState.coerce(Y)
    if cutoff < 0:
        raise StateError("cutoff must be nonnegative")
    base = sum(Y.positions)
    lo, hi = Y.positions[0], Y.positions[-1] + cutoff
    out = []
    for pos in combinations_with_replacement(range(lo, hi + 1), Y.n):
        if sum(pos) - base <= cutoff and all(a >= b for a, b in zip(pos, Y.positions)):
            out.append(ZrpState(pos))
    return out
