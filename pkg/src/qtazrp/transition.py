"""Exact N-particle transition probabilities of the q-TAZRP.

``P_Y(X; t) = W_X * (2 pi i)^-N \\oint ... \\oint sum_sigma A_sigma
prod_i z_{sigma(i)}^(x_i - y_{sigma(i)} - 1) e^(eps(z_i) t) dz``,
evaluated by the trapezoid rule on a common circle.

Two evaluation routes share the same nodes and weights:

* :func:`evaluate_transition` runs one query through the direct kernel
  (permutation stream with incremental amplitudes).
* :func:`distribution_at_time` symmetrizes the integrand once per node
  tuple so that every final state becomes a Laurent coefficient of a single
  function; the coefficients for all states in a window are then obtained by
  contracting one axis at a time with a node-power table.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .bethe import DENOM_FLOOR, MAX_EXPONENT
from .contour import DEFAULT_BUDGET, ContourSpec, check_budget, overflow_guard, refine_nodes
from .errors import ContourPlacementError, NumericalQualityError, StateError
from .kernels import fsum_complex, kernel, pair_table
from .qcalc import as_q, permutation_tables, state_weight
from .states import ZrpState, reachable_states

IMAG_TOL = 1e-9
RANGE_TOL = 1e-6
DEFAULT_TOL = 1e-12
_CHUNK = 1 << 18


def checked_probability(raw, label="probability"):
    """Apply the output policy to a raw complex quadrature value.

    Imaginary parts above ``IMAG_TOL`` or real parts outside
    ``[-RANGE_TOL, 1 + RANGE_TOL]`` raise; anything else is clipped to [0, 1].
    """
    raw = complex(raw)
    if abs(raw.imag) > IMAG_TOL:
        raise NumericalQualityError(f"{label}: imaginary part {raw.imag:.3e} exceeds {IMAG_TOL}")
    if not -RANGE_TOL <= raw.real <= 1 + RANGE_TOL:
        raise NumericalQualityError(f"{label}: value {raw.real:.6g} outside [0, 1]")
    return min(max(raw.real, 0.0), 1.0)


def resolve_contour(contour, q):
    """Attach ``q`` to a contour (``None`` means the default radius)."""
    q = as_q(q)
    if contour is None:
        return ContourSpec.default(q)
    if contour.q is None:
        return ContourSpec(contour.r, contour.M, q)
    return contour


def jump_tail_bound(n, t, displacement):
    """``P(total jumps >= displacement)`` bound: jumps are dominated by Poisson(N t)."""
    if displacement <= 0:
        return 1.0
    return float(stats.poisson.sf(displacement - 1, n * t))


@dataclass(frozen=True)
class TransitionQuery:
    Y: ZrpState
    X: ZrpState
    t: float
    contour: ContourSpec

    def __post_init__(self):
        object.__setattr__(self, "Y", ZrpState.coerce(self.Y))
        object.__setattr__(self, "X", ZrpState.coerce(self.X))
        if len(self.X) != len(self.Y):
            raise StateError("X and Y must have the same number of particles")
        if self.t < 0:
            raise StateError("time must be nonnegative")
        if self.contour.q is None:
            raise StateError("the contour must carry q")

    @classmethod
    def create(cls, Y, X, t, q, r=None, M=None):
        q = as_q(q)
        contour = ContourSpec.default(q, M) if r is None else ContourSpec(r, M, q)
        return cls(Y, X, t, contour)

    @property
    def q(self):
        return self.contour.q


@dataclass
class TransitionResult:
    raw: complex
    M: int
    delta: float = None
    probabilistic: bool = True

    @property
    def imag(self):
        return self.raw.imag

    @property
    def probability(self):
        if not self.probabilistic:
            raise StateError("complex q: the value has no probabilistic meaning")
        return checked_probability(self.raw)


def _prepare(X, Y, t, contour):
    x = np.array(X.right_to_left, dtype=np.int64)
    y = np.array(Y.right_to_left, dtype=np.int64)
    if np.max(np.abs(x[:, None] - y[None, :])) > MAX_EXPONENT:
        raise StateError(f"|x_i - y_j| exceeds {MAX_EXPONENT}")
    overflow_guard(t, contour.r)
    return x, y


def _time_factor(grid, t):
    return np.exp(t * (1.0 / grid.nodes - 1.0)) / grid.M


def _pair_table(grid, q, n):
    snt, bad = pair_table(grid.nodes, complex(as_q(q).complex), DENOM_FLOOR)
    if bad and n > 1:
        raise ContourPlacementError("S-matrix denominator vanished on the contour grid")
    return snt


def direct_sum(x, y, t, q, grid, backend=None, budget=DEFAULT_BUDGET):
    """Quadrature of the permutation sum for one ``(X, Y)`` pair (no weight).

    ``x`` and ``y`` are ordered right-most first; ``x`` need not be sorted.
    """
    n = len(x)
    check_budget(grid.M, n, budget)
    expo = np.asarray(x, dtype=np.int64)[:, None] - np.asarray(y, dtype=np.int64)[None, :]
    pmin = int(expo.min())
    ptab = grid.power_table(np.arange(pmin, int(expo.max()) + 1))
    perms, swaps, _ = permutation_tables(n)
    snt = _pair_table(grid, q, n)
    partial = kernel("direct_partials", backend)(
        snt, ptab, pmin, expo, _time_factor(grid, t), perms, swaps
    )
    return fsum_complex(partial)


def evaluate_transition(query, tol=DEFAULT_TOL, backend=None, budget=DEFAULT_BUDGET, rtol=0.0):
    """Raw complex value of the transition formula with diagnostics.

    ``tol`` and ``rtol`` are the absolute and relative node-doubling
    tolerances; far-tail probabilities need ``rtol`` and a radius near
    ``t / (x - y)``, since rounding grows like ``r^-(x-y) e^(t/r)``.
    """
    q = query.q
    X, Y = query.X, query.Y
    if not X.reachable_from(Y):
        return TransitionResult(0j, 0, 0.0, q.is_stochastic)
    x, y = _prepare(X, Y, query.t, query.contour)
    weight = complex(state_weight(X, q))

    def evaluate(M):
        return weight * direct_sum(x, y, query.t, q, query.contour.grid(M), backend, budget)

    if query.contour.M is not None:
        return TransitionResult(evaluate(query.contour.M), query.contour.M, None, q.is_stochastic)
    ref = refine_nodes(evaluate, tol, rtol=rtol)
    return TransitionResult(complex(ref.value), ref.M, ref.delta, q.is_stochastic)


def transition_probability(query, tol=DEFAULT_TOL, backend=None, budget=DEFAULT_BUDGET, rtol=0.0):
    """``P_Y(X; t)`` as a float; needs real ``0 < q < 1``."""
    query.q.require_stochastic()
    return evaluate_transition(query, tol, backend, budget, rtol).probability


# ---------------------------------------------------------------------------
# batch evaluation
# ---------------------------------------------------------------------------


def coefficient_tensor(y, t, q, grid, lo, length, backend=None, budget=DEFAULT_BUDGET):
    """Tensor ``U`` with ``W_X * U[x_1-lo, ..., x_N-lo] = P_Y(X; t)``.

    ``y`` is ordered right-most first. Positions ``lo .. lo+length-1`` are
    covered along every axis.
    """
    n = len(y)
    M = grid.M
    check_budget(M, n, budget)
    perms, _, invmask = permutation_tables(n)
    yexp = -np.asarray(y, dtype=np.int64)[perms]
    pmin = int(yexp.min())
    ptab = grid.power_table(np.arange(pmin, int(yexp.max()) + 1))
    ytab = np.ascontiguousarray(np.transpose(ptab[:, yexp - pmin], (1, 2, 0)))
    snt = _pair_table(grid, q, n)
    ef = _time_factor(grid, t)
    V = grid.power_table(np.arange(lo, lo + length))
    block_kernel = kernel("sym_block", backend)
    rest = M ** (n - 1)
    step = max(1, _CHUNK // rest)
    U = np.zeros((length,) * n, dtype=np.complex128)
    for start in range(0, M, step):
        stop = min(M, start + step)
        blk = block_kernel(snt, ytab, ef, invmask, start, stop)
        A = blk.reshape((stop - start,) + (M,) * (n - 1))
        for _ in range(n - 1):
            A = np.tensordot(A, V, axes=([1], [0]))
        U += np.tensordot(V[start:stop], A, axes=([0], [0]))
    return U


@dataclass
class Distribution:
    """Probabilities of all states within a displacement cutoff."""

    Y: ZrpState
    t: float
    states: list
    raw: np.ndarray
    M: int
    delta: float
    cutoff: int
    tail_bound: float
    probabilistic: bool = True
    probabilities: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.probabilistic:
            self.probabilities = np.array(
                [checked_probability(v, f"P({s})") for s, v in zip(self.states, self.raw)]
            )
        else:
            self.probabilities = None

    @property
    def total(self):
        return math.fsum(self.probabilities)

    @property
    def deficit(self):
        return 1.0 - self.total

    @property
    def max_imag(self):
        return float(np.max(np.abs(self.raw.imag))) if len(self.raw) else 0.0

    def as_dict(self):
        return dict(zip(self.states, self.probabilities))

    def __getitem__(self, X):
        X = ZrpState.coerce(X)
        try:
            return self.probabilities[self.states.index(X)]
        except ValueError:
            return 0.0


def distribution_at_time(Y, t, contour=None, support_cutoff=20, q=None, tol=DEFAULT_TOL,
                         backend=None, budget=DEFAULT_BUDGET, rtol=0.0):
    """All ``P_Y(X; t)`` with total displacement ``sum(x_i - y_i) <= support_cutoff``.

    ``contour.M = None`` doubles the node count until every probability in
    the window moves by less than ``tol``.
    """
    Y = ZrpState.coerce(Y)
    if contour is None or contour.q is None:
        if q is None:
            raise StateError("pass q directly or through the contour")
        contour = resolve_contour(contour, q)
    q = contour.q
    if t < 0:
        raise StateError("time must be nonnegative")
    overflow_guard(t, contour.r)
    states = reachable_states(Y, support_cutoff)
    y = np.array(Y.right_to_left, dtype=np.int64)
    lo = Y.positions[0]
    length = Y.positions[-1] + support_cutoff - lo + 1
    if length > MAX_EXPONENT:
        raise StateError("support window too wide")
    index = np.array([np.array(s.right_to_left) - lo for s in states], dtype=np.int64)
    weights = np.array([complex(state_weight(s, q)) for s in states])

    def evaluate(M):
        U = coefficient_tensor(y, t, q, contour.grid(M), lo, length, backend, budget)
        return weights * U[tuple(index.T)]

    if contour.M is not None:
        raw, M, delta = evaluate(contour.M), contour.M, None
    else:
        ref = refine_nodes(evaluate, tol, rtol=rtol)
        raw, M, delta = ref.value, ref.M, ref.delta
    return Distribution(
        Y, t, states, np.asarray(raw), M, delta, support_cutoff,
        jump_tail_bound(len(Y), t, support_cutoff + 1), q.is_stochastic,
    )
