"""Distribution of the left-most particle.

Two integral representations are evaluated here:

* the pmf ``P_Y(x_N(t) = x)`` as an N-fold contour integral of
  ``I(z) prod_i z_i^(x - y_i - 1) e^(eps(z_i) t)`` with
  ``I(z) = prod_{i<j} (z_i - z_j) / D(z_i, z_j) * (1 - prod z) / prod (1 - z)``;
* for step data (all particles at ``y``) the tail ``P(x_N(t) >= x)`` as a
  contour integral of ``det[z_i^(x-y) e^(eps(z_i) t) / D(z_i, z_j)]``.

In both the only ``x`` dependence is ``prod z_i^x``, so one pass over the
node tuples (binned by the phase index ``sum j mod M``) serves every ``x``.
"""
import math
from dataclasses import dataclass

import numpy as np

from .bethe import DENOM_FLOOR, MAX_EXPONENT, pair_denominator
from .contour import DEFAULT_BUDGET, ContourSpec, check_budget, overflow_guard, refine_nodes
from .errors import ContourPlacementError, StateError
from .kernels import kernel
from .qcalc import Permutation, as_q, enumerate_compositions, q_factorial
from .states import ZrpState
from .transition import DEFAULT_TOL, checked_probability, jump_tail_bound, resolve_contour

# ---------------------------------------------------------------------------
# F_sigma
# ---------------------------------------------------------------------------


def f_values(w, q):
    """Composition sum for the ordered tuple ``w = (z_sigma(1), ..., z_sigma(N))``."""
    qv = as_q(q).complex
    w = [complex(v) for v in w]
    n = len(w)
    prods = [1 + 0j]
    for v in w:
        prods.append(prods[-1] * v)
    if any(abs(1 - p) < DENOM_FLOOR for p in prods[1:]):
        raise ContourPlacementError("a partial product of z equals 1")
    # t[i] = P_{N-i} / (1 - P_{N-i}), 1 <= i <= N-1
    t = [None] + [prods[n - i] / (1 - prods[n - i]) for i in range(1, n)]
    total = 0j
    for comp in enumerate_compositions(n):
        term = 1 / complex(math.prod(q_factorial(m, qv) for m in comp.parts))
        for s in comp.partial_sums:
            term *= t[s]
        total += term
    return total / (1 - prods[n])


def f_sigma(sigma, z, q):
    """``F_sigma(z)``: the composition sum taken along ``sigma``."""
    if not isinstance(sigma, Permutation):
        sigma = Permutation(tuple(sigma))
    if len(sigma) != len(z):
        raise StateError("sigma and z must have the same length")
    return f_values([z[k] for k in sigma.mapping], q)


def cauchy_kernel_det_check(z, q):
    """Compare ``det[1 / D(z_i, z_j)]`` with its product form.

    Returns ``(relative residual, lhs, rhs)``.
    """
    qv = as_q(q).complex
    z = np.asarray(z, dtype=complex)
    n = len(z)
    D = pair_denominator(z[:, None], z[None, :], qv)
    lhs = complex(np.linalg.det(1.0 / D))
    rhs = qv ** (n * (n - 1) // 2) / (1 - qv) ** n / np.prod(z * (1 - z))
    for i in range(n):
        for j in range(n):
            if i != j:
                rhs *= (z[i] - z[j]) / D[i, j]
    rhs = complex(rhs)
    scale = max(abs(lhs), abs(rhs))
    return (abs(lhs - rhs) / scale if scale > 0 else 0.0), lhs, rhs


# ---------------------------------------------------------------------------
# pmf
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LeftmostQuery:
    Y: ZrpState
    x: int
    t: float
    contour: ContourSpec

    def __post_init__(self):
        object.__setattr__(self, "Y", ZrpState.coerce(self.Y))
        object.__setattr__(self, "x", int(self.x))
        if self.t < 0:
            raise StateError("time must be nonnegative")
        if self.contour.q is None:
            raise StateError("the contour must carry q")

    @classmethod
    def create(cls, Y, x, t, q, r=None, M=None):
        q = as_q(q)
        contour = ContourSpec.default(q, M) if r is None else ContourSpec(r, M, q)
        return cls(Y, x, t, contour)


@dataclass
class LeftmostResult:
    """Values at the sites ``xs``; ``raw`` is the complex quadrature output."""

    xs: np.ndarray
    raw: np.ndarray
    M: int
    delta: float
    probabilistic: bool = True

    @property
    def values(self):
        if not self.probabilistic:
            raise StateError("complex q: the values have no probabilistic meaning")
        return np.array([checked_probability(v, f"x = {x}") for x, v in zip(self.xs, self.raw)])

    @property
    def max_imag(self):
        return float(np.max(np.abs(self.raw.imag))) if len(self.raw) else 0.0


def _time_factor(grid, t):
    return np.exp(t * (1.0 / grid.nodes - 1.0)) / grid.M


def _resum(bins, grid, n, exponents):
    """``sum_s bins[s] r^(n e) w^(s e)`` for each exponent ``e``."""
    s = np.arange(grid.M)
    e = np.asarray(exponents, dtype=np.int64)
    ph = grid.phases(np.outer(e, s))
    return (grid.r ** (n * e.astype(float))) * (ph @ bins)


def pmf_values(y, xs, t, q, grid, backend=None, budget=DEFAULT_BUDGET):
    """Raw quadrature of the pmf at each ``x`` in ``xs`` (``y`` right-most first)."""
    n = len(y)
    check_budget(grid.M, n, budget)
    yexp = -np.asarray(y, dtype=np.int64)
    pmin = int(yexp.min())
    ptab = grid.power_table(np.arange(pmin, int(yexp.max()) + 1))
    bins, bad = kernel("leftmost_bins", backend)(
        grid.nodes, ptab, pmin, yexp, _time_factor(grid, t), complex(as_q(q).complex), DENOM_FLOOR
    )
    if bad:
        raise ContourPlacementError("a denominator vanished on the contour grid")
    return _resum(bins, grid, n, xs)


def _adaptive(evaluate, contour, tol, rtol):
    if contour.M is not None:
        return np.asarray(evaluate(contour.M)), contour.M, None
    ref = refine_nodes(evaluate, tol, rtol=rtol)
    return np.asarray(ref.value), ref.M, ref.delta


def leftmost_distribution(Y, xs, t, contour=None, q=None, tol=DEFAULT_TOL, backend=None,
                          budget=DEFAULT_BUDGET, rtol=0.0):
    """``P_Y(x_N(t) = x)`` for every ``x`` in ``xs`` from one node sweep."""
    Y = ZrpState.coerce(Y)
    contour = resolve_contour(contour, q if q is not None else contour.q if contour else None)
    xs = np.atleast_1d(np.asarray(xs, dtype=np.int64))
    if t < 0:
        raise StateError("time must be nonnegative")
    overflow_guard(t, contour.r)
    y = np.array(Y.right_to_left, dtype=np.int64)
    if len(xs) and np.max(np.abs(xs[:, None] - y[None, :])) > MAX_EXPONENT:
        raise StateError(f"|x - y_i| exceeds {MAX_EXPONENT}")
    live = xs >= Y.positions[0]
    raw = np.zeros(len(xs), dtype=complex)
    M, delta = 0, 0.0
    if live.any():
        def evaluate(M):
            return pmf_values(y, xs[live], t, contour.q, contour.grid(M), backend, budget)

        vals, M, delta = _adaptive(evaluate, contour, tol, rtol)
        raw[live] = vals
    return LeftmostResult(xs, raw, M, delta, contour.q.is_stochastic)


def leftmost_pmf(query, tol=DEFAULT_TOL, backend=None, budget=DEFAULT_BUDGET, rtol=0.0):
    """``P_Y(x_N(t) = x)`` as a float; needs real ``0 < q < 1``."""
    query.contour.q.require_stochastic()
    res = leftmost_distribution(query.Y, [query.x], query.t, query.contour, tol=tol,
                                backend=backend, budget=budget, rtol=rtol)
    return float(res.values[0])


def leftmost_tail_bound(Y, x, t):
    """Bound on ``P_Y(x_N(t) >= x)`` from the Poisson domination of jump counts."""
    Y = ZrpState.coerce(Y)
    need = sum(max(0, x - p) for p in Y.positions)
    return jump_tail_bound(len(Y), t, need)


# ---------------------------------------------------------------------------
# step initial condition
# ---------------------------------------------------------------------------


def step_prefactor(n, q):
    """``[N]_q! / N! * (1 - q)^N / q^(N(N-1)/2)``."""
    qv = as_q(q).complex
    return complex(q_factorial(n, qv)) / math.factorial(n) * (1 - qv) ** n / qv ** (n * (n - 1) // 2)


def cdf_step_values(n, shifts, t, q, grid, backend=None, budget=DEFAULT_BUDGET):
    """Raw determinant-formula values for ``x - y`` in ``shifts``."""
    check_budget(grid.M, n, budget)
    bins, bad = kernel("det_bins", backend)(
        grid.nodes, n, _time_factor(grid, t), complex(as_q(q).complex), DENOM_FLOOR
    )
    if bad:
        raise ContourPlacementError("singular kernel matrix on the contour grid")
    return step_prefactor(n, q) * _resum(bins, grid, n, shifts)


def leftmost_cdf_distribution(y, n, xs, t, q=None, contour=None, tol=DEFAULT_TOL, backend=None,
                              budget=DEFAULT_BUDGET, rtol=0.0):
    """``P_(y,...,y)(x_N(t) >= x)`` for every ``x`` in ``xs``."""
    if n < 1:
        raise StateError("need at least one particle")
    contour = resolve_contour(contour, q if q is not None else contour.q if contour else None)
    xs = np.atleast_1d(np.asarray(xs, dtype=np.int64))
    if t < 0:
        raise StateError("time must be nonnegative")
    overflow_guard(t, contour.r)
    shifts = xs - int(y)
    if len(xs) and np.max(np.abs(shifts)) > MAX_EXPONENT:
        raise StateError(f"|x - y| exceeds {MAX_EXPONENT}")
    raw = np.ones(len(xs), dtype=complex)
    live = shifts > 0
    M, delta = 0, 0.0
    if live.any():
        def evaluate(M):
            return cdf_step_values(n, shifts[live], t, contour.q, contour.grid(M), backend, budget)

        vals, M, delta = _adaptive(evaluate, contour, tol, rtol)
        raw[live] = vals
    return LeftmostResult(xs, raw, M, delta, contour.q.is_stochastic)


def leftmost_cdf_step(y, N, x, t, q, contour=None, tol=DEFAULT_TOL, backend=None,
                      budget=DEFAULT_BUDGET, rtol=0.0):
    """``P_(y,...,y)(x_N(t) >= x)`` as a float; needs real ``0 < q < 1``."""
    as_q(q).require_stochastic()
    res = leftmost_cdf_distribution(y, N, [x], t, q, contour, tol, backend, budget, rtol)
    return float(res.values[0])
