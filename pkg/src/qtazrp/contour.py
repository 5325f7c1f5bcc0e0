"""Trapezoid quadrature on circles ``|z| = r`` and its tensor products.

``integrate_*`` approximate ``(1/2 pi i) \\oint f dz`` in each variable; the
error is the Laurent-coefficient tail aliased at lag ``M``, so it decays
geometrically (or faster) for integrands analytic on an annulus.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from ._accel import num_threads
from .errors import ContourPlacementError, ConvergenceError, CostBudgetError, OverflowGuardError
from .qcalc import as_q

EXPONENT_BOUND = 600.0
DEFAULT_BUDGET = 10**8
M_START = 16
M_MAX = 2048
_CHUNK = 1 << 18


def default_radius(q):
    return 0.5 * as_q(q).r_max


def overflow_guard(t, r):
    """Refuse ``t (1/r - 1) >= 600``, where ``|exp(eps(z) t)|`` would overflow."""
    if t * (1 / r - 1) >= EXPONENT_BOUND:
        raise OverflowGuardError(
            f"t*(1/r - 1) = {t * (1 / r - 1):.1f} >= {EXPONENT_BOUND}; "
            "raise the contour radius toward r_max or lower t"
        )


@dataclass(frozen=True)
class ContourSpec:
    """Common circle ``|z| = r`` for all variables; ``M=None`` selects nodes adaptively."""

    r: float
    M: int = None
    q: object = None

    def __post_init__(self):
        if not self.r > 0:
            raise ContourPlacementError(f"radius must be positive, got {self.r}")
        if self.q is not None:
            q = as_q(self.q)
            object.__setattr__(self, "q", q)
            if not self.r < q.r_max:
                raise ContourPlacementError(
                    f"radius {self.r} must lie below r_max = {q.r_max:.6g} for q = {q.value}"
                )
        if self.M is not None and (self.M < 4 or self.M % 2):
            raise ContourPlacementError(f"node count must be even and >= 4, got {self.M}")

    @classmethod
    def default(cls, q, M=None):
        return cls(default_radius(q), M, q)

    def with_nodes(self, M):
        return ContourSpec(self.r, M, self.q)

    def grid(self, M=None):
        M = self.M if M is None else M
        if M is None:
            raise ValueError("node count not fixed; pass M or use adaptive evaluation")
        return QuadratureGrid(self.r, M)


@dataclass(frozen=True)
class QuadratureGrid:
    r: float
    M: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = self.r * self.phases(np.arange(self.M))
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        w = nodes / self.M
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def phases(self, k):
        """``exp(2 pi i k / M)`` with ``k`` reduced mod ``M`` first (exact phases)."""
        k = np.mod(np.asarray(k, dtype=np.int64), self.M)
        return np.exp(2j * np.pi * k / self.M)

    def power_table(self, exponents):
        """``table[j, c] = nodes[j] ** exponents[c]`` from exact phase indices."""
        e = np.asarray(exponents, dtype=np.int64)
        j = np.arange(self.M, dtype=np.int64)
        return (self.r ** e.astype(float))[None, :] * self.phases(np.outer(j, e))


def _fsum(values):
    values = np.asarray(values, dtype=complex)
    return complex(math.fsum(values.real), math.fsum(values.imag))


def integrate_1d(f, grid):
    """``sum_j w_j f(z_j)``; ``f`` must accept an array of nodes."""
    vals = np.asarray(f(grid.nodes), dtype=complex)
    return _fsum(grid.weights * vals)


def check_budget(M, n, budget):
    if budget is not None and M**n > budget:
        raise CostBudgetError(f"M^N = {M}^{n} = {M**n} exceeds the budget of {budget} evaluations")


def integrate_nd(f, grid, n, parallelism=None, budget=DEFAULT_BUDGET):
    """Tensor-product rule for ``f(z_1, ..., z_n)`` on the polycircle.

    ``f`` receives ``n`` broadcastable arrays (an open mesh over a block of
    node tuples). Blocks are summed pairwise, then merged with ``math.fsum``
    in a fixed order, so the result does not depend on ``parallelism``.
    """
    M = grid.M
    check_budget(M, n, budget)
    lead = 0
    while lead < n and M ** (n - lead) > _CHUNK:
        lead += 1
    nodes, weights = grid.nodes, grid.weights
    tail = n - lead

    def block(prefix):
        zs, ws = [], []
        for j in prefix:
            zs.append(nodes[j])
            ws.append(weights[j])
        shape = [1] * tail
        for d in range(tail):
            s = list(shape)
            s[d] = M
            zs.append(nodes.reshape(s))
            ws.append(weights.reshape(s))
        vals = np.asarray(f(*zs), dtype=complex)
        wt = ws[0]
        for w in ws[1:]:
            wt = wt * w
        vals = np.broadcast_to(vals * wt, (M,) * tail if tail else ())
        return np.sum(vals)

    prefixes = list(product(range(M), repeat=lead))
    workers = parallelism or num_threads()
    if workers > 1 and len(prefixes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(block, prefixes))
    else:
        partials = [block(p) for p in prefixes]
    return _fsum(partials)


@dataclass
class Refinement:
    """Outcome of node doubling: ``value`` at ``M`` agrees with the ``2M``
    estimate ``refined`` to within ``delta``."""

    M: int
    value: object
    refined: object
    delta: float
    history: list


def refine_nodes(evaluate, tol, m_start=M_START, m_max=M_MAX, rtol=0.0):
    """Double ``M`` until ``|I(M) - I(2M)| < tol + rtol |I(2M)|`` everywhere.

    ``evaluate(M)`` returns a scalar or array. Returns the smallest settled
    ``M`` together with both estimates; ``delta`` is the max absolute change.
    """
    if tol < 0 or rtol < 0 or tol + rtol == 0:
        raise ValueError("need tol >= 0, rtol >= 0 and at least one of them positive")
    M = m_start
    prev = evaluate(M)
    older = None
    history = [(M, None)]
    while 2 * M <= m_max:
        cur = evaluate(2 * M)
        diff = np.abs(np.asarray(cur) - np.asarray(prev))
        delta = float(np.max(diff))
        history.append((2 * M, delta))
        if np.all(diff < tol + rtol * np.abs(np.asarray(cur))):
            return Refinement(M, prev, cur, delta, history)
        M, older, prev = 2 * M, prev, cur
    raise ConvergenceError(
        f"no convergence to tol={tol:g}, rtol={rtol:g} up to M = {m_max} (last delta {history[-1][1]!r})",
        previous=older,
        current=prev,
    )


def adaptive_node_count(f, contour, n, tol=1e-12, m_max=M_MAX, budget=DEFAULT_BUDGET):
    """Settled node count for ``integrate_nd(f, ...)`` on ``contour``."""
    res = refine_nodes(lambda M: integrate_nd(f, contour.grid(M), n, budget=budget), tol, m_max=m_max)
    return res.M
