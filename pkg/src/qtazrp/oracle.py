"""Independent ground truth for the contour formulas.

* :func:`build_generator` / :func:`master_solve`: the forward equation on the
  states within a total-displacement cutoff, solved by uniformization.
* :func:`gillespie_ensemble`: exact stochastic simulation of the ZRP.
* :func:`variant_ensemble`: the exclusion dynamics in which the right-most
  particle of each maximal cluster of size ``k`` jumps at rate ``[k]_q``,
  run on the images ``x_i - i`` of ZRP states.
"""
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse, stats

from .errors import StateError
from .kernels import exclusion_ensemble, stream_keys, zrp_ensemble
from .qcalc import as_q, q_bracket
from .states import ZrpState, reachable_states

MAX_STATES = 500_000
MAX_TERMS = 100_000


def _rates(n, q):
    q = as_q(q).require_stochastic()
    return np.array([float(q_bracket(k, q)) for k in range(n + 1)])


def jumps(X, q):
    """``(target, rate)`` for every allowed move out of ``X``."""
    pos = list(X.positions)
    out = []
    for site, eta in X.occupancy.items():
        last = max(i for i, p in enumerate(pos) if p == site)
        new = pos.copy()
        new[last] += 1
        out.append((ZrpState(tuple(new)), q_bracket(eta, q)))
    return out


@dataclass
class GeneratorMatrix:
    """Forward generator ``H[X', X]`` restricted to a displacement window.

    ``leak[X]`` is the rate at which ``X`` jumps out of the window, so
    interior columns sum to 0 and boundary columns to ``-leak``.
    """

    Y: ZrpState
    cutoff: int
    q: float
    states: list
    H: sparse.csr_matrix
    leak: np.ndarray
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {s: i for i, s in enumerate(self.states)}

    @property
    def exit_rates(self):
        return -self.H.diagonal()

    def __len__(self):
        return len(self.states)


def build_generator(Y, cutoff, q, max_states=MAX_STATES):
    """Generator on all states reachable from ``Y`` within ``cutoff`` jumps."""
    Y = ZrpState.coerce(Y)
    qv = as_q(q).require_stochastic()
    states = reachable_states(Y, cutoff)
    if len(states) > max_states:
        raise StateError(f"{len(states)} states exceed the limit of {max_states}")
    index = {s: i for i, s in enumerate(states)}
    rows, cols, vals = [], [], []
    leak = np.zeros(len(states))
    for j, X in enumerate(states):
        out = 0.0
        for target, rate in jumps(X, qv):
            out += rate
            i = index.get(target)
            if i is None:
                leak[j] += rate
            else:
                rows.append(i)
                cols.append(j)
                vals.append(rate)
        rows.append(j)
        cols.append(j)
        vals.append(-out)
    H = sparse.csr_matrix((vals, (rows, cols)), shape=(len(states), len(states)))
    return GeneratorMatrix(Y, cutoff, qv, states, H, leak)


@dataclass
class MasterSolution:
    states: list
    probabilities: np.ndarray
    poisson_tail: float
    terms: int
    uniform_rate: float
    partial: bool = False

    @property
    def total(self):
        return math.fsum(self.probabilities)

    @property
    def deficit(self):
        """Mass lost through the window boundary plus the series tail."""
        return 1.0 - self.total

    def as_dict(self):
        return dict(zip(self.states, self.probabilities))

    def __getitem__(self, X):
        return self.as_dict().get(ZrpState.coerce(X), 0.0)


def master_solve(gen, t, tol=1e-14, max_terms=MAX_TERMS):
    """``exp(H t) delta_Y`` by uniformization.

    With ``lam = max exit rate`` and ``P = I + H / lam``, sums
    ``Poisson(k; lam t) P^k delta_Y`` until the Poisson tail is below ``tol``.
    If that needs more than ``max_terms`` terms the partial sum is returned
    with ``partial=True``.
    """
    if t < 0:
        raise StateError("time must be nonnegative")
    v = np.zeros(len(gen))
    v[gen.index[gen.Y]] = 1.0
    lam = float(gen.exit_rates.max())
    if t == 0 or lam == 0:
        return MasterSolution(gen.states, v, 0.0, 0, lam)
    mu = lam * t
    K = int(stats.poisson.isf(tol, mu)) + 1
    while stats.poisson.sf(K, mu) >= tol:
        K += 1
    partial = K > max_terms
    K = min(K, max_terms)
    weights = stats.poisson.pmf(np.arange(K + 1), mu)
    P = sparse.identity(len(gen), format="csr") + gen.H / lam
    out = weights[0] * v
    for k in range(1, K + 1):
        v = P @ v
        out += weights[k] * v
    return MasterSolution(gen.states, out, float(stats.poisson.sf(K, mu)), K, lam, partial)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def gillespie_ensemble(Y, t, q, samples, seed, start=0, backend=None):
    """Final positions ``(samples, N)`` (left-most first) of independent runs.

    Sample ``i`` uses the stream keyed by ``(seed, start + i)``.
    """
    Y = ZrpState.coerce(Y)
    keys = stream_keys(seed, np.arange(start, start + samples))
    return zrp_ensemble(Y.positions, t, _rates(len(Y), q), keys, backend)


def gillespie_sample(Y, t, q, rng_seed, index=0):
    """One exact trajectory of the ZRP, returned at time ``t``."""
    return ZrpState(tuple(gillespie_ensemble(Y, t, q, 1, rng_seed, index)[0]))


@dataclass(frozen=True, order=True)
class ExclusionState:
    """Strictly ordered positions, left-most first."""

    positions: tuple

    def __post_init__(self):
        pos = tuple(int(p) for p in self.positions)
        if any(a >= b for a, b in zip(pos, pos[1:])):
            raise StateError(f"exclusion positions must be strictly increasing, got {pos}")
        object.__setattr__(self, "positions", pos)

    def __len__(self):
        return len(self.positions)


def map_to_exclusion(X):
    """``x_i -> x_i - i`` (``x_1`` right-most)."""
    X = ZrpState.coerce(X)
    n = len(X)
    return ExclusionState(tuple(p - (n - a) for a, p in enumerate(X.positions)))


def map_from_exclusion(E):
    if not isinstance(E, ExclusionState):
        E = ExclusionState(tuple(E))
    n = len(E)
    return ZrpState(tuple(p + (n - a) for a, p in enumerate(E.positions)))


def variant_ensemble(Yp, t, q, samples, seed, start=0, backend=None):
    """Final positions ``(samples, N)`` of the cluster-rate exclusion dynamics."""
    if not isinstance(Yp, ExclusionState):
        Yp = ExclusionState(tuple(Yp))
    keys = stream_keys(seed, np.arange(start, start + samples))
    return exclusion_ensemble(Yp.positions, t, _rates(len(Yp), q), keys, backend)


def simulate_variant(Yp, t, q, rng_seed, index=0):
    return ExclusionState(tuple(variant_ensemble(Yp, t, q, 1, rng_seed, index)[0]))


def state_counts(samples):
    """``Counter`` of rows (as tuples) of a ``(S, N)`` sample array."""
    uniq, counts = np.unique(np.asarray(samples), axis=0, return_counts=True)
    return Counter({tuple(int(v) for v in row): int(c) for row, c in zip(uniq, counts)})


def two_sample_chi2(a, b, min_expected=5.0):
    """Chi-square homogeneity test of two sample arrays.

    Categories with a pooled expected count below ``min_expected`` in either
    sample are merged into one bin. Returns ``(statistic, dof, p_value)``.
    """
    ca, cb = state_counts(a), state_counts(b)
    na, nb = sum(ca.values()), sum(cb.values())
    keys = sorted(set(ca) | set(cb))
    big, rest = [], [0, 0]
    for k in keys:
        pooled = ca[k] + cb[k]
        if min(pooled * na, pooled * nb) / (na + nb) >= min_expected:
            big.append([ca[k], cb[k]])
        else:
            rest[0] += ca[k]
            rest[1] += cb[k]
    if sum(rest):
        big.append(rest)
    table = np.array(big).T
    if table.shape[1] < 2:
        return 0.0, 0, 1.0
    stat, p, dof, _ = stats.chi2_contingency(table, correction=False)
    return float(stat), int(dof), float(p)
