"""Numerical checks of the algebraic identities behind the formulas.

Each ``check_*`` returns an :class:`IdentityReport`; :func:`run_battery`
runs every check over a fixed-seed ensemble of random points.
"""
import contextlib
import contextvars
import json
import math
from dataclasses import asdict, dataclass, field

import mpmath
import numpy as np

from .bethe import BetheContext, bethe_integrand, energy, pair_denominator
from .contour import ContourSpec, refine_nodes
from .errors import StateError
from .leftmost import f_values
from .qcalc import Permutation, as_q, enumerate_compositions, enumerate_permutations, q_factorial
from .transition import direct_sum

THRESHOLD = 1e-8
TINY_SCALE = 1e-6
ABS_FALLBACK = 1e-12
MIN_SEPARATION = 1e-3
POINT_RADIUS = 0.9
QFACT_RADIUS = 0.05
EXTRA_DIGITS = 32
# relative rounding error per summand of a double-precision product chain
ROUNDING = 1e-14

DEFAULT_SEEDS = {
    "poles": 101,
    "qfact": 102,
    "vandermonde": 103,
    "antisymF": 104,
    "recursion": 105,
    "boundary": 106,
    "free": 107,
}
IDENTITY_NAMES = tuple(DEFAULT_SEEDS)

# Test hook: when set, every check compares against a deliberately wrong
# right-hand side, so the failure path can be exercised end to end.
_FAULT = contextvars.ContextVar("qtazrp_identity_fault", default=False)


@contextlib.contextmanager
def injected_fault(active=True):
    token = _FAULT.set(bool(active))
    try:
        yield
    finally:
        _FAULT.reset(token)


def residual(lhs, rhs, threshold=THRESHOLD):
    """Relative residual ``|lhs - rhs| / max(|lhs|, |rhs|)``.

    When both sides are below ``TINY_SCALE`` the difference is judged on the
    absolute scale ``ABS_FALLBACK`` instead, rescaled so that an absolute
    error of ``ABS_FALLBACK`` maps onto ``threshold``.
    """
    if _FAULT.get():
        rhs = -complex(rhs)
    diff = abs(complex(lhs) - complex(rhs))
    scale = max(abs(complex(lhs)), abs(complex(rhs)))
    if scale < TINY_SCALE:
        return diff * threshold / ABS_FALLBACK
    return diff / scale


@dataclass
class IdentityReport:
    name: str
    N: int
    trials: int
    residual: float
    threshold: float = THRESHOLD
    worst: dict = field(default_factory=dict)
    passed: bool = field(init=False)

    def __post_init__(self):
        if self.residual < 0:
            raise ValueError("residual must be nonnegative")
        self.passed = bool(self.residual <= self.threshold)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def merge(cls, name, N, reports, threshold=THRESHOLD):
        """Worst case over several single-point reports."""
        worst = max(reports, key=lambda r: r.residual)
        return cls(name, N, sum(r.trials for r in reports), worst.residual, threshold, worst.worst)


def _cpair(z):
    return [[float(complex(v).real), float(complex(v).imag)] for v in np.atleast_1d(z)]


def random_points(rng, n, q, radius=POINT_RADIUS, sep=MIN_SEPARATION):
    """``n`` complex points in ``|z| < radius`` kept ``sep`` away from the zero
    sets of ``z_i - z_j`` and of every pair denominator."""
    qv = as_q(q).complex
    for _ in range(10_000):
        z = np.sqrt(rng.uniform(0, radius**2, n)) * np.exp(2j * np.pi * rng.uniform(0, 1, n))
        if np.min(np.abs(z)) < sep:
            continue
        ok = True
        for a in range(n):
            for b in range(n):
                if a != b and (abs(z[a] - z[b]) < sep or abs(pair_denominator(z[a], z[b], qv)) < sep):
                    ok = False
        if ok:
            return z
    raise RuntimeError("could not draw separated points")  # pragma: no cover


def random_q(rng, complex_q=True):
    """Random ``q`` with ``0.05 <= |q| <= 0.95`` (real or complex)."""
    mod = rng.uniform(0.05, 0.95)
    if not complex_q:
        return mod
    return mod * np.exp(1j * rng.uniform(-np.pi, np.pi))


# ---------------------------------------------------------------------------
# individual checks
# ---------------------------------------------------------------------------


def check_pole_locations(z_on_contour, q, r):
    """Pole placement for a point on ``|z| = r``.

    Returns ``(ok, zj_pole, zi_pole)``: the ``z_j`` pole ``z / (q + (1-q) z)``
    must lie outside the circle and the ``z_i`` pole ``q z / (1 - (1-q) z)``
    inside it.
    """
    qv = as_q(q).complex
    z = complex(z_on_contour)
    zj_pole = z / (qv + (1 - qv) * z)
    zi_pole = qv * z / (1 - (1 - qv) * z)
    ok = abs(zj_pole) > r and abs(zi_pole) < r
    return bool(ok != _FAULT.get()), zj_pole, zi_pole


def pole_sweep(trials=1000, seed=DEFAULT_SEEDS["poles"]):
    """Random ``(q, r, phase)`` triples; residual is the fraction that fail."""
    rng = np.random.default_rng(seed)
    failures = 0
    worst = {}
    margin = math.inf
    for _ in range(trials):
        q = as_q(random_q(rng, complex_q=bool(rng.integers(2))))
        r = rng.uniform(0.01, 0.99) * q.r_max
        z = r * np.exp(2j * np.pi * rng.uniform())
        ok, zj, zi = check_pole_locations(z, q, r)
        m = min(abs(zj) / r, r / abs(zi)) if zi != 0 else abs(zj) / r
        if m < margin:
            margin = m
            worst = {"q": _cpair(q.complex)[0], "r": r, "z": _cpair(z)[0], "ratio": m}
        failures += not ok
    return IdentityReport("poles", 1, trials, failures / trials, 0.0, worst)


def check_q_factorial_integral(n, q, contour=None, tol=1e-6):
    """Quadrature of ``sum_sigma A_sigma prod z_i^-1`` against ``[n]_q!``.

    Without the time factor the integrand is rational, and both pole rings
    sit at ratio about ``|q|`` from a small circle, so the default radius is
    ``QFACT_RADIUS * r_max``. The reported value is the ``2M`` estimate,
    whose error is about ``delta**2`` under geometric convergence.
    """
    q = as_q(q)
    contour = contour or ContourSpec(QFACT_RADIUS * q.r_max, None, q)
    zeros = np.zeros(n, dtype=np.int64)

    def evaluate(M):
        return direct_sum(zeros, zeros, 0.0, q, contour.grid(M), budget=None)

    if contour.M is None:
        ref = refine_nodes(evaluate, tol)
        lhs, M = ref.refined, 2 * ref.M
    else:
        lhs, M = evaluate(contour.M), contour.M
    rhs = complex(q_factorial(n, q.complex))
    worst = {"q": _cpair(q.complex)[0], "r": contour.r, "M": M, "lhs": _cpair(lhs)[0]}
    return IdentityReport("qfact", n, 1, residual(lhs, rhs), THRESHOLD, worst)


def _q_factorial_like(n, q, one):
    out, bracket, power = one, 0 * one, one
    for _ in range(n):
        bracket += power
        power *= q
        out *= bracket
    return out


def _mp_f_values(w, q):
    # same composition sum as leftmost.f_values, carried in mpmath
    one = mpmath.mpc(1)
    n = len(w)
    prods = [one]
    for v in w:
        prods.append(prods[-1] * v)
    t = [None] + [prods[n - i] / (1 - prods[n - i]) for i in range(1, n)]
    total = 0 * one
    for comp in enumerate_compositions(n):
        term = one
        for m in comp.parts:
            term /= _q_factorial_like(m, q, one)
        for s in comp.partial_sums:
            term *= t[s]
        total += term
    return total / (1 - prods[n])


def _vandermonde(z, q, one):
    n = len(z)
    lhs, scale = 0 * one, 0.0
    for sigma in enumerate_permutations(n):
        w = [z[k] for k in sigma.mapping]
        term = sigma.sign * one
        for i in range(n):
            for j in range(i + 1, n):
                term *= pair_denominator(w[j], w[i], q)
        lhs += term
        scale += abs(term)
    rhs = _q_factorial_like(n, q, one)
    for i in range(n):
        for j in range(i + 1, n):
            rhs *= z[j] - z[i]
    return lhs, rhs, scale


def _antisym_F(z, q, one):
    n = len(z)
    fv = _mp_f_values if isinstance(one, mpmath.mpc) else f_values
    lhs, scale = 0 * one, 0.0
    for sigma in enumerate_permutations(n):
        w = [z[k] for k in sigma.mapping]
        term = sigma.sign * fv(w, q)
        for i in range(n):
            for j in range(i + 1, n):
                term *= pair_denominator(w[i], w[j], q)
        lhs += term
        scale += abs(term)
    rhs = one
    for i in range(n):
        rhs /= 1 - z[i]
        for j in range(i + 1, n):
            rhs *= z[i] - z[j]
    return lhs, rhs, scale


def _antisymmetrization(sides, z, q):
    """Evaluate in double precision, redoing the sum with ``EXTRA_DIGITS``
    digits when cancellation could push rounding error past 1% of
    ``THRESHOLD``."""
    qv = as_q(q).complex
    lhs, rhs, scale = sides([complex(v) for v in z], qv, 1 + 0j)
    if ROUNDING * float(scale) > 0.01 * THRESHOLD * max(abs(lhs), abs(rhs)):
        with mpmath.workdps(EXTRA_DIGITS):
            zm = [mpmath.mpc(complex(v)) for v in z]
            lhs, rhs, _ = sides(zm, mpmath.mpc(qv), mpmath.mpc(1))
    return complex(lhs), complex(rhs)


def vandermonde_sides(z, q):
    """Both sides of the q-deformed Vandermonde antisymmetrization."""
    return _antisymmetrization(_vandermonde, z, q)


def check_vandermonde_identity(n, z, q):
    if len(z) != n:
        raise StateError("need n points")
    lhs, rhs = vandermonde_sides(z, q)
    return IdentityReport("vandermonde", n, 1, residual(lhs, rhs), THRESHOLD,
                          {"z": _cpair(z), "q": _cpair(as_q(q).complex)[0]})


def antisym_F_sides(z, q):
    return _antisymmetrization(_antisym_F, z, q)


def check_antisym_F(N, z, q):
    if len(z) != N:
        raise StateError("need N points")
    lhs, rhs = antisym_F_sides(z, q)
    return IdentityReport("antisymF", N, 1, residual(lhs, rhs), THRESHOLD,
                          {"z": _cpair(z), "q": _cpair(as_q(q).complex)[0]})


def f_recursion_sides(sigma, z, q):
    """``sum_i q^i F_{T_i...T_0 sigma}`` at ``z_sigma(N) = 0`` and ``F_sigma'``.

    ``T_i ... T_0`` carries ``sigma(N)`` from the last slot ``i`` places to
    the left; ``sigma'`` drops it. The substitution simply overwrites the
    coordinate, so a tuple that already has ``z_sigma(N) = 0`` is unchanged.
    """
    if not isinstance(sigma, Permutation):
        sigma = Permutation(tuple(sigma))
    qv = as_q(q).complex
    n = len(sigma)
    z = [complex(v) for v in z]
    z[sigma.mapping[-1]] = 0j
    head = [z[k] for k in sigma.mapping[:-1]]
    lhs = 0j
    for i in range(n):
        w = head[: n - 1 - i] + [0j] + head[n - 1 - i :]
        lhs += qv**i * f_values(w, qv)
    rhs = f_values(head, qv)
    return lhs, rhs


def check_f_recursion(N, sigma, z, q):
    if len(z) != N or len(sigma) != N:
        raise StateError("need N points and a permutation of N")
    lhs, rhs = f_recursion_sides(sigma, z, q)
    mapping = sigma.mapping if isinstance(sigma, Permutation) else tuple(sigma)
    return IdentityReport("recursion", N, 1, residual(lhs, rhs), THRESHOLD,
                          {"sigma": list(mapping), "z": _cpair(z), "q": _cpair(as_q(q).complex)[0]})


def _positions(configuration):
    """Integer positions as a list (no ordering requirement)."""
    return [int(v) for v in configuration]


def _u0(pos, ctx, t, Y):
    return bethe_integrand(tuple(pos), Y, t, ctx)


def boundary_sides(pos, a, ctx, t=0.3, Y=None):
    """Exchange relation at the adjacent pair ``(a, a+1)`` (left-most first).

    ``u(.., x, x-1, ..) = q u(.., x-1, x, ..) - (q-1) u(.., x, x, ..)`` where
    ``x = pos[a]``.
    """
    Y = Y if Y is not None else (0,) * ctx.n
    qv = ctx.q.complex
    x = pos[a]
    swapped, lower, equal = list(pos), list(pos), list(pos)
    swapped[a + 1] = x - 1
    lower[a], lower[a + 1] = x - 1, x
    equal[a + 1] = x
    lhs = _u0(swapped, ctx, t, Y)
    rhs = qv * _u0(lower, ctx, t, Y) - (qv - 1) * _u0(equal, ctx, t, Y)
    return lhs, rhs


def cluster_sides(pos, start, size, i, ctx, t=0.3, Y=None):
    """Cluster relation ``u(X_i) = q^(i-1) u(X_1) - (q^(i-1) - 1) u(X)``.

    ``pos[start:start+size]`` is the cluster (left-most first); ``X_i``
    lowers its ``i``-th element from the left by one.
    """
    Y = Y if Y is not None else (0,) * ctx.n
    qv = ctx.q.complex
    cluster = pos[start : start + size]
    if len(set(cluster)) != 1 or len(cluster) != size:
        raise StateError("the cluster must be a block of equal positions")

    def lowered(k):
        out = list(pos)
        out[start + k - 1] -= 1
        return out

    lhs = _u0(lowered(i), ctx, t, Y)
    rhs = qv ** (i - 1) * _u0(lowered(1), ctx, t, Y) - (qv ** (i - 1) - 1) * _u0(pos, ctx, t, Y)
    return lhs, rhs


def check_boundary_terms(N, configuration, z, q, t=0.3):
    """Exchange relation at every adjacent pair of ``configuration`` and the
    cluster relation for every cluster of size >= 2 and every ``i``."""
    pos = list(_positions(configuration))
    if len(pos) != N or len(z) != N:
        raise StateError("configuration and z must have N entries")
    ctx = BetheContext(q, tuple(z))
    worst, wres, count = {}, 0.0, 0
    for a in range(N - 1):
        res = residual(*boundary_sides(pos, a, ctx, t))
        count += 1
        if res >= wres:
            wres, worst = res, {"kind": "exchange", "pair": a}
    start = 0
    while start < N:
        end = start
        while end + 1 < N and pos[end + 1] == pos[start]:
            end += 1
        size = end - start + 1
        for i in range(1, size + 1):
            res = residual(*cluster_sides(pos, start, size, i, ctx, t))
            count += 1
            if res >= wres:
                wres, worst = res, {"kind": "cluster", "start": start, "size": size, "i": i}
        start = end + 1
    worst.update({"configuration": pos, "z": _cpair(z), "q": _cpair(as_q(q).complex)[0]})
    return IdentityReport("boundary", N, count, wres, THRESHOLD, worst)


def free_equation_sides(X, z, q, t, Y=None):
    """``d/dt u`` (via ``sum eps(z_i)``) against the shifted-argument sum."""
    X = _positions(X)
    n = len(X)
    Y = Y if Y is not None else (0,) * n
    ctx = BetheContext(q, tuple(z))
    base = _u0(X, ctx, t, Y)
    lhs = sum(energy(v) for v in ctx.z) * base
    rhs = -n * base
    for a in range(n):
        shifted = list(X)
        shifted[a] -= 1
        rhs += _u0(shifted, ctx, t, Y)
    return lhs, rhs


def check_free_equation(N, X, z, q, t):
    if len(X) != N or len(z) != N:
        raise StateError("X and z must have N entries")
    lhs, rhs = free_equation_sides(X, z, q, t)
    return IdentityReport("free", N, 1, residual(lhs, rhs), THRESHOLD,
                          {"X": _positions(X), "z": _cpair(z), "q": _cpair(as_q(q).complex)[0], "t": t})


# ---------------------------------------------------------------------------
# battery
# ---------------------------------------------------------------------------

QFACT_CASES = ((1, 0.5), (2, 0.5), (3, 0.8), (3, 0.2 - 0.6j), (4, 0.5), (4, 0.3 + 0.2j))


def _battery_qfact(seed):
    reports = [check_q_factorial_integral(n, q) for n, q in QFACT_CASES]
    return IdentityReport.merge("qfact", max(n for n, _ in QFACT_CASES), reports)


def _point_battery(name, check, sizes, trials, seed):
    rng = np.random.default_rng(seed)
    reports = []
    for n in sizes:
        for _ in range(trials):
            q = random_q(rng)
            reports.append(check(rng, n, q))
    return IdentityReport.merge(name, max(sizes), reports)


def _battery_vandermonde(seed, trials=100):
    return _point_battery(
        "vandermonde",
        lambda rng, n, q: check_vandermonde_identity(n, random_points(rng, n, q), q),
        range(1, 7), trials, seed,
    )


def _battery_antisym(seed, trials=50):
    return _point_battery(
        "antisymF",
        lambda rng, n, q: check_antisym_F(n, random_points(rng, n, q), q),
        range(1, 6), trials, seed,
    )


def _random_perm(rng, n):
    return Permutation(tuple(int(v) for v in rng.permutation(n)))


def _battery_recursion(seed, trials=50):
    return _point_battery(
        "recursion",
        lambda rng, n, q: check_f_recursion(n, _random_perm(rng, n), random_points(rng, n, q), q),
        range(2, 5), trials, seed,
    )


def _random_configuration(rng, n):
    """Left-most-first positions with random clusters."""
    gaps = rng.integers(0, 3, n - 1)
    gaps[rng.random(n - 1) < 0.5] = 0
    return [int(v) for v in np.concatenate([[rng.integers(-2, 3)], gaps]).cumsum()]


def _contour_points(rng, n, q):
    q = as_q(q)
    r = rng.uniform(0.2, 0.8) * q.r_max
    return r * np.exp(2j * np.pi * rng.uniform(0, 1, n))


def _battery_boundary(seed, trials=50):
    def one(rng, n, q):
        return check_boundary_terms(n, _random_configuration(rng, n), _contour_points(rng, n, q), q,
                                         t=float(rng.uniform(0, 2)))

    return _point_battery("boundary", one, range(2, 5), trials, seed)


def _battery_free(seed, trials=50):
    def one(rng, n, q):
        X = [int(v) for v in rng.integers(-3, 4, n)]
        return check_free_equation(n, X, _contour_points(rng, n, q), q, float(rng.uniform(0, 2)))

    return _point_battery("free", one, range(1, 4), trials, seed)


BATTERY = {
    "poles": lambda seed: pole_sweep(1000, seed),
    "qfact": _battery_qfact,
    "vandermonde": _battery_vandermonde,
    "antisymF": _battery_antisym,
    "recursion": _battery_recursion,
    "boundary": _battery_boundary,
    "free": _battery_free,
}


def run_battery(names=IDENTITY_NAMES, seed=None):
    """Run the named checks; ``seed`` overrides every per-check default seed."""
    out = []
    for name in names:
        if name not in BATTERY:
            raise StateError(f"unknown identity {name!r}; choose from {', '.join(IDENTITY_NAMES)}")
        out.append(BATTERY[name](DEFAULT_SEEDS[name] if seed is None else seed + DEFAULT_SEEDS[name]))
    return out
