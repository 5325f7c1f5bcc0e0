"""Bethe-ansatz building blocks evaluated at a single point ``z``.

These are the readable reference versions; the grid kernels in
:mod:`qtazrp.kernels.quadrature` compute the same sums over whole node grids.
"""
import cmath
from dataclasses import dataclass, field

import numpy as np

from .contour import overflow_guard
from .errors import ContourPlacementError, StateError
from .qcalc import Permutation, as_q, enumerate_permutations

DENOM_FLOOR = 1e-13
MAX_EXPONENT = 10_000
RECOMPUTE_EVERY = 1024


def pair_denominator(za, zb, q):
    """``z_a - q z_b - (1-q) z_a z_b``, the denominator shared by every formula."""
    return za - q * zb - (1 - q) * za * zb


def s_matrix(za, zb, q):
    """Two-particle scattering factor ``-D(z_b, z_a) / D(z_a, z_b)``.

    This is the factor picked up by the inversion ``(a, b)``; note
    ``s_matrix(za, zb) * s_matrix(zb, za) == 1``.
    """
    q = as_q(q).complex
    den = pair_denominator(za, zb, q)
    if np.any(np.abs(den) < DENOM_FLOOR):
        raise ContourPlacementError(
            f"S-matrix denominator {den!r} below {DENOM_FLOOR} at z_a={za!r}, z_b={zb!r}"
        )
    return -pair_denominator(zb, za, q) / den


def energy(z):
    """Single-particle eigenvalue ``1/z - 1``."""
    if z == 0:
        raise ContourPlacementError("energy is singular at z = 0")
    return 1 / z - 1


@dataclass(frozen=True)
class BetheContext:
    q: object
    z: tuple
    s_cache: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        q = as_q(self.q)
        object.__setattr__(self, "q", q)
        z = tuple(complex(v) for v in self.z)
        if any(v == 0 for v in z):
            raise ContourPlacementError("contour points must be nonzero")
        object.__setattr__(self, "z", z)
        n = len(z)
        cache = np.full((n, n), -1.0 + 0j)
        for a in range(n):
            for b in range(n):
                if a != b:
                    cache[a, b] = s_matrix(z[a], z[b], q)
        cache.setflags(write=False)
        object.__setattr__(self, "s_cache", cache)

    @property
    def n(self):
        return len(self.z)


def amplitude(sigma, ctx):
    """``A_sigma``: product of ``s_cache[a, b]`` over the inversions of ``sigma``."""
    if not isinstance(sigma, Permutation):
        sigma = Permutation(tuple(sigma))
    out = 1 + 0j
    for a, b in sigma.inversion_list:
        out *= ctx.s_cache[a, b]
    return out


def iter_amplitudes(ctx):
    """Yield ``(sigma, A_sigma)`` along the adjacent-transposition stream.

    Each step multiplies by one cached factor; a full recomputation every
    ``RECOMPUTE_EVERY`` steps resets accumulated rounding.
    """
    prev = None
    amp = 1 + 0j
    for step, sigma in enumerate(enumerate_permutations(ctx.n)):
        if prev is not None:
            if step % RECOMPUTE_EVERY == 0:
                amp = amplitude(sigma, ctx)
            else:
                p = sigma.swap
                amp *= ctx.s_cache[prev.mapping[p], prev.mapping[p + 1]]
        prev = sigma
        yield sigma, amp


def _paper_order(state):
    pos = tuple(int(v) for v in getattr(state, "positions", state))
    return pos[::-1]  # (x_1, ..., x_N)


def bethe_integrand(X, Y, t, ctx):
    """Permutation sum of the transition integrand at the point ``ctx.z``.

    ``X`` may be any integer tuple (left-most first), ordered or not, since
    the function is defined on all of ``Z^N``; ``Y`` is the initial state.
    Excludes the state weight and the ``(2 pi i)^-N`` normalization.
    """
    x = _paper_order(X)
    y = _paper_order(Y)
    n = ctx.n
    if len(x) != n or len(y) != n:
        raise StateError("X, Y and z must have the same length")
    if t < 0:
        raise StateError("time must be nonnegative")
    if max(abs(a - b) for a in x for b in y) > MAX_EXPONENT:
        raise StateError(f"|x_i - y_j| exceeds {MAX_EXPONENT}")
    rmin = min(abs(v) for v in ctx.z)
    overflow_guard(t, rmin)
    z = ctx.z
    total = 0j
    for sigma, amp in iter_amplitudes(ctx):
        term = amp
        for i, k in enumerate(sigma.mapping):
            term *= z[k] ** (x[i] - y[k] - 1)
        total += term
    return total * cmath.exp(t * sum(energy(v) for v in z))
