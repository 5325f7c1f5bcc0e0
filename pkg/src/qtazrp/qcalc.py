"""q-deformed arithmetic and the combinatorial indices used by every formula.

Permutations are 0-based throughout: ``mapping[p]`` is the value sitting at
position ``p``. An inversion ``(a, b)`` is a pair of values ``a < b`` where
``b`` appears before ``a``.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from numbers import Number

import numpy as np

from .errors import StateError

MAX_PERMUTATION_N = 10


@dataclass(frozen=True)
class QParameter:
    """Deformation parameter with ``0 < |q| < 1``.

    ``value`` keeps the caller's numeric type so exact arithmetic with
    ``fractions.Fraction`` works in the scalar helpers.
    """

    value: Number

    def __post_init__(self):
        v = self.value
        if isinstance(v, QParameter):
            object.__setattr__(self, "value", v.value)
            v = v.value
        if isinstance(v, complex) and v.imag == 0:
            object.__setattr__(self, "value", v.real)
        if not 0 < abs(v) < 1:
            raise StateError(f"q must satisfy 0 < |q| < 1, got {v!r}")

    @property
    def complex(self):
        return complex(self.value)

    @property
    def is_real(self):
        return not isinstance(self.value, complex)

    @property
    def r_max(self):
        """Upper bound on the common contour radius, ``(1-|q|)/|1-q|``."""
        q = self.complex
        return (1 - abs(q)) / abs(1 - q)

    @property
    def is_stochastic(self):
        return self.is_real and 0 < float(self.value) < 1

    def require_stochastic(self):
        if not self.is_stochastic:
            raise StateError(
                f"a probabilistic computation needs real 0 < q < 1, got {self.value!r}"
            )
        return float(self.value)


def as_q(q):
    return q if isinstance(q, QParameter) else QParameter(q)


def q_bracket(k, q):
    """The q-number ``[k]_q = 1 + q + ... + q^(k-1)``; ``[0]_q = 0``."""
    if k < 0:
        raise StateError("q_bracket needs k >= 0")
    qv = as_q(q).value
    total = 0
    power = 1
    for _ in range(k):
        total += power
        power *= qv
    return total


def q_factorial(n, q):
    """``[n]_q! = [1]_q [2]_q ... [n]_q`` with ``[0]_q! = 1``."""
    if n < 0:
        raise StateError("q_factorial needs n >= 0")
    out = 1
    for k in range(1, n + 1):
        out *= q_bracket(k, q)
    return out


def state_weight(X, q):
    """Weight ``1 / prod_x [eta(x)]_q!`` over the occupied sites of ``X``."""
    from .states import ZrpState

    X = ZrpState.coerce(X)
    out = 1
    for n in X.occupancy.values():
        out *= q_factorial(n, q)
    return 1 / out


@dataclass(frozen=True)
class Permutation:
    mapping: tuple
    swap: int = None  # position p with (p, p+1) swapped relative to the predecessor
    inversion_list: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = tuple(int(v) for v in self.mapping)
        if sorted(m) != list(range(len(m))):
            raise StateError(f"not a permutation of 0..{len(m) - 1}: {m}")
        object.__setattr__(self, "mapping", m)
        inv = tuple(
            (m[j], m[i])
            for i in range(len(m))
            for j in range(i + 1, len(m))
            if m[i] > m[j]
        )
        object.__setattr__(self, "inversion_list", inv)

    def __len__(self):
        return len(self.mapping)

    @property
    def inv_count(self):
        return len(self.inversion_list)

    @property
    def sign(self):
        return -1 if self.inv_count % 2 else 1

    def inverse(self):
        inv = [0] * len(self.mapping)
        for p, v in enumerate(self.mapping):
            inv[v] = p
        return Permutation(tuple(inv))


def enumerate_permutations(n):
    """Yield all ``n!`` permutations in Steinhaus-Johnson-Trotter order.

    Consecutive permutations differ by one adjacent transposition; each
    yielded permutation records the swapped position in ``swap`` (``None``
    for the identity, which comes first).
    """
    if not 1 <= n <= MAX_PERMUTATION_N:
        raise StateError(f"permutation enumeration supports 1 <= N <= {MAX_PERMUTATION_N}")
    perm = list(range(n))
    direction = [-1] * n  # Even's speedup: every element starts moving left
    yield Permutation(tuple(perm))
    while True:
        mobile, pos = -1, -1
        for p, v in enumerate(perm):
            nb = p + direction[v]
            if 0 <= nb < n and perm[nb] < v and v > mobile:
                mobile, pos = v, p
        if mobile < 0:
            return
        nb = pos + direction[mobile]
        perm[pos], perm[nb] = perm[nb], perm[pos]
        for v in range(mobile + 1, n):
            direction[v] = -direction[v]
        yield Permutation(tuple(perm), swap=min(pos, nb))


@lru_cache(maxsize=None)
def permutation_tables(n):
    """SJT stream packed for the kernels.

    Returns ``(perms, swaps, inv_pairs)`` where ``perms`` is ``(n!, n)``,
    ``swaps[k]`` is the swapped position for step ``k`` (``-1`` for the
    identity) and ``inv_pairs[k]`` is an ``(n, n)`` 0/1 mask of position pairs
    ``p < p'`` whose values are out of order.
    """
    stream = list(enumerate_permutations(n))
    perms = np.array([s.mapping for s in stream], dtype=np.int64)
    swaps = np.array([-1 if s.swap is None else s.swap for s in stream], dtype=np.int64)
    mask = np.zeros((len(stream), n, n), dtype=np.int8)
    for k, s in enumerate(stream):
        m = s.mapping
        for p in range(n):
            for pp in range(p + 1, n):
                if m[p] > m[pp]:
                    mask[k, p, pp] = 1
    for arr in (perms, swaps, mask):
        arr.setflags(write=False)
    return perms, swaps, mask


@dataclass(frozen=True)
class Composition:
    parts: tuple

    def __post_init__(self):
        parts = tuple(int(m) for m in self.parts)
        if not parts or any(m < 1 for m in parts):
            raise StateError(f"composition parts must be positive, got {parts}")
        object.__setattr__(self, "parts", parts)

    @property
    def total(self):
        return sum(self.parts)

    @property
    def partial_sums(self):
        """``m_1, m_1+m_2, ..., m_1+...+m_{n-1}`` (the last full sum excluded)."""
        out, acc = [], 0
        for m in self.parts[:-1]:
            acc += m
            out.append(acc)
        return tuple(out)

    def gap_pattern(self):
        """Binary ``(k_1, ..., k_{N-1})``: 1 exactly at the partial sums.

        ``k_j = 0`` means the ``j``-th and ``(j+1)``-th particles from the
        left share a site.
        """
        marks = set(self.partial_sums)
        return tuple(1 if j in marks else 0 for j in range(1, self.total))

    @classmethod
    def from_gaps(cls, gaps):
        """Inverse of :meth:`gap_pattern`; nonzero entries count as 1."""
        parts, run = [], 1
        for k in gaps:
            if k < 0:
                raise StateError("gaps must be nonnegative")
            if k:
                parts.append(run)
                run = 1
            else:
                run += 1
        parts.append(run)
        return cls(tuple(parts))


def enumerate_compositions(n):
    """Yield all ``2**(n-1)`` compositions of ``n``."""
    if n < 1:
        raise StateError("compositions need n >= 1")
    for mask in range(2 ** (n - 1)):
        yield Composition.from_gaps([(mask >> j) & 1 for j in range(n - 1)])
