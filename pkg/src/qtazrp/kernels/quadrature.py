"""Tensor-product contour kernels.

Every kernel exists twice: a numba ``@njit`` loop over node tuples and a
vectorized numpy version over blocks of tuples. Both consume identical
precomputed tables and return identical quantities, so either can check the
other.

Conventions shared by all kernels
---------------------------------
``nodes``   (M,) complex contour nodes ``r * exp(2 pi i j / M)``.
``ptab``    (M, E) table with ``ptab[j, e - pmin] = nodes[j] ** e``.
``ef``      (M,) per-node factor ``exp(eps(z_j) t) / M`` (quadrature weight
            ``z_j / M`` with the ``z^-1`` of the integrand already cancelled).
Node tuples are flattened in C order; the leading index is the unit of work.
A nonzero ``bad`` return flags a denominator below ``floor``.
"""
import math

import numpy as np

from .._accel import JIT_OPTIONS, PARALLEL_JIT_OPTIONS, USE_NUMBA, numba

RECOMPUTE_EVERY = 1024


def _njit(parallel=False):
    if numba is None:  # pragma: no cover
        return lambda f: f
    return numba.njit(**(PARALLEL_JIT_OPTIONS if parallel else JIT_OPTIONS))


_prange = numba.prange if numba is not None else range


# --------------------------------------------------------------------------
# numba backend
# --------------------------------------------------------------------------


def pair_table(nodes, q, floor):
    """``snt[k, j] = s(z_j, z_k)`` over all node pairs, diagonal ``-1``.

    Returns ``(snt, bad)``; ``bad`` is True when some denominator
    ``D(z_a, z_b)`` with ``a != b`` falls below ``floor``.
    """
    za = nodes[:, None]
    zb = nodes[None, :]
    den = za - q * zb - (1 - q) * za * zb
    np.fill_diagonal(den, 1.0)
    bad = bool(np.any(np.abs(den) < floor))
    den = np.where(np.abs(den) < floor, 1.0, den)
    S = -den.T / den
    np.fill_diagonal(S, -1.0)
    return np.ascontiguousarray(S.T), bad


@_njit()
def _decode(flat, M, idx):
    n = idx.shape[0]
    for d in range(n - 1, -1, -1):
        idx[d] = flat % M
        flat //= M


@_njit(parallel=True)
def _direct_partials_nb(snt, ptab, pmin, expo, ef, perms, swaps):
    M = ptab.shape[0]
    n = expo.shape[0]
    nperm = perms.shape[0]
    rest = M ** (n - 1)
    partial = np.zeros(M, dtype=np.complex128)
    for lead in _prange(M):
        idx = np.empty(n, dtype=np.int64)
        S = np.empty((n, n), dtype=np.complex128)
        Pw = np.empty((n, n), dtype=np.complex128)
        acc = 0.0 + 0.0j
        comp = 0.0 + 0.0j
        for r in range(rest):
            _decode(lead * rest + r, M, idx)
            efac = 1.0 + 0.0j
            for a in range(n):
                efac *= ef[idx[a]]
                for b in range(n):
                    S[a, b] = snt[idx[b], idx[a]]
                    # Pw[i, k] = z_k ** (x_i - y_k)
                    Pw[a, b] = ptab[idx[b], expo[a, b] - pmin]
            total = 0.0 + 0.0j
            amp = 1.0 + 0.0j
            for s in range(nperm):
                if s > 0:
                    if s % RECOMPUTE_EVERY == 0:
                        amp = 1.0 + 0.0j
                        for p in range(n):
                            for pp in range(p + 1, n):
                                if perms[s, p] > perms[s, pp]:
                                    amp *= S[perms[s, pp], perms[s, p]]
                    else:
                        p = swaps[s]
                        # S[a, b] creates inversion (a, b) when a < b and equals
                        # 1 / S[b, a] (destroys inversion (b, a)) when a > b.
                        amp *= S[perms[s - 1, p], perms[s - 1, p + 1]]
                term = amp
                for i in range(n):
                    term *= Pw[i, perms[s, i]]
                total += term
            y = total * efac - comp
            tsum = acc + y
            comp = (tsum - acc) - y
            acc = tsum
        partial[lead] = acc
    return partial


@_njit(parallel=True)
def _sym_block_nb(snt, ytab, ef, invmask, lead_start, lead_stop):
    nperm, n, M = ytab.shape
    rest = M ** (n - 1)
    nlead = lead_stop - lead_start
    out = np.empty(nlead * rest, dtype=np.complex128)
    if n == 1:
        for li in range(nlead):
            out[li] = ytab[0, 0, lead_start + li] * ef[lead_start + li]
        return out
    nmid = rest // M
    last = n - 1
    for li in _prange(nlead):
        idx = np.empty(last, dtype=np.int64)
        pre = np.empty(nperm, dtype=np.complex128)
        acc = np.empty(M, dtype=np.complex128)
        for mid in range(nmid):
            rem = mid
            for d in range(last - 1, 0, -1):
                idx[d] = rem % M
                rem //= M
            idx[0] = lead_start + li
            efp = 1.0 + 0.0j
            for p in range(last):
                efp *= ef[idx[p]]
            # everything not involving the last coordinate
            for s in range(nperm):
                v = efp
                for p in range(last):
                    v *= ytab[s, p, idx[p]]
                    for pp in range(p + 1, last):
                        if invmask[s, p, pp]:
                            v *= snt[idx[p], idx[pp]]
                pre[s] = v
            acc[:] = 0.0
            for s in range(nperm):
                ps = pre[s]
                for j in range(M):
                    v = ps * ytab[s, last, j]
                    for p in range(last):
                        if invmask[s, p, last]:
                            v *= snt[idx[p], j]
                    acc[j] += v
            base = li * rest + mid * M
            for j in range(M):
                out[base + j] = acc[j] * ef[j]
    return out


@_njit(parallel=True)
def _leftmost_bins_nb(nodes, ptab, pmin, yexp, ef, q, floor):
    M = nodes.shape[0]
    n = yexp.shape[0]
    rest = M ** (n - 1)
    bins = np.zeros((M, M), dtype=np.complex128)
    badflag = np.zeros(M, dtype=np.int64)
    for lead in _prange(M):
        idx = np.empty(n, dtype=np.int64)
        z = np.empty(n, dtype=np.complex128)
        for r in range(rest):
            _decode(lead * rest + r, M, idx)
            g = 1.0 + 0.0j
            prodz = 1.0 + 0.0j
            ssum = 0
            for k in range(n):
                z[k] = nodes[idx[k]]
                g *= ef[idx[k]] * ptab[idx[k], yexp[k] - pmin] / (1.0 - z[k])
                prodz *= z[k]
                ssum += idx[k]
            for a in range(n):
                for b in range(a + 1, n):
                    den = z[a] - q * z[b] - (1.0 - q) * z[a] * z[b]
                    if abs(den) < floor:
                        badflag[lead] = 1
                        den = 1.0
                        g = 0.0
                    g *= (z[a] - z[b]) / den
            g *= 1.0 - prodz
            bins[lead, ssum % M] += g
    return bins.sum(axis=0), badflag.max()


@_njit()
def _det_lu(A, floor):
    """Determinant by Gaussian elimination with partial pivoting (A is overwritten)."""
    n = A.shape[0]
    det = 1.0 + 0.0j
    for c in range(n):
        piv = c
        best = abs(A[c, c])
        for rr in range(c + 1, n):
            v = abs(A[rr, c])
            if v > best:
                best = v
                piv = rr
        if best == 0.0:
            # exactly repeated nodes give equal rows: an honest zero
            return 0.0 + 0.0j, 0
        if best < floor:
            return 0.0 + 0.0j, 1
        if piv != c:
            for k in range(n):
                tmp = A[c, k]
                A[c, k] = A[piv, k]
                A[piv, k] = tmp
            det = -det
        det *= A[c, c]
        for rr in range(c + 1, n):
            f = A[rr, c] / A[c, c]
            for k in range(c, n):
                A[rr, k] -= f * A[c, k]
    return det, 0


@_njit(parallel=True)
def _det_bins_nb(nodes, n, ef, q, floor):
    M = nodes.shape[0]
    rest = M ** (n - 1)
    bins = np.zeros((M, M), dtype=np.complex128)
    badflag = np.zeros(M, dtype=np.int64)
    for lead in _prange(M):
        idx = np.empty(n, dtype=np.int64)
        z = np.empty(n, dtype=np.complex128)
        A = np.empty((n, n), dtype=np.complex128)
        for r in range(rest):
            _decode(lead * rest + r, M, idx)
            g = 1.0 + 0.0j
            ssum = 0
            for k in range(n):
                z[k] = nodes[idx[k]]
                g *= ef[idx[k]] * z[k]
                ssum += idx[k]
            bad = 0
            for a in range(n):
                for b in range(n):
                    den = z[a] - q * z[b] - (1.0 - q) * z[a] * z[b]
                    if abs(den) < floor:
                        bad = 1
                        den = 1.0
                    A[a, b] = 1.0 / den
            det, singular = _det_lu(A, 0.0)
            if bad or singular:
                badflag[lead] = 1
                continue
            bins[lead, ssum % M] += g * det
    return bins.sum(axis=0), badflag.max()


# --------------------------------------------------------------------------
# numpy backend
# --------------------------------------------------------------------------

_BLOCK = 1 << 18


def _tuple_block(M, n, start, stop):
    return np.array(np.unravel_index(np.arange(start, stop), (M,) * n))


def _direct_partials_np(snt, ptab, pmin, expo, ef, perms, swaps):
    M = ptab.shape[0]
    n = expo.shape[0]
    rest = M ** (n - 1)
    partial = np.zeros(M, dtype=np.complex128)
    for lead in range(M):
        idx = _tuple_block(M, n, lead * rest, (lead + 1) * rest)
        efac = np.prod(ef[idx], axis=0)
        total = np.zeros(rest, dtype=np.complex128)
        amp = np.ones(rest, dtype=np.complex128)
        for s in range(perms.shape[0]):
            if s > 0:
                if s % RECOMPUTE_EVERY == 0:
                    amp = np.ones(rest, dtype=np.complex128)
                    for p in range(n):
                        for pp in range(p + 1, n):
                            a, b = perms[s, pp], perms[s, p]
                            if b > a:
                                amp = amp * snt[idx[b], idx[a]]
                else:
                    p = swaps[s]
                    a, b = perms[s - 1, p], perms[s - 1, p + 1]
                    amp = amp * snt[idx[b], idx[a]]
            term = amp.copy()
            for i in range(n):
                k = perms[s, i]
                term *= ptab[idx[k], expo[i, k] - pmin]
            total += term
        partial[lead] = np.sum(total * efac)
    return partial


def _sym_block_np(snt, ytab, ef, invmask, lead_start, lead_stop):
    nperm, n, M = ytab.shape
    rest = M ** (n - 1)
    idx = _tuple_block(M, n, lead_start * rest, lead_stop * rest)
    total = np.zeros(idx.shape[1], dtype=np.complex128)
    for s in range(nperm):
        term = np.ones(idx.shape[1], dtype=np.complex128)
        for p in range(n):
            term = term * ytab[s, p, idx[p]]
            for pp in range(p + 1, n):
                if invmask[s, p, pp]:
                    term = term * snt[idx[p], idx[pp]]
        total += term
    return total * np.prod(ef[idx], axis=0)


def _leftmost_bins_np(nodes, ptab, pmin, yexp, ef, q, floor):
    M = nodes.shape[0]
    n = yexp.shape[0]
    bins = np.zeros(M, dtype=np.complex128)
    bad = False
    for start in range(0, M**n, _BLOCK):
        idx = _tuple_block(M, n, start, min(start + _BLOCK, M**n))
        Z = nodes[idx]
        g = np.ones(Z.shape[1], dtype=np.complex128)
        for k in range(n):
            g = g * ef[idx[k]] * ptab[idx[k], yexp[k] - pmin] / (1 - Z[k])
        for a in range(n):
            for b in range(a + 1, n):
                den = Z[a] - q * Z[b] - (1 - q) * Z[a] * Z[b]
                small = np.abs(den) < floor
                if small.any():
                    bad = True
                    g = np.where(small, 0, g)
                    den = np.where(small, 1.0, den)
                g = g * (Z[a] - Z[b]) / den
        g = g * (1 - np.prod(Z, axis=0))
        key = idx.sum(axis=0) % M
        bins += np.bincount(key, weights=g.real, minlength=M)
        bins += 1j * np.bincount(key, weights=g.imag, minlength=M)
    return bins, int(bad)


def _det_bins_np(nodes, n, ef, q, floor):
    M = nodes.shape[0]
    bins = np.zeros(M, dtype=np.complex128)
    bad = False
    for start in range(0, M**n, _BLOCK):
        idx = _tuple_block(M, n, start, min(start + _BLOCK, M**n))
        Z = nodes[idx]
        g = np.prod(ef[idx] * Z, axis=0)
        den = Z[:, None, :] - q * Z[None, :, :] - (1 - q) * Z[:, None, :] * Z[None, :, :]
        if np.any(np.abs(den) < floor):
            bad = True
            den = np.where(np.abs(den) < floor, np.inf, den)
        mats = np.moveaxis(1.0 / den, -1, 0)
        det = np.linalg.det(mats)
        key = idx.sum(axis=0) % M
        val = g * det
        bins += np.bincount(key, weights=val.real, minlength=M)
        bins += 1j * np.bincount(key, weights=val.imag, minlength=M)
    return bins, int(bad)


NUMBA = {
    "direct_partials": _direct_partials_nb,
    "sym_block": _sym_block_nb,
    "leftmost_bins": _leftmost_bins_nb,
    "det_bins": _det_bins_nb,
}
NUMPY = {
    "direct_partials": _direct_partials_np,
    "sym_block": _sym_block_np,
    "leftmost_bins": _leftmost_bins_np,
    "det_bins": _det_bins_np,
}


def kernel(name, backend=None):
    """Look up a kernel; ``backend`` is ``"numba"``, ``"numpy"`` or None (active)."""
    if backend is None:
        backend = "numba" if USE_NUMBA else "numpy"
    table = NUMBA if backend == "numba" else NUMPY
    return table[name]


def fsum_complex(values):
    values = np.asarray(values)
    return complex(math.fsum(values.real), math.fsum(values.imag))
