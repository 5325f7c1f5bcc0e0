"""Gillespie kernels for the zero range process and its exclusion image.

Randomness is counter-based: draw ``c`` of sample ``i`` under seed ``s`` is a
pure function of ``(s, i, c)`` (splitmix64 finalizer), so trajectories do
not depend on the worker count or on which backend runs them.

Both dynamics consume random numbers in the same pattern (holding time, then
event choice, blocks scanned left to right), which couples them exactly:
with a shared seed the exclusion trajectory is the image of the ZRP one.
"""
import numpy as np

from .._accel import JIT_OPTIONS, PARALLEL_JIT_OPTIONS, USE_NUMBA, numba

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

if numba is not None:
    _njit = numba.njit(**JIT_OPTIONS)
    _pnjit = numba.njit(**PARALLEL_JIT_OPTIONS)
    _prange = numba.prange
else:  # pragma: no cover
    _njit = _pnjit = lambda f: f
    _prange = range


def _mix(x):
    x = (x ^ (x >> _S30)) * _M1
    x = (x ^ (x >> _S27)) * _M2
    return x ^ (x >> _S31)


def _uniform(key, counter):
    v = _mix(key + (counter + np.uint64(1)) * _GOLDEN)
    return ((v >> _S11).astype(np.float64) + 0.5) * _INV53


def stream_keys(seed, indices):
    """Per-sample stream keys (numpy, vectorized)."""
    with np.errstate(over="ignore"):
        idx = np.asarray(indices, dtype=np.uint64)
        return _mix(np.uint64(seed) ^ _mix(idx * _GOLDEN + _GOLDEN))


@_njit
def _mix_nb(x):
    x = (x ^ (x >> _S30)) * _M1
    x = (x ^ (x >> _S27)) * _M2
    return x ^ (x >> _S31)


@_njit
def _uniform_nb(key, counter):
    v = _mix_nb(key + (counter + np.uint64(1)) * _GOLDEN)
    return (np.float64(v >> _S11) + 0.5) * _INV53


@_pnjit
def _zrp_nb(y0, t, rates, keys, out):
    n = y0.shape[0]
    for s in _prange(keys.shape[0]):
        pos = y0.copy()
        key = keys[s]
        c = np.uint64(0)
        tcur = 0.0
        while True:
            total = 0.0
            for i in range(n):
                if i == n - 1 or pos[i] != pos[i + 1]:
                    k = 0
                    for j in range(n):
                        if pos[j] == pos[i]:
                            k += 1
                    total += rates[k]
            u = _uniform_nb(key, c)
            c += np.uint64(1)
            tcur += -np.log(u) / total
            if tcur > t:
                break
            target = _uniform_nb(key, c) * total
            c += np.uint64(1)
            acc = 0.0
            chosen = -1
            for i in range(n):
                if i == n - 1 or pos[i] != pos[i + 1]:
                    k = 0
                    for j in range(n):
                        if pos[j] == pos[i]:
                            k += 1
                    acc += rates[k]
                    chosen = i
                    if target < acc:
                        break
            pos[chosen] += 1
        out[s, :] = pos


@_pnjit
def _exclusion_nb(y0, t, rates, keys, out):
    n = y0.shape[0]
    for s in _prange(keys.shape[0]):
        pos = y0.copy()
        key = keys[s]
        c = np.uint64(0)
        tcur = 0.0
        while True:
            total = 0.0
            run = 1
            for i in range(n):
                if i == n - 1 or pos[i + 1] != pos[i] + 1:
                    total += rates[run]
                    run = 1
                else:
                    run += 1
            u = _uniform_nb(key, c)
            c += np.uint64(1)
            tcur += -np.log(u) / total
            if tcur > t:
                break
            target = _uniform_nb(key, c) * total
            c += np.uint64(1)
            acc = 0.0
            chosen = -1
            run = 1
            for i in range(n):
                if i == n - 1 or pos[i + 1] != pos[i] + 1:
                    acc += rates[run]
                    run = 1
                    chosen = i
                    if target < acc:
                        break
                else:
                    run += 1
            pos[chosen] += 1
        out[s, :] = pos


def _step_np(pos, active, tcur, counter, keys, t, rates, block_rates):
    """Advance every active sample by one event (numpy backend)."""
    rate_el = block_rates(pos)
    acc = np.cumsum(rate_el, axis=1)
    total = acc[:, -1]
    with np.errstate(over="ignore"):
        u = _uniform(keys, counter)
        counter = counter + np.uint64(1)
    tnew = tcur + (-np.log(u) / total)
    finished = active & (tnew > t)
    moving = active & ~finished
    with np.errstate(over="ignore"):
        target = _uniform(keys, counter) * total
        counter = np.where(moving, counter + np.uint64(1), counter)
    hit = (target[:, None] < acc) & (rate_el > 0)
    last_block = rate_el.shape[1] - 1 - np.argmax((rate_el > 0)[:, ::-1], axis=1)
    chosen = np.where(hit.any(axis=1), np.argmax(hit, axis=1), last_block)
    rows = np.nonzero(moving)[0]
    pos[rows, chosen[rows]] += 1
    tcur = np.where(moving, tnew, tcur)
    return moving, tcur, counter


def _zrp_block_rates(rates):
    def block_rates(pos):
        n = pos.shape[1]
        out = np.zeros(pos.shape, dtype=np.float64)
        for i in range(n):
            last = np.ones(pos.shape[0], dtype=bool) if i == n - 1 else pos[:, i] != pos[:, i + 1]
            k = (pos == pos[:, i : i + 1]).sum(axis=1)
            out[:, i] = np.where(last, rates[k], 0.0)
        return out

    return block_rates


def _exclusion_block_rates(rates):
    def block_rates(pos):
        n = pos.shape[1]
        out = np.zeros(pos.shape, dtype=np.float64)
        run = np.ones(pos.shape[0], dtype=np.int64)
        for i in range(n):
            last = np.ones(pos.shape[0], dtype=bool) if i == n - 1 else pos[:, i + 1] != pos[:, i] + 1
            out[:, i] = np.where(last, rates[run], 0.0)
            run = np.where(last, 1, run + 1)
        return out

    return block_rates


def _run_np(y0, t, rates, keys, block_rates):
    pos = np.tile(np.asarray(y0, dtype=np.int64), (keys.shape[0], 1))
    active = np.ones(keys.shape[0], dtype=bool)
    tcur = np.zeros(keys.shape[0])
    counter = np.zeros(keys.shape[0], dtype=np.uint64)
    while active.any():
        active, tcur, counter = _step_np(pos, active, tcur, counter, keys, t, rates, block_rates)
    return pos


def zrp_ensemble(y0, t, rates, keys, backend=None):
    """Final positions ``(S, N)`` (left-most first) of independent ZRP runs."""
    y0 = np.ascontiguousarray(y0, dtype=np.int64)
    rates = np.ascontiguousarray(rates, dtype=np.float64)
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    if (backend or ("numba" if USE_NUMBA else "numpy")) == "numba":
        out = np.empty((keys.shape[0], y0.shape[0]), dtype=np.int64)
        _zrp_nb(y0, float(t), rates, keys, out)
        return out
    return _run_np(y0, float(t), rates, keys, _zrp_block_rates(rates))


def exclusion_ensemble(y0, t, rates, keys, backend=None):
    """Final positions ``(S, N)`` (left-most first) of the cluster-rate dynamics."""
    y0 = np.ascontiguousarray(y0, dtype=np.int64)
    rates = np.ascontiguousarray(rates, dtype=np.float64)
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    if (backend or ("numba" if USE_NUMBA else "numpy")) == "numba":
        out = np.empty((keys.shape[0], y0.shape[0]), dtype=np.int64)
        _exclusion_nb(y0, float(t), rates, keys, out)
        return out
    return _run_np(y0, float(t), rates, keys, _exclusion_block_rates(rates))
