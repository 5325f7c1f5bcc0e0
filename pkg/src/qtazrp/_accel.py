"""Backend selection for the hot kernels.

Set ``QTAZRP_NO_NUMBA=1`` to force the pure-numpy kernels; otherwise numba is
used when it imports cleanly. ``QTAZRP_NUM_THREADS`` caps the worker count for
both backends (default: all available cores).
"""
import logging
import os

logger = logging.getLogger(__name__)

_FALSY = {"", "0", "false", "no", "off"}


def _env_flag(name):
    return os.environ.get(name, "").strip().lower() not in _FALSY


# The system TBB is often too old for numba; skip it instead of warning.
os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp workqueue tbb")

try:
    import numba

    HAVE_NUMBA = True
except Exception:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _env_flag("QTAZRP_NO_NUMBA")

JIT_OPTIONS = {"nogil": True, "cache": True}
PARALLEL_JIT_OPTIONS = {**JIT_OPTIONS, "parallel": True}


def num_threads():
    """Worker count from ``QTAZRP_NUM_THREADS``, falling back to the core count."""
    raw = os.environ.get("QTAZRP_NUM_THREADS", "").strip()
    if raw:
        n = int(raw)
        if n < 1:
            raise ValueError("QTAZRP_NUM_THREADS must be a positive integer")
        return n
    return os.cpu_count() or 1


def configure_threads(n=None):
    """Apply a thread count to numba's pool (no-op for the numpy backend)."""
    n = num_threads() if n is None else int(n)
    if USE_NUMBA:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    return n


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
