"""Numba vs numpy timings for the hot kernels.

    python benchmarks/bench_kernels.py [--repeat 3]

Each case is run once untimed (JIT compile / cache load), then ``--repeat``
times; the best wall time is reported together with the max deviation
between the two backends' outputs.
"""
import argparse
import time

import numpy as np

from qtazrp._accel import HAVE_NUMBA
from qtazrp.contour import ContourSpec
from qtazrp.leftmost import cdf_step_values, pmf_values
from qtazrp.oracle import gillespie_ensemble
from qtazrp.transition import coefficient_tensor, direct_sum


def _cases():
    spec = ContourSpec(0.5, None, 0.5)
    g64, g128 = spec.grid(64), spec.grid(128)
    x3, y3 = np.array([4, 2, 1]), np.array([3, 1, 0])
    return {
        "direct N=3 M=64": lambda b: direct_sum(x3, y3, 1.0, 0.5, g64, b),
        "batch N=2 M=128": lambda b: coefficient_tensor(np.array([1, 0]), 1.0, 0.5, g128, 0, 16, b),
        "batch N=3 M=64": lambda b: coefficient_tensor(y3, 1.0, 0.5, g64, 0, 12, b),
        "leftmost N=3 M=64": lambda b: pmf_values(y3, np.arange(0, 10), 1.0, 0.5, g64, b),
        "det N=3 M=64": lambda b: cdf_step_values(3, np.arange(1, 10), 1.0, 0.5, g64, b),
        "gillespie N=3 2e5": lambda b: gillespie_ensemble((0, 0, 1), 1.0, 0.5, 200_000, 7, backend=b),
    }


def _best(fn, backend, repeat):
    out = fn(backend)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(backend)
        best = min(best, time.perf_counter() - t0)
    return best, np.asarray(out)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not importable; nothing to compare")
        return 1
    print(f"{'case':<22}{'numba s':>10}{'numpy s':>10}{'speedup':>9}{'max |diff|':>12}")
    for name, fn in _cases().items():
        t_nb, out_nb = _best(fn, "numba", args.repeat)
        t_np, out_np = _best(fn, "numpy", args.repeat)
        diff = float(np.max(np.abs(out_nb - out_np))) if out_nb.size else 0.0
        print(f"{name:<22}{t_nb:>10.4f}{t_np:>10.4f}{t_np / t_nb:>9.1f}{diff:>12.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
