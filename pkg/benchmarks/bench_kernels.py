"""Timing comparison of the compiled warping kernels vs the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--n 200] [--reps 20]
"""

import argparse
import time

import numpy as np

from spendcycles.kernels import _warp_py

try:
    from spendcycles.kernels import _warp
except ImportError:
    _warp = None


def best_of(fn, reps, *args):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=200, help="series length")
    ap.add_argument("--reps", type=int, default=20, help="repetitions, best kept")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    x = rng.normal(size=args.n)
    y = rng.normal(size=args.n)

    rows = [("dtw_sqcost", (x, y, 0)),
            ("dtw_sqcost banded w=10", (x, y, 10)),
            ("sdtw_value g=1", (x, y, 1.0))]
    print(f"n={args.n}, best of {args.reps}")
    print(f"{'kernel':<24}{'python':>12}{'compiled':>12}{'speedup':>9}")
    for name, call in rows:
        fn_name = name.split()[0]
        t_py = best_of(getattr(_warp_py, fn_name), args.reps, *call)
        if _warp is None:
            print(f"{name:<24}{t_py * 1e3:>10.3f}ms{'-':>12}{'-':>9}")
            continue
        t_c = best_of(getattr(_warp, fn_name), args.reps, *call)
        print(f"{name:<24}{t_py * 1e3:>10.3f}ms{t_c * 1e3:>10.3f}ms"
              f"{t_py / t_c:>8.1f}x")


if __name__ == "__main__":
    main()
