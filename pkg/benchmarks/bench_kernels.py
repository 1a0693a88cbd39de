"""Compare the compiled kernel core against the NumPy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints best-of-N wall time per kernel and problem size, and the maximum
absolute difference between the two backends.
"""
import argparse
import time

import numpy as np

from gperrprop import _pykernels

try:
    from gperrprop import _ckernels
except ImportError:  # extension not built
    _ckernels = None

SIZES = [
    # (test rows M, train rows N, dim D)
    (200, 200, 2),
    (4000, 2000, 4),
    (100_000, 500, 2),
    (1000, 1000, 90),
]
KERNELS = ("rbf_matrix", "rbf_mean", "rbf_mean_grad")


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(a - b)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled core not available; build with `pip install -e . --no-build-isolation`")
        return
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<14} {'M':>7} {'N':>6} {'D':>4} {'numpy s':>10} {'cython s':>10} {'speedup':>8} {'max|diff|':>10}")
    for m, n, d in SIZES:
        T = rng.uniform(-1, 1, (m, d))
        X = rng.uniform(-1, 1, (n, d))
        alpha = rng.standard_normal(n)
        ls = 0.5 * np.sqrt(d)
        for name in KERNELS:
            if name == "rbf_matrix" and m * n > 20_000_000:
                continue
            extra = () if name == "rbf_matrix" else (alpha,)
            py = getattr(_pykernels, name)
            cy = getattr(_ckernels, name)
            tp, op = best_time(lambda: py(T, X, *extra, ls), args.repeat)
            tc, oc = best_time(lambda: cy(T, X, *extra, ls), args.repeat)
            print(f"{name:<14} {m:>7} {n:>6} {d:>4} {tp:>10.4f} {tc:>10.4f} {tp / tc:>8.2f} {max_diff(op, oc):>10.2e}")


if __name__ == "__main__":
    main()
