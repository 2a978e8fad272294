"""Compare the compiled evidence kernel against the pure-Python fallback.

Usage: python3 benchmarks/bench_evidence.py [--sizes 8,64,512,4096] [--k 5]
"""

import argparse
import time

import numpy as np

from trajdet import _evidence_py
from trajdet.evidence import BACKEND

try:
    from trajdet import _evidence
except ImportError:
    _evidence = None


def bench(kernel, arrays, k, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for arr in arrays:
            kernel.step_stats(arr, k)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="8,64,512,4096")
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--batch", type=int, default=2000)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    print(f"active backend at import: {BACKEND}")
    if _evidence is None:
        print("compiled extension unavailable; benchmarking fallback only")

    rng = np.random.default_rng(0)
    print(f"{'n':>6}  {'python':>10}  {'cython':>10}  {'speedup':>8}")
    for n in (int(s) for s in args.sizes.split(",")):
        arrays = [np.ascontiguousarray(rng.uniform(0, 10, size=n)) for _ in range(args.batch)]
        t_py = bench(_evidence_py, arrays, args.k, args.repeats)
        if _evidence is not None:
            t_cy = bench(_evidence, arrays, args.k, args.repeats)
            print(f"{n:>6}  {t_py:>9.4f}s  {t_cy:>9.4f}s  {t_py / t_cy:>7.1f}x")
        else:
            print(f"{n:>6}  {t_py:>9.4f}s  {'-':>10}  {'-':>8}")

    # agreement spot check
    for _ in range(200):
        arr = np.ascontiguousarray(rng.uniform(0, 12, size=int(rng.integers(1, 100))))
        k = int(rng.integers(1, 10))
        a = _evidence_py.step_stats(arr, k)
        if _evidence is not None:
            b = _evidence.step_stats(arr, k)
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12), (a, b)
    print("agreement check passed")


if __name__ == "__main__":
    main()
