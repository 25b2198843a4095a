"""Benchmark the numba kernels against the pure-numpy fallbacks.

Runs each permutation-null kernel on a representative calibration workload
and prints per-path timings plus speedup.  The numpy path is what you get
with GSRDETECT_DISABLE_NUMBA=1; this script calls both implementations
directly so the env flag is not needed.

    python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from gsrdetect import _kernels as K
from gsrdetect import seeded_rng


def bench(fn, *args, repeats=3):
    fn(*args)  # warm-up (and JIT compile for the numba path)
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    args = parser.parse_args()

    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = seeded_rng(0, 0)
    if args.quick:
        N, d, k, n = 80, 10, 50, 40
        mst_k = 10
    else:
        N, d, k, n = 150, 100, 500, 40
        mst_k = 100

    x = np.ascontiguousarray(rng.standard_normal((N, d)))
    perms = np.stack(
        [seeded_rng(0, (1, b)).permutation(N) for b in range(k)]
    ).astype(np.int64)
    D = K.pairwise_sq_dists(x)

    cases = [
        ("complete static null", K.complete_null_static_nb, K.complete_null_static_np,
         (x, n, perms)),
        ("complete online null", K.complete_null_online_nb, K.complete_null_online_np,
         (x, n, perms)),
        ("mst static null", K.mst_null_static_nb, K.mst_null_static_np,
         (D, n, perms[:mst_k])),
        ("mst online null", K.mst_null_online_nb, K.mst_null_online_np,
         (D, n, perms[:mst_k])),
        ("edge-count null", K.ibgec_null_static_nb, K.ibgec_null_static_np,
         (D, n, perms[:mst_k])),
    ]

    print(f"workload: N={N} d={d} n={n} permutations={k} (mst subset {mst_k})")
    print(f"{'kernel':<22} {'numba':>10} {'numpy':>10} {'speedup':>9}")
    for name, fn_nb, fn_np, call_args in cases:
        t_nb = bench(fn_nb, *call_args)
        t_np = bench(fn_np, *call_args)
        a = fn_nb(*call_args)
        b = fn_np(*call_args)
        first = np.asarray(a[0] if isinstance(a, tuple) else a, dtype=np.float64)
        second = np.asarray(b[0] if isinstance(b, tuple) else b, dtype=np.float64)
        assert np.allclose(first, second, rtol=1e-9, equal_nan=True), name
        print(f"{name:<22} {t_nb * 1e3:>8.1f}ms {t_np * 1e3:>8.1f}ms {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
