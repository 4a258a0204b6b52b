"""Time the hot kernels on both backends.

Usage:
    python benchmarks/bench_kernels.py [--quick]

Prints one row per (kernel, size) with the numpy and numba timings and the
speedup.  Numba rows show "-" when numba is not installed.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sublist import _kernels


def _time(fn, args, repeats):
    fn(*args)  # warm up (and JIT-compile on the numba path)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def _subset_values_case(rng, n_items, n_concepts, n_rows):
    cover = (rng.random((n_items, n_concepts)) < 0.3).astype(np.uint8)
    weights = rng.uniform(0.1, 1.0, n_concepts)
    member = np.ascontiguousarray(rng.random((n_rows, n_items)) < 0.5)
    return cover, weights, member


def _union_gains_case(rng, n_items, n_concepts):
    cover = (rng.random((n_items, n_concepts)) < 0.3).astype(np.uint8)
    covered = (rng.random(n_concepts) < 0.4).astype(np.uint8)
    weights = rng.uniform(0.1, 1.0, n_concepts)
    return cover, covered, weights


def _hinge_case(rng, n_pairs, dim):
    diffs = rng.standard_normal((n_pairs, dim))
    pair_weights = rng.uniform(0.1, 2.0, n_pairs)
    h = rng.standard_normal(dim)
    return diffs, pair_weights, h


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="fewer repeats and sizes")
    args = parser.parse_args()

    repeats = 3 if args.quick else 10
    rng = np.random.default_rng(0)
    numpy_impls = _kernels.IMPLEMENTATIONS["numpy"]
    numba_impls = _kernels.load_numba_impls()

    cases = []
    subset_sizes = [(8, 16, 256), (12, 24, 4096)] + (
        [] if args.quick else [(16, 32, 65536)]
    )
    for n_items, n_concepts, n_rows in subset_sizes:
        cases.append(
            (
                "coverage_subset_values",
                f"{n_rows}x{n_items} items, {n_concepts} concepts",
                _subset_values_case(rng, n_items, n_concepts, n_rows),
            )
        )
    for n_items, n_concepts in [(64, 32), (512, 64)]:
        cases.append(
            (
                "coverage_union_gains",
                f"{n_items} items, {n_concepts} concepts",
                _union_gains_case(rng, n_items, n_concepts),
            )
        )
    pair_sizes = [(128, 9), (4096, 9)] + ([] if args.quick else [(65536, 9)])
    for n_pairs, dim in pair_sizes:
        cases.append(
            (
                "pairwise_hinge",
                f"{n_pairs} pairs, dim {dim}",
                _hinge_case(rng, n_pairs, dim),
            )
        )

    print(f"{'kernel':<24} {'size':<34} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, size, case_args in cases:
        numpy_s = _time(numpy_impls[name], case_args, repeats)
        if numba_impls is None:
            numba_text, speedup = "-", "-"
        else:
            numba_s = _time(numba_impls[name], case_args, repeats)
            numba_text = f"{numba_s * 1e6:.1f}us"
            speedup = f"{numpy_s / numba_s:.1f}x"
        print(
            f"{name:<24} {size:<34} {numpy_s * 1e6:>8.1f}us {numba_text:>10} {speedup:>8}"
        )
    print(f"\nactive backend: {_kernels.BACKEND}")


if __name__ == "__main__":
    main()
