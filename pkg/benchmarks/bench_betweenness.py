#!/usr/bin/env python3
"""Benchmark the compiled betweenness kernel against the pure-Python twin.

Usage: python benchmarks/bench_betweenness.py [--sizes 100,300,500]

Graphs are seeded Erdos-Renyi with mean degree ~8, the regime a weekly
window over a few hundred actors actually produces.  Numbers are wall
time for one full Brandes pass (all sources).
"""

import argparse
import random
import time

import numpy as np

from orgsignals import _betweenness_py

try:
    from orgsignals import _betweenness as compiled
except ImportError:
    compiled = None


def random_csr(n: int, mean_degree: float, seed: int):
    rng = random.Random(seed)
    p = mean_degree / (n - 1)
    neighbours = [set() for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < p:
                neighbours[a].add(b)
                neighbours[b].add(a)
    indptr = np.zeros(n + 1, dtype=np.int32)
    flat = []
    for i, ns in enumerate(neighbours):
        flat.extend(sorted(ns))
        indptr[i + 1] = len(flat)
    return indptr, np.asarray(flat, dtype=np.int32)


def time_kernel(kernel, indptr, indices, n, repeats=3):
    best = float("inf")
    result = None
    for _ in range(repeats):
        started = time.perf_counter()
        result = kernel(indptr, indices, n)
        best = min(best, time.perf_counter() - started)
    return best, result


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="100,300,500",
                        help="comma-separated node counts")
    parser.add_argument("--mean-degree", type=float, default=8.0)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if compiled is None:
        print("compiled kernel not built; timing the pure-Python kernel only\n")

    header = f"{'n':>6} {'edges':>8} {'python':>10}"
    if compiled is not None:
        header += f" {'cython':>10} {'speedup':>9}"
    print(header)
    for n in sizes:
        indptr, indices = random_csr(n, args.mean_degree, seed=n)
        edges = len(indices) // 2
        py_time, py_scores = time_kernel(
            _betweenness_py.brandes_accumulate, indptr, indices, n,
            repeats=1 if n >= 300 else 3,
        )
        line = f"{n:>6} {edges:>8} {py_time:>9.3f}s"
        if compiled is not None:
            cy_time, cy_scores = time_kernel(compiled.brandes_accumulate, indptr, indices, n)
            assert np.allclose(py_scores, cy_scores, atol=1e-9), "kernels disagree"
            line += f" {cy_time:>9.4f}s {py_time / cy_time:>8.1f}x"
        print(line)


if __name__ == "__main__":
    main()
