#!/usr/bin/env python3
"""Benchmark the Parratt kernels: compiled extension versus numpy fallback.

Times the full rocking-scan and energy-scan paths of the reference Pt
cavity over a range of grid sizes and prints a speedup table.

Usage: python benchmarks/bench_reflectivity.py [--repeats N]
"""

import argparse
import time

import numpy as np

from fanocavity import _kernels
from fanocavity.layersim import energy_scan, parse_stack, rocking_scan

PT_STACK = {
    "layers": [
        {"material": "Pt", "thickness_nm": 0.5},
        {"material": "C", "thickness_nm": 20.8},
        {"material": "Fe", "thickness_nm": 0.3, "abundance": 1.0},
        {"material": "C", "thickness_nm": 19.6},
        {"material": "Pt", "thickness_nm": 2.5},
    ],
    "substrate": "Si",
}


def best_of(repeats, fn):
    timings = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        timings.append(time.perf_counter() - t0)
    return min(timings)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = _kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernel not available; run 'pip install -e .' first")
    stack = parse_stack(PT_STACK)

    print(f"{'scan':<22}{'points':>9}", *(f"{b:>12}" for b in backends), f"{'speedup':>9}")
    for points in (2001, 20001, 200001):
        grid = np.linspace(2.0e-3, 2.7e-3, points)
        row = {}
        for backend in backends:
            row[backend] = best_of(args.repeats,
                                   lambda b=backend: rocking_scan(stack, grid, backend=b))
        speed = row.get("python", 0.0) / row["cython"] if "cython" in row else float("nan")
        print(f"{'rocking':<22}{points:>9}",
              *(f"{row[b]*1e3:>10.2f}ms" for b in backends), f"{speed:>8.1f}x")
    for points in (4001, 40001, 400001):
        grid = np.linspace(-200.0, 200.0, points)
        row = {}
        for backend in backends:
            row[backend] = best_of(args.repeats,
                                   lambda b=backend: energy_scan(stack, 2.378e-3, grid, backend=b))
        speed = row.get("python", 0.0) / row["cython"] if "cython" in row else float("nan")
        print(f"{'energy (resonant)':<22}{points:>9}",
              *(f"{row[b]*1e3:>10.2f}ms" for b in backends), f"{speed:>8.1f}x")


if __name__ == "__main__":
    main()
