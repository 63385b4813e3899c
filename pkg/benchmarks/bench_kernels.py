#!/usr/bin/env python3
"""Benchmark the hot mask kernels under both backends.

Times erosion, dilation, component labeling, and the directed Hausdorff
kernel on random rasters at a few realistic sizes, once with the numba
backend and once with the numpy/scipy fallback, and prints the speedups.

    python benchmarks/bench_kernels.py [--repeats 5] [--sizes 128,512,1080]
"""

import argparse
import time

import numpy as np

from bimaff import _kernels


def make_inputs(rng, size):
    arr = rng.random((size, size)) < 0.2
    # blob content so components/hausdorff see realistic structure
    for _ in range(6):
        x0, y0 = rng.integers(0, size - size // 4, size=2)
        arr[y0:y0 + size // 4, x0:x0 + size // 4] = True
    ys, xs = np.nonzero(arr)
    take = rng.choice(len(ys), size=min(len(ys), 4000), replace=False)
    coords_a = np.stack([ys[take], xs[take]], axis=1).astype(np.int64)
    coords_b = coords_a[::-1].copy() + 1
    return arr, coords_a, coords_b


def time_call(fn, *args, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def run(size, repeats, rng):
    arr, coords_a, coords_b = make_inputs(rng, size)
    cases = {
        "erode": lambda: _kernels.erode(arr, 2),
        "dilate": lambda: _kernels.dilate(arr, 2),
        "components": lambda: _kernels.label_components(arr),
        "hausdorff": lambda: _kernels.directed_hausdorff_sq(coords_a, coords_b),
    }
    rows = []
    for name, fn in cases.items():
        timings = {}
        for backend in _kernels.available_backends():
            _kernels.set_backend(backend)
            fn()  # warm (includes JIT compile on first numba call)
            timings[backend] = time_call(fn, repeats=repeats)
        rows.append((name, timings))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--sizes", default="128,512,1080")
    args = parser.parse_args()

    backends = _kernels.available_backends()
    if "numba" not in backends:
        print("note: numba backend unavailable; timing the fallback only")
    rng = np.random.default_rng(7)

    header = f"{'kernel':<12} {'size':>6}"
    for backend in backends:
        header += f" {backend + ' (ms)':>14}"
    if len(backends) == 2:
        header += f" {'speedup':>9}"
    print(header)
    print("-" * len(header))

    for size in (int(s) for s in args.sizes.split(",")):
        for name, timings in run(size, args.repeats, rng):
            line = f"{name:<12} {size:>6}"
            for backend in backends:
                line += f" {timings[backend] * 1e3:>14.2f}"
            if len(backends) == 2:
                line += f" {timings['numpy'] / timings['numba']:>8.1f}x"
            print(line)


if __name__ == "__main__":
    main()
