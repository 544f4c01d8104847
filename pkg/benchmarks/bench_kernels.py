#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the pure-Python fallback.

Runs every hot kernel with identical inputs through ``faultlab._kernels_c``
and ``faultlab._kernels_py``, reports best-of-N wall times plus speedup,
and checks the output buffers are bit-for-bit identical, which is the
contract that makes the two backends interchangeable.

Usage:
    python benchmarks/bench_kernels.py [--repeats N] [--scale {small,large}]
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from array import array

from faultlab import _kernels_py as pyk
from faultlab.rng import SeededRng

try:
    from faultlab import _kernels_c as ck
except ImportError:
    print("compiled backend (faultlab._kernels_c) is not built; nothing to compare")
    sys.exit(1)


def rand_f32(n: int, seed: int) -> array:
    return array("f", SeededRng(seed).gaussian(n, mu=0.0, sigma=1.0).data)


def best_of(repeats: int, fn, make_args) -> tuple[float, object, tuple]:
    """Best wall time over `repeats` single applications, each on freshly
    built (deterministic, identical) inputs so in-place kernels never see
    their own previous output."""
    best = math.inf
    out, args = None, ()
    for _ in range(repeats):
        args = make_args()
        start = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, out, args


def as_bytes(value) -> bytes:
    """Comparable byte form of a kernel result (array, scalar, or tuple)."""
    if isinstance(value, array):
        return value.tobytes()
    return repr(value).encode()


def build_cases(scale: str):
    """(name, args-factory) pairs; factories rebuild inputs per backend so
    in-place kernels cannot leak state from one timing to the other."""
    if scale == "large":
        m, k, n = 64, 768, 64
        rows, cols = 256, 768
        elems = 1_000_000
    else:
        m, k, n = 16, 256, 64
        rows, cols = 64, 256
        elems = 200_000

    return [
        ("mm", lambda: (rand_f32(m * k, 1), rand_f32(k * n, 2), m, k, n)),
        (
            "mm_nt",
            lambda: (rand_f32(m * k, 3), rand_f32(n * k, 4), m, k, n, 1.0 / math.sqrt(k)),
        ),
        ("softmax_rows", lambda: (rand_f32(rows * cols, 5), rows, cols)),
        (
            "layer_norm",
            lambda: (rand_f32(rows * cols, 6), rows, cols, rand_f32(cols, 7),
                     rand_f32(cols, 8), 1e-5),
        ),
        ("gelu", lambda: (rand_f32(elems, 9),)),
        ("add_inplace", lambda: (rand_f32(elems, 10), rand_f32(elems, 11))),
        ("tensor_std", lambda: (rand_f32(elems, 12),)),
        ("fill_gaussian", lambda: (424242, array("f", bytes(4 * elems)), 0.0, 1.0)),
        ("corrupt_gaussian", lambda: (rand_f32(elems, 13), 777, 0.25, 0.1)),
        ("bitflip_mantissa", lambda: (rand_f32(elems, 14), 333, 0.5)),
        (
            "embed_rows",
            lambda: (rand_f32(1024 * 64, 15), rand_f32(128 * 64, 16), 64,
                     array("q", [i % 1024 for i in range(rows)]),
                     array("q", [i % 128 for i in range(rows)])),
        ),
    ]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n", 1)[0])
    parser.add_argument("--repeats", type=int, default=5, help="timings per kernel (best kept)")
    parser.add_argument("--scale", choices=("small", "large"), default="small")
    args = parser.parse_args(argv)

    header = f"{'kernel':<18} {'python':>12} {'compiled':>12} {'speedup':>9}  identical"
    print(header)
    print("-" * len(header))

    all_identical = True
    for name, make_args in build_cases(args.scale):
        t_py, out_py, py_args = best_of(args.repeats, getattr(pyk, name), make_args)
        t_c, out_c, c_args = best_of(args.repeats, getattr(ck, name), make_args)

        # compare the returned value and, for in-place kernels, the final
        # state of the (single-application) input buffer
        identical = as_bytes(out_py) == as_bytes(out_c)
        if isinstance(c_args[0], array):
            identical = identical and py_args[0].tobytes() == c_args[0].tobytes()

        all_identical = all_identical and identical
        speedup = t_py / t_c if t_c > 0 else math.inf
        print(
            f"{name:<18} {t_py * 1e3:>10.3f}ms {t_c * 1e3:>10.3f}ms "
            f"{speedup:>8.1f}x  {'yes' if identical else 'NO'}"
        )

    print()
    if not all_identical:
        print("bitwise mismatch between backends — investigate before trusting results")
        return 1
    print("all kernels bit-identical across backends")
    return 0


if __name__ == "__main__":
    sys.exit(main())
