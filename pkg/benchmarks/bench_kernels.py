"""Compare the compiled reduction kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--rows N] [--repeat R]
"""

import argparse
import time

import numpy as np

from shillbench._speed import fallback

try:
    from shillbench._speed import kernels
except ImportError:
    kernels = None


def build(rng, rows, max_len, float_mode):
    lengths = rng.integers(1, max_len + 1, size=rows)
    offsets = np.concatenate(([0], np.cumsum(lengths))).astype(np.int64)
    if float_mode:
        flat = rng.random(int(lengths.sum()))
    else:
        flat = rng.integers(1, 12, size=int(lengths.sum())).astype(np.int64)
    return flat, offsets


def best_of(fn, flat, offsets, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(flat, offsets)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=500_000)
    parser.add_argument("--max-len", type=int, default=6)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(7)
    print(f"rows={args.rows} max_len={args.max_len} repeat={args.repeat}")
    print(f"{'kernel':<22}{'numpy':>12}{'cython':>12}{'speedup':>10}")
    for name, float_mode in (("row_top_two_i64", False), ("row_top_two_f64", True)):
        flat, offsets = build(rng, args.rows, args.max_len, float_mode)
        np_fn = getattr(fallback, name)
        t_np = best_of(np_fn, flat, offsets, args.repeat)
        if kernels is None:
            print(f"{name:<22}{t_np * 1e3:>10.2f}ms{'n/a':>12}{'n/a':>10}")
            continue
        cy_fn = getattr(kernels, name)
        a = np_fn(flat, offsets)
        b = cy_fn(flat, offsets)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)
        t_cy = best_of(cy_fn, flat, offsets, args.repeat)
        print(f"{name:<22}{t_np * 1e3:>10.2f}ms{t_cy * 1e3:>10.2f}ms{t_np / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()
