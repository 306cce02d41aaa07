"""Compare the compiled convolution kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--batch 32] [--repeats 5]
"""

import argparse
import time

import numpy as np

from advscope.kernels import BACKEND
from advscope.kernels import conv2d_backward as dispatch_backward
from advscope.kernels import conv2d_forward as dispatch_forward
from advscope.kernels.reference import conv2d_backward as ref_backward
from advscope.kernels.reference import conv2d_forward as ref_forward


def timeit(fn, repeats):
    fn()  # warm-up
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_case(name, x, w, b, repeats):
    y = dispatch_forward(x, w, b, 1, 1)
    gy = np.ones_like(y)
    cases = [
        ("forward", lambda: dispatch_forward(x, w, b, 1, 1),
         lambda: ref_forward(x, w, b, 1, 1)),
        ("backward", lambda: dispatch_backward(x, w, 1, 1, gy),
         lambda: ref_backward(x, w, 1, 1, gy)),
    ]
    for op, fast, slow in cases:
        t_fast = timeit(fast, repeats)
        t_slow = timeit(slow, repeats)
        print(f"{name:24s} {op:9s} {BACKEND:8s} {t_fast * 1e3:8.2f} ms   "
              f"numpy {t_slow * 1e3:8.2f} ms   speedup {t_slow / t_fast:5.2f}x")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--batch", type=int, default=32)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    print(f"active backend: {BACKEND}")
    shapes = [
        ("conv1 3->16 @32x32", (args.batch, 3, 32, 32), 16),
        ("conv2 16->32 @16x16", (args.batch, 16, 16, 16), 32),
        ("conv3 32->64 @8x8", (args.batch, 32, 8, 8), 64),
    ]
    for name, xshape, cout in shapes:
        x = rng.standard_normal(xshape).astype(np.float32)
        w = rng.standard_normal((cout, xshape[1], 3, 3)).astype(np.float32) * 0.1
        b = np.zeros(cout, dtype=np.float32)
        bench_case(name, x, w, b, args.repeats)


if __name__ == "__main__":
    main()
