"""Timing comparison of the compiled kernel extension vs the pure-Python
fallback on the three hot batch operations.

Run directly:  python3 benchmarks/bench_kernels.py [--reps 5]
"""

import argparse
import time

import numpy as np

from genestim._kernels import BACKEND, fallback

try:
    from genestim._kernels import _core as compiled
except ImportError:  # extension not built
    compiled = None

N1, N2 = 20, 30


def _inputs(rng, size):
    theta = rng.uniform(-4.0, 4.0, size)
    tnuis = rng.uniform(0.5, N1 + N2 - 0.5, size)
    x1 = rng.integers(0, N1 + 1, size)
    x2 = rng.integers(0, N2 + 1, size)
    p1 = rng.uniform(0.01, 0.99, size)
    p2 = rng.uniform(0.01, 0.99, size)
    samples = rng.standard_t(3, (size // 10 or 1, 10))
    return theta, tnuis, x1, x2, p1, p2, samples


def _time(fn, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=20_000)
    parser.add_argument("--reps", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    theta, tnuis, x1, x2, p1, p2, samples = _inputs(rng, args.size)
    tn = (x1 + x2).astype(float)

    cases = {
        "invert_p1_batch": lambda m: m.invert_p1_batch(theta, tnuis, N1, N2),
        "sbar_profiled_batch": lambda m: m.sbar_profiled_batch(
            x1.astype(float), x2.astype(float), N1, N2, p1, p2),
        "zinterval_p1_batch": lambda m: m.zinterval_p1_batch(
            x1[:500], x2[:500], N1, N2, tn[:500], 1.959964),
        "t3_mle_batch": lambda m: m.t3_mle_batch(samples),
    }

    print(f"active backend: {BACKEND}; batch size {args.size}, "
          f"best of {args.reps}")
    header = f"{'kernel':24s} {'fallback':>12s} {'compiled':>12s} {'speedup':>9s}"
    print(header)
    print("-" * len(header))
    for name, call in cases.items():
        t_py = _time(lambda: call(fallback), args.reps)
        if compiled is None:
            print(f"{name:24s} {t_py * 1e3:10.2f}ms {'n/a':>12s} {'n/a':>9s}")
            continue
        t_c = _time(lambda: call(compiled), args.reps)
        print(f"{name:24s} {t_py * 1e3:10.2f}ms {t_c * 1e3:10.2f}ms "
              f"{t_py / t_c:8.1f}x")


if __name__ == "__main__":
    main()
