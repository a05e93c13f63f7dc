#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 200000] [--cols 8] [--repeat 20]

Times each hot kernel under both backends and prints the speedup.  The
compiled extension mostly wins by avoiding temporaries; the counter RNG
is where it matters most.
"""
import argparse
import time

import numpy as np

from lpcoreset import _kernels_py

try:
    from lpcoreset import _kernels_c
except ImportError:
    _kernels_c = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--cols", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    v = rng.standard_normal(args.n)
    M = rng.standard_normal((args.n // args.cols, args.cols))
    vals = np.abs(rng.standard_normal(args.n))
    resid = rng.standard_normal(args.n)

    cases = [
        ("pnorm p=1.0", lambda k: k.pnorm(v, 1.0)),
        ("pnorm p=2.0", lambda k: k.pnorm(v, 2.0)),
        ("pnorm p=1.5", lambda k: k.pnorm(v, 1.5)),
        ("row_pnorms p=1.5", lambda k: k.row_pnorms(M, 1.5)),
        ("powsum_ratios p=3", lambda k: k.powsum_ratios(vals, 3.0)),
        ("counter_uniforms", lambda k: k.counter_uniforms(42, args.n)),
        ("smoothed_weights p=1", lambda k: k.smoothed_power_weights(resid, 1e-4, 1.0)),
    ]

    if _kernels_c is None:
        print("compiled extension not built; run `python3 setup.py build_ext --inplace`")
        return

    width = max(len(name) for name, _ in cases)
    print(f"{'kernel':<{width}}  {'numpy':>10}  {'compiled':>10}  {'speedup':>8}")
    for name, call in cases:
        t_py = best_of(lambda: call(_kernels_py), args.repeat)
        t_c = best_of(lambda: call(_kernels_c), args.repeat)
        print(
            f"{name:<{width}}  {t_py * 1e3:9.3f}ms  {t_c * 1e3:9.3f}ms  "
            f"{t_py / t_c:7.2f}x"
        )


if __name__ == "__main__":
    main()
