"""Timing comparison of the compiled kernels against the pure-numpy
fallback.

Run twice:
    python benchmarks/bench_kernels.py
    SENTSSM_NO_NUMBA=1 python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from sentssm import _kernels


def bench(fn, *args, repeat=2000):
    fn(*args)  # warm-up / JIT
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def main():
    rng = np.random.default_rng(7)
    N = 104
    y = rng.normal(0.0, 0.2, N)
    obs = np.ones(N, dtype=bool)
    obs[rng.integers(0, N, 5)] = False
    n = rng.lognormal(2.5, 0.7, N)
    z = rng.standard_normal(N)

    path = "numba" if _kernels.USING_NUMBA else "numpy fallback"
    print(f"kernel path: {path}")

    dt = bench(_kernels.kalman_loglik, y, obs, n, 0.85, 0.1, 0.05**2, 0.15**2, True)
    print(f"kalman_loglik    N={N}: {dt * 1e6:8.2f} us/call")

    dt = bench(_kernels.kalman_pass, y, obs, n, 0.85, 0.1, 0.05**2, 0.15**2, True)
    print(f"kalman_pass      N={N}: {dt * 1e6:8.2f} us/call")

    fm, fv, pm, pv, _ = _kernels.kalman_pass(y, obs, n, 0.85, 0.1, 0.05**2, 0.15**2, True)
    dt = bench(_kernels.backward_sample, fm, fv, pm, pv, 0.85, z)
    print(f"backward_sample  N={N}: {dt * 1e6:8.2f} us/call")

    dt = bench(_kernels.smooth_pass, fm, fv, pm, pv, 0.85)
    print(f"smooth_pass      N={N}: {dt * 1e6:8.2f} us/call")


if __name__ == "__main__":
    main()
