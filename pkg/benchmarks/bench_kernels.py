"""Timing comparison of the numba kernels against their numpy fallbacks.

Run: python benchmarks/bench_kernels.py
The active package backend is whatever EPIMOB_DISABLE_NUMBA selects; this
script imports both implementations directly and times them side by side.
"""

import time

import numpy as np

from epimob import _accel
from epimob.rt import SerialInterval, si_weight


def _time(fn, *args, repeat: int = 5, number: int = 50) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / number)
    return best


def bench_onward(t_days: int = 300) -> tuple[float, float]:
    rng = np.random.default_rng(7)
    counts = rng.uniform(0, 500, size=t_days)
    si = SerialInterval.from_mean_sd(4.5, 2.9)
    weights = np.array([si_weight(d, si) for d in range(si.max_days + 1)])
    if _accel.BACKEND == "numba":
        _accel.onward_expectation(counts, weights)  # compile
    t_sel = _time(_accel.onward_expectation, counts, weights)
    t_np = _time(_accel.onward_expectation_numpy, counts, weights)
    return t_sel, t_np


def bench_city_step(k: int = 50) -> tuple[float, float]:
    rng = np.random.default_rng(11)
    states = rng.uniform(100, 50_000, size=(k, 4))
    flows = rng.uniform(0, 200, size=(k, k))
    betas = rng.uniform(0.1, 0.9, size=k)
    betas_in = rng.uniform(0.1, 0.9, size=k)
    args = (states, flows, betas, betas_in, 0.0096, 0.13, 0.19)
    if _accel.BACKEND == "numba":
        _accel.city_step(*args)  # compile
    t_sel = _time(_accel.city_step, *args)
    t_np = _time(_accel.city_step_numpy, *args)
    return t_sel, t_np


def main() -> None:
    print(f"active backend: {_accel.BACKEND}")
    print(f"{'kernel':24s} {'selected':>12s} {'numpy':>12s} {'speedup':>9s}")
    for name, (t_sel, t_np) in [
        ("onward_expectation/300d", bench_onward()),
        ("city_step/K=50", bench_city_step()),
    ]:
        print(f"{name:24s} {t_sel * 1e6:10.1f}us {t_np * 1e6:10.1f}us "
              f"{t_np / t_sel:8.2f}x")


if __name__ == "__main__":
    main()
