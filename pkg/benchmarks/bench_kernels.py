"""Compare the compiled kernels with the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from steadytrunc import faulhaber
from steadytrunc.kernels import get_backend
from steadytrunc.oracle import _ssa_arrays
from steadytrunc.parser import load_model

MODELS = "src/steadytrunc/models"


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_power_sums(backend, n: int):
    rng = np.random.default_rng(0)
    lower = rng.integers(0, 10**6, n)
    upper = lower + rng.integers(0, 128, n)
    table = faulhaber.float_tables()
    return lambda: backend.interval_power_sums(lower, upper, 4, table)


def bench_ssa(backend, jumps: int):
    net = load_model(f"{MODELS}/exclusive_switch.model")
    order, change, rates, sat_s, sat_k = _ssa_arrays(net)
    uniforms = np.random.default_rng(0).random(2 * jumps)
    states = np.empty((jumps, net.n_species), dtype=np.int64)
    times = np.empty(jumps)

    def go():
        x = np.array([0, 0, 1, 0, 0], dtype=np.int64)
        backend.ssa_chunk(x, 0.0, np.inf, order, change, rates, sat_s, sat_k, uniforms, states, times)

    return go


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    py, cy = get_backend("python"), get_backend("cython")
    rows = [
        ("interval_power_sums (20k boxes, degree 4)", bench_power_sums(py, 20_000), bench_power_sums(cy, 20_000)),
        ("ssa_chunk (20k jumps, exclusive switch)", bench_ssa(py, 20_000), bench_ssa(cy, 20_000)),
    ]
    print(f"{'kernel':45s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s}")
    for name, f_py, f_cy in rows:
        t_py = best_of(f_py, args.repeat)
        t_cy = best_of(f_cy, args.repeat)
        print(f"{name:45s} {t_py:11.4f} {t_cy:11.5f} {t_py / t_cy:8.0f}x")


if __name__ == "__main__":
    main()
