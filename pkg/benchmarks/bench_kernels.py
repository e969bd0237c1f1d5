"""Benchmark: compiled extension vs pure-numpy hot kernels.

Run with `python3 benchmarks/bench_kernels.py`. Compares the per-agent
risk batch and the Gaussian splat rasterizer, and checks that the two
backends agree numerically.
"""

import time

import numpy as np

from riskgen.kernels import _py

try:
    from riskgen.kernels import _ext
except ImportError:
    _ext = None


def _time(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_risk(backend, n=200_000):
    rng = np.random.default_rng(0)
    rel = rng.normal(scale=30, size=(n, 2))
    v_e = rng.normal(scale=8, size=(n, 2))
    v_i = rng.normal(scale=8, size=(n, 2))
    mu = rng.uniform(0.5, 2.5, size=n)
    omega = np.array([1.0, 0.7, 0.4, 0.1])
    return _time(
        lambda: backend.agent_risk_batch(rel, v_e, v_i, mu, omega, 0.1, 1.0, 1.0, 1e-6)
    )


def bench_splat(backend, points=200, h=34, w=60, frames=50):
    rng = np.random.default_rng(1)
    us = rng.uniform(0, w, size=points)
    vs = rng.uniform(0, h, size=points)
    amps = np.ones(points)

    def run():
        for _ in range(frames):
            canvas = np.zeros((h, w))
            backend.splat_max(canvas, us, vs, amps, 2.0, 2.0)

    return _time(run)


def check_agreement():
    rng = np.random.default_rng(2)
    rel = rng.normal(scale=30, size=(5000, 2))
    v_e = rng.normal(scale=8, size=(5000, 2))
    v_i = rng.normal(scale=8, size=(5000, 2))
    mu = rng.uniform(0.5, 2.5, size=5000)
    omega = np.array([1.0, 0.7, 0.4, 0.1])
    a = _py.agent_risk_batch(rel, v_e, v_i, mu, omega, 0.1, 1.0, 1.0, 1e-6)
    b = _ext.agent_risk_batch(rel, v_e, v_i, mu, omega, 0.1, 1.0, 1.0, 1e-6)
    print(f"risk backend max abs diff: {np.abs(a[0] - b[0]).max():.3e}")
    c1 = np.zeros((34, 60))
    c2 = np.zeros((34, 60))
    us = rng.uniform(0, 60, 50)
    vs = rng.uniform(0, 34, 50)
    _py.splat_max(c1, us, vs, np.ones(50), 2.0, 2.0)
    _ext.splat_max(c2, us, vs, np.ones(50), 2.0, 2.0)
    print(f"splat backend max abs diff: {np.abs(c1 - c2).max():.3e}")


def main():
    print(f"{'kernel':<12}{'python':>12}{'cython':>12}{'speedup':>10}")
    for name, fn in (("risk_batch", bench_risk), ("splat_max", bench_splat)):
        t_py = fn(_py)
        if _ext is None:
            print(f"{name:<12}{t_py * 1e3:>10.2f}ms{'n/a':>12}{'n/a':>10}")
            continue
        t_cy = fn(_ext)
        print(f"{name:<12}{t_py * 1e3:>10.2f}ms{t_cy * 1e3:>10.2f}ms{t_py / t_cy:>9.1f}x")
    if _ext is not None:
        check_agreement()


if __name__ == "__main__":
    main()
