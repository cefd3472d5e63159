"""Benchmark the compiled kernels against the pure NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Covers the two hot paths: the batched classic-relay sweep (dominant when
applying large Preisach families to long signals) and the fixed-step RK4
matrix chain (dominant in transition-matrix propagation).
"""

import argparse
import time

import numpy as np

from hystk import _kernels
from hystk._kernels import reference


def make_sweep_case(n_relays, n_breakpoints, seed=0):
    rng = np.random.default_rng(seed)
    rho2 = rng.uniform(-1.5, 0.5, size=n_relays)
    rho1 = rho2 + rng.uniform(0.1, 1.5, size=n_relays)
    state0 = np.zeros(n_relays, dtype=np.int64)
    times = np.concatenate([[0.0],
                            np.cumsum(rng.uniform(0.01, 0.1, size=n_breakpoints - 1))])
    values = np.concatenate([[-2.5], rng.uniform(-2.5, 2.5, size=n_breakpoints - 1)])
    return rho1, rho2, state0, times, values


def make_rk4_case(dim, n_steps, seed=0):
    rng = np.random.default_rng(seed)
    mats = 0.5 * rng.normal(size=(2 * n_steps + 1, dim, dim))
    return mats, 0.005, np.eye(dim)


def timeit(fn, args, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if _kernels.BACKEND_NAME != "cython":
        print("compiled backend not available; comparing reference against itself")
    compiled = _kernels

    rows = []
    for n_relays, n_bp in [(50, 500), (200, 2000), (500, 5000)]:
        case = make_sweep_case(n_relays, n_bp)
        t_ref, out_ref = timeit(reference.sweep_classic, case, args.repeat)
        t_fast, out_fast = timeit(compiled.sweep_classic, case, args.repeat)
        assert np.array_equal(out_ref[0], out_fast[0]), "backends disagree"
        rows.append((f"sweep {n_relays}x{n_bp}", t_ref, t_fast,
                     len(out_ref[0])))

    for dim, steps in [(2, 10000), (4, 10000), (8, 5000)]:
        case = make_rk4_case(dim, steps)
        t_ref, out_ref = timeit(reference.rk4_matrix_chain, case, args.repeat)
        t_fast, out_fast = timeit(compiled.rk4_matrix_chain, case, args.repeat)
        assert np.abs(out_ref - out_fast).max() < 1e-9, "backends disagree"
        rows.append((f"rk4 dim={dim} steps={steps}", t_ref, t_fast, None))

    print(f"\nactive backend: {_kernels.BACKEND_NAME}")
    print(f"{'case':28s} {'python':>10s} {'compiled':>10s} {'speedup':>8s}")
    for name, t_ref, t_fast, extra in rows:
        note = f"  ({extra} events)" if extra is not None else ""
        print(f"{name:28s} {t_ref * 1e3:9.2f}ms {t_fast * 1e3:9.2f}ms "
              f"{t_ref / t_fast:7.1f}x{note}")


if __name__ == "__main__":
    main()
