#!/usr/bin/env python3
"""Compare the numba kernels against the pure-numpy fallback.

Times the three hot kernels directly (both implementations are imported
side by side) and then a full desk-scale solve per backend via
subprocesses with FOLIOSOLVE_BACKEND set, since the backend is chosen at
import time.

Usage: python benchmarks/kernel_bench.py [--quick]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from foliosolve import _accel


def time_fn(fn, *args, repeats=200):
    fn(*args)  # warm up / JIT
    best = float("inf")
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best


def bench_kernels(n=2000):
    from foliosolve import _prox_numpy

    rng = np.random.default_rng(0)
    x = rng.normal(0.0, 2.0, n)
    anchor = rng.normal(0.0, 0.3, n)
    c1 = rng.uniform(0.0, 0.1, n)
    c2 = rng.uniform(0.0, 2.0, n)
    rows = [("kernel", "numpy (us)", "numba (us)", "speedup")]
    for name, d in (("prox d=1.5", np.full(n, 1.5)),
                    ("prox d=1.9 (newton)", np.full(n, 1.9))):
        t_np = time_fn(_prox_numpy.prox_trade_cost_vector, x, 0.8, anchor, c1, c2, d)
        if _accel.NUMBA_AVAILABLE:
            from foliosolve import _prox_numba
            t_nb = time_fn(_prox_numba.prox_trade_cost_vector, x, 0.8, anchor, c1, c2, d)
            rows.append((name, f"{t_np*1e6:.1f}", f"{t_nb*1e6:.1f}", f"{t_np/t_nb:.1f}x"))
        else:
            rows.append((name, f"{t_np*1e6:.1f}", "-", "-"))
    v = rng.normal(0.0, 0.5, n)
    t_np = time_fn(_prox_numpy.project_l1_ball_impl, v, 1.0)
    if _accel.NUMBA_AVAILABLE:
        from foliosolve import _prox_numba
        t_nb = time_fn(_prox_numba.project_l1_ball_impl, v, 1.0)
        rows.append(("l1 projection", f"{t_np*1e6:.1f}", f"{t_nb*1e6:.1f}",
                     f"{t_np/t_nb:.1f}x"))
    else:
        rows.append(("l1 projection", f"{t_np*1e6:.1f}", "-", "-"))
    return rows


SOLVE_SNIPPET = """
import time
import foliosolve._accel as accel
from foliosolve.generate import GeneratorConfig, gen_market_data, build_single_instance, extend_multi
from foliosolve.solver import solve_single, solve_multi, SolverConfig

cfg = GeneratorConfig(seed=3, n={n}, days=600)
panel = gen_market_data(cfg)
prob = build_single_instance(panel, cfg.default_date_index(), (1e-6, 100.0, 100.0), cfg)
solve_single(prob, SolverConfig(max_iterations=200))  # warm up / JIT
t0 = time.perf_counter()
out = solve_single(prob)
t_single = time.perf_counter() - t0
multi = extend_multi(prob, {horizon})
t0 = time.perf_counter()
om = solve_multi(multi)
t_multi = time.perf_counter() - t0
print(f"{{accel.BACKEND}} single {{out.status}} {{out.iterations}} iters {{t_single:.2f}}s "
      f"multi {{om.status}} {{om.iterations}} iters {{t_multi:.2f}}s")
"""


def bench_solves(n, horizon):
    out = []
    for backend in ("numba", "numpy"):
        if backend == "numba" and not _accel.NUMBA_AVAILABLE:
            continue
        env = dict(os.environ, FOLIOSOLVE_BACKEND=backend)
        res = subprocess.run(
            [sys.executable, "-c", SOLVE_SNIPPET.format(n=n, horizon=horizon)],
            env=env, capture_output=True, text=True)
        out.append(res.stdout.strip() or res.stderr.strip().splitlines()[-1])
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true",
                        help="smaller universe for the solve comparison")
    args = parser.parse_args()

    print(f"numba available: {_accel.NUMBA_AVAILABLE} "
          f"(active backend: {_accel.BACKEND})\n")
    print("hot kernels, 2000-element vectors:")
    for row in bench_kernels():
        print(f"  {row[0]:<22} {row[1]:>12} {row[2]:>12} {row[3]:>9}")
    n = 50 if args.quick else 200
    horizon = 5 if args.quick else 10
    print(f"\nfull solves (n={n}, horizon={horizon}), one per backend:")
    for line in bench_solves(n, horizon):
        print("  " + line)


if __name__ == "__main__":
    main()
