"""Command-line entry point.

Subcommands wire generation, solving, verification, and benchmarking
into reproducible workflows:

    gen             simulate a market panel and write it to a directory
    build-instance  assemble a problem instance from a panel file
    solve           solve an instance file and write the solution
    bench           run a penalty grid and emit a count/SGM1 report
    check           verify a solution file against its instance

Exit codes: 0 success, 1 solver non-convergence or failed verification,
2 usage or input errors. Every run logs its resolved configuration as
one key=value line on stderr. FLASHFOLIO_SEED, when set, overrides any
--seed flag.
"""

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .bench import GridSpec, emit_report, run_grid
from .errors import FolioError, GridDimensionError
from .generate import GeneratorConfig, build_single_instance, extend_multi, gen_market_data
from .model import MultiPeriodProblem, check_feasibility
from .oracle import directional_check, grid_solve
from .serialize import (
    load_instance,
    load_panel,
    load_solution,
    save_instance,
    save_panel,
    save_solution,
)
from .solver import STATUS_CONVERGED, SolverConfig, solve_multi, solve_single

SEED_ENV_VAR = "FLASHFOLIO_SEED"

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_USAGE = 2


def _log(event, **kv):
    pairs = " ".join(f"{k}={v}" for k, v in kv.items())
    print(f"event={event} {pairs}".rstrip(), file=sys.stderr)


def _env_seed(seed):
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw == "":
        return seed
    return int(raw)


def _solver_config(args):
    return SolverConfig(tolerance=args.tol, max_iterations=args.max_iters,
                        time_limit=args.time_limit)


def cmd_gen(args):
    seed = _env_seed(args.seed)
    config = GeneratorConfig(seed=seed, n=args.n, days=args.days, p=args.factors,
                             missing_iv_fraction=args.missing_iv)
    _log("config", command="gen", seed=seed, n=args.n, days=args.days,
         factors=args.factors, missing_iv=args.missing_iv, out=args.out)
    panel = gen_market_data(config)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"panel_seed{seed}_n{args.n}_days{args.days}.npz")
    save_panel(panel, config, path)
    rets = panel.prices[1:] / panel.prices[:-1] - 1.0
    _log("panel_written", path=path, days=panel.days, assets=panel.n_assets,
         factors=panel.n_factors,
         mean_daily_vol=f"{rets.std(axis=0).mean():.6f}",
         missing_iv_assets=int(np.sum(~np.isfinite(panel.implied_vol[-1]))))
    print(path)
    return EXIT_OK


def cmd_build_instance(args):
    panel, config = load_panel(args.panel)
    date_index = args.date_index if args.date_index is not None \
        else config.default_date_index()
    _log("config", command="build-instance", panel=args.panel,
         date_index=date_index, lambda1=args.lambda1, lambda2=args.lambda2,
         lambda3=args.lambda3, horizon=args.horizon, out=args.out)
    problem = build_single_instance(
        panel, date_index, (args.lambda1, args.lambda2, args.lambda3), config)
    if args.horizon > 1:
        problem = extend_multi(problem, args.horizon)
    save_instance(problem, args.out)
    _log("instance_written", path=args.out, kind="multi" if args.horizon > 1 else "single")
    return EXIT_OK


def cmd_solve(args):
    problem = load_instance(args.instance)
    config = _solver_config(args)
    _log("config", command="solve", instance=args.instance, tol=config.tolerance,
         max_iters=config.max_iterations, time_limit=config.time_limit, out=args.out)
    if isinstance(problem, MultiPeriodProblem):
        outcome = solve_multi(problem, config)
    else:
        outcome = solve_single(problem, config)
    save_solution(outcome, args.out)
    _log("solved", status=outcome.status, iterations=outcome.iterations,
         residual=f"{outcome.residual:.3e}", elapsed=f"{outcome.elapsed:.3f}",
         objective=f"{outcome.objective:.6e}", out=args.out)
    return EXIT_OK if outcome.status == STATUS_CONVERGED else EXIT_NOT_CONVERGED


def cmd_bench(args):
    with open(args.grid, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    spec_fields = {k: doc[k] for k in
                   ("lambda1_values", "lambda23_values", "instances_per_cell",
                    "horizon", "mode", "seed") if k in doc}
    if "lambda1_values" in spec_fields:
        spec_fields["lambda1_values"] = tuple(spec_fields["lambda1_values"])
    if "lambda23_values" in spec_fields:
        spec_fields["lambda23_values"] = tuple(spec_fields["lambda23_values"])
    spec = GridSpec(**spec_fields)
    spec = replace(spec, seed=_env_seed(spec.seed))
    generator = GeneratorConfig(**doc.get("generator", {}))
    solver = SolverConfig(**doc.get("solver", {}))
    _log("config", command="bench", grid=args.grid, mode=spec.mode,
         cells=len(spec.lambda1_values) * len(spec.lambda23_values),
         instances_per_cell=spec.instances_per_cell, seed=spec.seed,
         timing_strict=args.timing_strict, out=args.out)

    def progress(task, result):
        i23, i1, index, lam23, lam1 = task
        for mode, (elapsed, status) in result.items():
            _log("solve_done", lambda23=f"{lam23:g}", lambda1=f"{lam1:g}",
                 index=index, mode=mode, status=status, elapsed=f"{elapsed:.3f}")

    table = run_grid(spec, solver, generator, timing_strict=args.timing_strict,
                     progress=progress if args.verbose else None)
    emit_report(table, format=args.format, path=args.out)
    solved = sum(r.solved_count for r in table.rows)
    total = sum(r.total_count for r in table.rows)
    _log("bench_done", solved=solved, total=total, out=args.out)
    return EXIT_OK


def cmd_check(args):
    problem = load_instance(args.instance)
    solution = load_solution(args.solution)
    _log("config", command="check", instance=args.instance, solution=args.solution,
         tolerance=args.tolerance, directional_tolerance=args.directional_tolerance,
         directions=args.directions, grid_resolution=args.grid_resolution)
    report = check_feasibility(problem, solution.weights, args.tolerance)
    checks = {"feasibility": report.feasible}
    cert_doc = None
    if report.feasible:
        cert = directional_check(problem, solution.weights,
                                 num_directions=args.directions,
                                 tolerance=args.directional_tolerance)
        checks["directional"] = cert.passed
        cert_doc = {"max_ascent_rate": cert.max_ascent_rate,
                    "directions_tested": cert.directions_tested,
                    "passed": cert.passed,
                    "tolerance": args.directional_tolerance}
    grid_doc = None
    dim = (problem.horizon - 1) * problem.n \
        if isinstance(problem, MultiPeriodProblem) else problem.n
    if dim <= 4:
        try:
            gs = grid_solve(problem, args.grid_resolution)
            margin = max(2e-3, gs.error_bound / problem.gmv)
            gap = (gs.objective - solution.objective) / problem.gmv
            checks["grid"] = gap <= margin
            grid_doc = {"grid_objective": gs.objective,
                        "solution_objective": solution.objective,
                        "normalized_gap": gap, "margin": margin,
                        "passed": checks["grid"]}
        except GridDimensionError:
            pass
    passed = all(checks.values())
    doc = {
        "schema_version": 1,
        "passed": passed,
        "feasibility": {
            "max_exposure_violation": report.max_exposure_violation,
            "budget_violation": report.budget_violation,
            "passed": report.feasible,
            "tolerance": args.tolerance,
        },
        "directional": cert_doc,
        "grid": grid_doc,
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    failing = ",".join(k for k, ok in checks.items() if not ok) or "none"
    _log("check_done", passed=passed, failing=failing)
    return EXIT_OK if passed else EXIT_NOT_CONVERGED


def build_parser():
    parser = argparse.ArgumentParser(
        prog="foliosolve",
        description="Portfolio construction solver, instance pipeline, and benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="simulate a market panel")
    g.add_argument("--seed", type=int, default=0, help="generator seed (default 0)")
    g.add_argument("--n", type=int, default=200, help="number of assets (default 200)")
    g.add_argument("--days", type=int, default=600, help="panel length in days (default 600)")
    g.add_argument("--factors", type=int, default=6, help="number of factors (default 6)")
    g.add_argument("--missing-iv", type=float, default=0.2,
                   help="fraction of assets with no implied vol (default 0.2)")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("build-instance", help="assemble an instance from a panel")
    b.add_argument("--panel", required=True, help="panel archive from 'gen'")
    b.add_argument("--date-index", type=int, default=None,
                   help="build date (default: last date with forward room)")
    b.add_argument("--lambda1", type=float, default=1e-6, help="risk penalty (default 1e-6)")
    b.add_argument("--lambda2", type=float, default=100.0, help="spread penalty (default 100)")
    b.add_argument("--lambda3", type=float, default=100.0, help="impact penalty (default 100)")
    b.add_argument("--horizon", type=int, default=1,
                   help="periods; above 1 builds a trajectory instance (default 1)")
    b.add_argument("--out", required=True, help="output instance JSON path")
    b.set_defaults(func=cmd_build_instance)

    defaults = SolverConfig()
    s = sub.add_parser("solve", help="solve an instance file")
    s.add_argument("--instance", required=True, help="instance JSON path")
    s.add_argument("--tol", type=float, default=defaults.tolerance,
                   help="fixed-point residual tolerance (default 1e-8)")
    s.add_argument("--max-iters", type=int, default=defaults.max_iterations,
                   help=f"iteration cap (default {defaults.max_iterations})")
    s.add_argument("--time-limit", type=float, default=defaults.time_limit,
                   help="wall-clock limit in seconds (default 360)")
    s.add_argument("--out", required=True, help="output solution JSON path")
    s.set_defaults(func=cmd_solve)

    n = sub.add_parser("bench", help="run a penalty grid and report counts/SGM1")
    n.add_argument("--grid", required=True, help="grid spec JSON path")
    n.add_argument("--out", required=True, help="report output path")
    n.add_argument("--format", choices=("csv", "markdown"), default="csv",
                   help="report format (default csv)")
    n.add_argument("--timing-strict", action=argparse.BooleanOptionalAction,
                   default=True,
                   help="run solves one at a time for clean timings (default on)")
    n.add_argument("--verbose", action="store_true", help="log every solve")
    n.set_defaults(func=cmd_bench)

    c = sub.add_parser("check", help="verify a solution against its instance")
    c.add_argument("--instance", required=True, help="instance JSON path")
    c.add_argument("--solution", required=True, help="solution JSON path")
    c.add_argument("--tolerance", type=float, default=1e-6,
                   help="feasibility tolerance (default 1e-6)")
    c.add_argument("--directional-tolerance", type=float, default=1e-4,
                   help="max tolerated ascent rate (default 1e-4)")
    c.add_argument("--directions", type=int, default=64,
                   help="random directions to sample (default 64)")
    c.add_argument("--grid-resolution", type=int, default=201,
                   help="grid comparison resolution for tiny instances (default 201)")
    c.add_argument("--out", default=None, help="certificate JSON path (default stdout)")
    c.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FolioError as exc:
        _log("error", kind=type(exc).__name__)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        _log("error", kind=type(exc).__name__)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
