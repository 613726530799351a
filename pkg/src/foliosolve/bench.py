"""Penalty-grid benchmark harness.

Runs the full penalty grid over seeded synthetic instances, times each
solve, and aggregates per-cell solved counts and the shifted geometric
mean of solve times (shift one second). Unsolved instances are censored
at the time limit inside the aggregate. Reports land as CSV or a
markdown table with one row per (cost penalty, risk penalty) cell.

Instance data is deterministic in (grid seed, cell, index); wall times
of course are not, so golden comparisons should ignore time columns.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .generate import GeneratorConfig, build_single_instance, extend_multi, gen_market_data
from .solver import (
    STATUS_CONVERGED,
    STATUS_NUMERICAL_FAILURE,
    SolverConfig,
    solve_multi,
    solve_single,
)

__all__ = ["GridSpec", "BenchRow", "BenchTable", "sgm1", "run_grid", "emit_report"]

_MODES = ("single", "multi", "both")


@dataclass(frozen=True)
class GridSpec:
    lambda1_values: tuple = (1e-8, 1e-7, 1e-6, 1e-5, 1e-4)
    lambda23_values: tuple = (1.0, 10.0, 100.0, 1000.0, 10000.0)
    instances_per_cell: int = 21
    horizon: int = 10
    mode: str = "both"
    seed: int = 0

    def __post_init__(self):
        if not self.lambda1_values or not self.lambda23_values:
            raise ValidationError("penalty grids must be nonempty")
        if self.instances_per_cell < 1:
            raise ValidationError("instances_per_cell must be positive")
        if self.horizon < 2:
            raise ValidationError("horizon must be >= 2")
        if self.mode not in _MODES:
            raise ValidationError(f"mode must be one of {_MODES}, got {self.mode!r}")


@dataclass
class BenchRow:
    lambda23: float
    lambda1: float
    mode: str
    times: list = field(default_factory=list)
    statuses: list = field(default_factory=list)

    @property
    def total_count(self):
        return len(self.times)

    @property
    def solved_count(self):
        return sum(1 for s in self.statuses if s == STATUS_CONVERGED)


@dataclass
class BenchTable:
    rows: list
    time_limit: float

    def row(self, lambda23, lambda1, mode) -> BenchRow:
        for r in self.rows:
            if r.lambda23 == lambda23 and r.lambda1 == lambda1 and r.mode == mode:
                return r
        raise KeyError((lambda23, lambda1, mode))

    def sgm1_for(self, row: BenchRow) -> float:
        return sgm1(row.times, row.statuses, self.time_limit)


def sgm1(times, statuses=None, time_limit=None) -> float:
    """Shifted geometric mean of solve times with shift one second.

    With statuses supplied, unsolved entries are censored at the time
    limit before aggregating.
    """
    times = [float(t) for t in times]
    if not times:
        raise ValidationError("sgm1 needs at least one time")
    if statuses is not None:
        if time_limit is None:
            raise ValidationError("censoring by status requires the time limit")
        if len(statuses) != len(times):
            raise ValidationError("times and statuses must have equal length")
        times = [t if s == STATUS_CONVERGED else float(time_limit)
                 for t, s in zip(times, statuses)]
    if any(t < 0.0 for t in times):
        raise ValidationError("times must be nonnegative")
    return float(np.expm1(np.mean(np.log1p(times))))


def _instance_seed(base, i23, i1, index):
    return int(np.random.SeedSequence(
        [int(base), 211, int(i23), int(i1), int(index)]).generate_state(1)[0])


def _run_one(task, spec, solver_config, generator_config):
    i23, i1, index, lam23, lam1 = task
    cfg = replace(generator_config,
                  seed=_instance_seed(spec.seed, i23, i1, index))
    panel = gen_market_data(cfg)
    problem = build_single_instance(
        panel, cfg.default_date_index(), (lam1, lam23, lam23), cfg)
    out = {}
    if spec.mode in ("single", "both"):
        start = time.perf_counter()
        try:
            res = solve_single(problem, solver_config)
            status = res.status
        except Exception:
            status = STATUS_NUMERICAL_FAILURE
        out["single"] = (time.perf_counter() - start, status)
    if spec.mode in ("multi", "both"):
        multi = extend_multi(problem, spec.horizon, solver_config=solver_config)
        start = time.perf_counter()
        try:
            res = solve_multi(multi, solver_config)
            status = res.status
        except Exception:
            status = STATUS_NUMERICAL_FAILURE
        out["multi"] = (time.perf_counter() - start, status)
    return out


def run_grid(spec: GridSpec, solver_config: SolverConfig = None,
             generator_config: GeneratorConfig = None,
             timing_strict: bool = True, progress=None) -> BenchTable:
    """Solve every cell of the grid and collect timings and statuses.

    With ``timing_strict`` (the default) solves run one at a time on the
    calling thread, so each wall time is measured with nothing
    co-scheduled. Otherwise instances run on a thread pool; results are
    identical, wall times are not trustworthy for reporting.
    """
    if solver_config is None:
        solver_config = SolverConfig()
    if generator_config is None:
        generator_config = GeneratorConfig()
    tasks = []
    for i23, lam23 in enumerate(spec.lambda23_values):
        for i1, lam1 in enumerate(spec.lambda1_values):
            for index in range(spec.instances_per_cell):
                tasks.append((i23, i1, index, float(lam23), float(lam1)))
    if timing_strict:
        results = [_run_one(t, spec, solver_config, generator_config) for t in tasks]
        if progress is not None:
            for t, r in zip(tasks, results):
                progress(t, r)
    else:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(
                lambda t: _run_one(t, spec, solver_config, generator_config), tasks))
    modes = ("single", "multi") if spec.mode == "both" else (spec.mode,)
    rows = {}
    for (i23, i1, index, lam23, lam1), res in zip(tasks, results):
        for mode in modes:
            key = (lam23, lam1, mode)
            if key not in rows:
                rows[key] = BenchRow(lambda23=lam23, lambda1=lam1, mode=mode)
            elapsed, status = res[mode]
            rows[key].times.append(elapsed)
            rows[key].statuses.append(status)
    ordered = []
    for lam23 in spec.lambda23_values:
        for lam1 in spec.lambda1_values:
            for mode in modes:
                ordered.append(rows[(float(lam23), float(lam1), mode)])
    return BenchTable(rows=ordered, time_limit=solver_config.time_limit)


def emit_report(table: BenchTable, format="csv", path=None) -> str:
    """Render the table as CSV or markdown; optionally write it to a file."""
    if format == "csv":
        lines = ["lambda23,lambda1,mode,count,total,sgm1_seconds"]
        for row in table.rows:
            lines.append(
                f"{row.lambda23:g},{row.lambda1:g},{row.mode},"
                f"{row.solved_count},{row.total_count},"
                f"{table.sgm1_for(row):.6f}")
    elif format == "markdown":
        modes = []
        for row in table.rows:
            if row.mode not in modes:
                modes.append(row.mode)
        header = "| lambda2,lambda3 | lambda1 |"
        rule = "|---|---|"
        for mode in modes:
            header += f" {mode} count | {mode} SGM1 (s) |"
            rule += "---|---|"
        lines = [header, rule]
        cells = {}
        order = []
        for row in table.rows:
            key = (row.lambda23, row.lambda1)
            if key not in cells:
                cells[key] = {}
                order.append(key)
            cells[key][row.mode] = row
        prev23 = None
        for lam23, lam1 in order:
            label = f"{lam23:g}" if lam23 != prev23 else ""
            prev23 = lam23
            line = f"| {label} | {lam1:g} |"
            for mode in modes:
                row = cells[(lam23, lam1)].get(mode)
                if row is None:
                    line += "  |  |"
                else:
                    line += (f" {row.solved_count}/{row.total_count} |"
                             f" {table.sgm1_for(row):.2f} |")
            lines.append(line)
    else:
        raise ValidationError(f"unknown report format {format!r}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
