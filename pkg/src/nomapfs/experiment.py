"""Sweep runner: expands an ExperimentConfig into cells, executes simulation
and/or estimation per cell, and writes machine-readable outputs.

Work is grouped per (user count, drop): the drop is prepared once, each
multiplexing cap simulated once, and each (i_max, epsilon) estimated once;
the emitted rows are the full cross product. Row files are schema-stable:

results.csv columns:
    scenario_id, users, s_max, i_max, epsilon, seed,
    overall_sim, cell_edge_sim, overall_est, rel_dev, status, runtime
deviations.csv columns:
    scenario_id, user, deviation
manifest.json: resolved config, package version, acceleration lane.

All seeds derive from (config.seed, users, drop index), so a sweep is
reproducible cell by cell regardless of worker count or execution order
(the runtime column, wall-clock seconds, is the one non-deterministic field).
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from ._accel import lane_name
from .config import ExperimentConfig
from .errors import ConvergenceError, QuadratureError
from .network_sim import prepare_drop, simulate
from .rate_estimator import solve_rates
from .stats import relative_deviation

__all__ = ["CellResult", "run_group", "run_experiment", "RESULT_COLUMNS"]

RESULT_COLUMNS = [
    "scenario_id", "users", "s_max", "i_max", "epsilon", "seed",
    "overall_sim", "cell_edge_sim", "overall_est", "rel_dev", "status", "runtime",
]


def smax_label(s_max) -> str:
    return "inf" if s_max == math.inf else str(int(s_max))


def drop_seed(base_seed: int, users: int, drop_index: int) -> int:
    """Deterministic per-drop seed, independent of execution order."""
    return int(np.random.SeedSequence((base_seed, users, drop_index)).generate_state(1)[0])


@dataclass
class CellResult:
    scenario_id: str
    users: int
    s_max: object
    i_max: int
    epsilon: float
    seed: int
    overall_sim: Optional[float]
    cell_edge_sim: Optional[float]
    overall_est: Optional[float]
    rel_dev: Optional[float]
    status: str
    runtime: float
    per_user_dev: Optional[np.ndarray] = None

    def row(self) -> list:
        def fmt(x, digits=6):
            return "" if x is None else f"{x:.{digits}g}"

        return [
            self.scenario_id, self.users, smax_label(self.s_max), self.i_max,
            f"{self.epsilon:g}", self.seed, fmt(self.overall_sim), fmt(self.cell_edge_sim),
            fmt(self.overall_est), fmt(self.rel_dev), self.status, f"{self.runtime:.3f}",
        ]


def run_group(config: ExperimentConfig, users: int, drop_index: int, mode: str = "both") -> List[CellResult]:
    """All cells of one (users, drop) pair."""
    do_sim = mode in ("sim", "both")
    do_est = mode in ("estimate", "both")
    seed = drop_seed(config.seed, users, drop_index)
    scenario = prepare_drop(config, seed, users)

    sims = {}
    sim_time = {}
    if do_sim:
        for cap in config.s_max:
            t0 = time.perf_counter()
            sims[cap] = simulate(scenario, cap)
            sim_time[cap] = time.perf_counter() - t0

    ests = {}
    est_time = {}
    est_status = {}
    if do_est:
        warm = None
        for i_max in config.i_max:
            for eps in config.epsilon_cv:
                t0 = time.perf_counter()
                dists = scenario.estimated_distributions(i_max, eps)
                try:
                    sol = solve_rates(dists, config.bandwidth_hz, tol=config.estimator_tol,
                                      max_iter=config.estimator_max_iter, initial_rates=warm)
                    ests[(i_max, eps)] = sol
                    est_status[(i_max, eps)] = "ok"
                    warm = sol.rates
                except (ConvergenceError, QuadratureError) as exc:
                    ests[(i_max, eps)] = None
                    est_status[(i_max, eps)] = f"estimator-failed: {type(exc).__name__}"
                est_time[(i_max, eps)] = time.perf_counter() - t0

    cells = []
    for cap in config.s_max:
        for i_max in config.i_max:
            for eps in config.epsilon_cv:
                scenario_id = f"u{users}-s{smax_label(cap)}-i{i_max}-e{eps:g}-d{drop_index}"
                sim = sims.get(cap)
                est = ests.get((i_max, eps))
                status = "ok"
                overall_sim = cell_edge = overall_est = rel_dev = None
                per_user = None
                if do_sim and sim is not None:
                    overall_sim = sim.overall
                    cell_edge = sim.cell_edge
                if do_est:
                    status = est_status.get((i_max, eps), "ok")
                    if est is not None:
                        overall_est = est.total
                if overall_sim is not None and overall_est is not None:
                    rel_dev = relative_deviation(overall_est, overall_sim)
                    # a user that was never scheduled (possible in very short
                    # runs) has no finite relative deviation
                    scheduled = sim.mean_rates > 0
                    per_user = np.full(sim.mean_rates.shape, np.inf)
                    per_user[scheduled] = (est.rates[scheduled] - sim.mean_rates[scheduled]) / sim.mean_rates[scheduled]
                cells.append(CellResult(
                    scenario_id=scenario_id, users=users, s_max=cap, i_max=i_max,
                    epsilon=eps, seed=seed, overall_sim=overall_sim,
                    cell_edge_sim=cell_edge, overall_est=overall_est, rel_dev=rel_dev,
                    status=status,
                    runtime=sim_time.get(cap, 0.0) + est_time.get((i_max, eps), 0.0),
                    per_user_dev=per_user,
                ))
    return cells


def _group_task(args):
    config, users, drop_index, mode = args
    return run_group(config, users, drop_index, mode)


def run_experiment(config: ExperimentConfig, out_dir, *, mode: str = "both",
                   workers: int = 1) -> List[CellResult]:
    """Execute the configured sweep and write results.csv, deviations.csv and
    manifest.json into out_dir. Returns the cell results."""
    if mode not in ("sim", "estimate", "both"):
        raise ValueError(f"unknown mode {mode!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    tasks = [(config, users, drop, mode)
             for users in config.users for drop in range(config.drops)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            groups = list(pool.map(_group_task, tasks))
    else:
        groups = [_group_task(t) for t in tasks]

    cells = [cell for group in groups for cell in group]
    cells.sort(key=lambda c: (c.users, c.scenario_id))

    with open(out / "results.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for cell in cells:
            writer.writerow(cell.row())

    with open(out / "deviations.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario_id", "user", "deviation"])
        for cell in cells:
            if cell.per_user_dev is not None:
                for user, dev in enumerate(cell.per_user_dev):
                    writer.writerow([cell.scenario_id, user, f"{dev:.6g}"])

    from . import __version__

    manifest = {
        "version": __version__,
        "lane": lane_name(),
        "mode": mode,
        "workers": workers,
        "config": config.as_dict(),
        "result_columns": RESULT_COLUMNS,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return cells
