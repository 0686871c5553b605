"""Benchmark the numba lane against the pure-numpy fallback.

Runs the same workload (one simulated drop plus one estimator solve) in two
subprocesses, one per lane, and reports wall times and the agreement of the
numeric outputs.

    python -m nomapfs.bench [--users 10] [--frames 3000] [--smax 3] [--skip-estimator]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _workload(users: int, frames: int, smax: int, run_estimator: bool) -> dict:
    import numpy as np

    from ._accel import lane_name
    from .config import ExperimentConfig
    from .network_sim import prepare_drop, simulate
    from .rate_estimator import solve_rates

    cfg = ExperimentConfig(users=(users,), s_max=(smax,), warmup_frames=frames // 6,
                           measured_frames=frames - frames // 6)
    scenario = prepare_drop(cfg, seed=2024, n_users=users)

    t0 = time.perf_counter()
    result = simulate(scenario, smax, record_ladder=True)
    t_sim = time.perf_counter() - t0

    out = {
        "lane": lane_name(),
        "sim_seconds": t_sim,
        "overall": result.overall,
        "mean_rates": result.mean_rates.tolist(),
        "pf_trace_sum": float(result.pf_trace.sum()),
    }
    if run_estimator:
        dists = scenario.estimated_distributions(8, 0.0)
        t0 = time.perf_counter()
        sol = solve_rates(dists, cfg.bandwidth_hz)
        out["est_seconds"] = time.perf_counter() - t0
        out["est_total"] = sol.total
        out["est_rates"] = sol.rates.tolist()
    return out


def _run_lane(lane_on: bool, args) -> dict:
    env = dict(os.environ)
    env["NOMAPFS_NUMBA"] = "1" if lane_on else "0"
    cmd = [sys.executable, "-m", "nomapfs.bench", "--worker",
           "--users", str(args.users), "--frames", str(args.frames), "--smax", str(args.smax)]
    if args.skip_estimator:
        cmd.append("--skip-estimator")
    proc = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def _rel_diff(a, b) -> float:
    import numpy as np

    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.maximum(np.abs(a), 1e-300)
    return float(np.max(np.abs(a - b) / denom))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--users", type=int, default=10)
    parser.add_argument("--frames", type=int, default=3000)
    parser.add_argument("--smax", type=int, default=3)
    parser.add_argument("--skip-estimator", action="store_true")
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    if args.worker:
        out = _workload(args.users, args.frames, args.smax, not args.skip_estimator)
        json.dump(out, sys.stdout)
        return 0

    print(f"workload: {args.users} users, {args.frames} frames, s_max={args.smax}"
          + ("" if args.skip_estimator else ", plus estimator solve"))
    fast = _run_lane(True, args)
    slow = _run_lane(False, args)

    print(f"{'stage':<12} {'numba':>10} {'numpy':>10} {'speedup':>9}")
    print(f"{'simulate':<12} {fast['sim_seconds']:>9.2f}s {slow['sim_seconds']:>9.2f}s "
          f"{slow['sim_seconds'] / fast['sim_seconds']:>8.1f}x")
    if not args.skip_estimator:
        print(f"{'estimator':<12} {fast['est_seconds']:>9.2f}s {slow['est_seconds']:>9.2f}s "
              f"{slow['est_seconds'] / fast['est_seconds']:>8.1f}x")

    agree = _rel_diff(fast["mean_rates"], slow["mean_rates"])
    print(f"mean-rate agreement across lanes: max rel diff {agree:.3g}")
    if not args.skip_estimator:
        agree_est = _rel_diff(fast["est_rates"], slow["est_rates"])
        print(f"estimated-rate agreement across lanes: max rel diff {agree_est:.3g}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
