"""Cross-lane agreement: the numba kernels and the pure fallback must produce
the same numbers. The fallback lane is selected by NOMAPFS_NUMBA=0 at import
time, so it runs in a subprocess."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

WORKER = """
import json, sys
import numpy as np
from nomapfs._accel import lane_name
from nomapfs.config import ExperimentConfig
from nomapfs.network_sim import prepare_drop, simulate
from nomapfs.noma_alloc import optimal_schedule_ideal, optimal_schedule_practical

cfg = ExperimentConfig(users=(4,), warmup_frames=40, measured_frames=160)
scenario = prepare_drop(cfg, seed=77, n_users=4)
result = simulate(scenario, 2, record_ladder=True)

rng = np.random.default_rng(5)
phi = np.exp(rng.uniform(np.log(0.1), np.log(100), 6))
rate = np.exp(rng.uniform(np.log(0.1), np.log(10), 6))
ideal = optimal_schedule_ideal(phi, rate)
capped = optimal_schedule_practical(phi, rate, 2)

json.dump({
    "lane": lane_name(),
    "mean_rates": result.mean_rates.tolist(),
    "trace_sum": float(result.pf_trace.sum()),
    "ladder_sum": float(result.ladder.sum()),
    "ideal_seq": list(ideal.sequence),
    "ideal_cprs": ideal.cprs.tolist(),
    "capped_seq": list(capped.sequence),
    "capped_cprs": capped.cprs.tolist(),
}, sys.stdout)
"""


def run_lane(numba_on: bool) -> dict:
    env = dict(os.environ)
    env["NOMAPFS_NUMBA"] = "1" if numba_on else "0"
    proc = subprocess.run([sys.executable, "-c", WORKER], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


@pytest.fixture(scope="module")
def lanes():
    return run_lane(True), run_lane(False)


def test_lane_selection(lanes):
    fast, slow = lanes
    assert fast["lane"] == "numba"
    assert slow["lane"] == "numpy"


def test_schedules_identical(lanes):
    fast, slow = lanes
    assert fast["ideal_seq"] == slow["ideal_seq"]
    assert fast["capped_seq"] == slow["capped_seq"]
    assert np.allclose(fast["ideal_cprs"], slow["ideal_cprs"], rtol=1e-14, atol=0)
    assert np.allclose(fast["capped_cprs"], slow["capped_cprs"], rtol=1e-14, atol=0)


def test_simulation_outputs_agree(lanes):
    fast, slow = lanes
    assert np.allclose(fast["mean_rates"], slow["mean_rates"], rtol=1e-10)
    assert fast["trace_sum"] == pytest.approx(slow["trace_sum"], rel=1e-10)
    assert fast["ladder_sum"] == pytest.approx(slow["ladder_sum"], rel=1e-10)
