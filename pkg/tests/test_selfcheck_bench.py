import io
import time

import numpy as np

import nomapfs.selfcheck as selfcheck
from nomapfs.bench import main as bench_main
from nomapfs.noma_alloc import PairRelation, PairCase


def test_selfcheck_passes_quickly():
    buf = io.StringIO()
    t0 = time.time()
    code = selfcheck.run_selfcheck(stream=buf)
    elapsed = time.time() - t0
    out = buf.getvalue()
    assert code == 0, out
    assert "all suites passed" in out
    assert elapsed < 60


def test_selfcheck_catches_corrupted_crossing(monkeypatch):
    # mutation sanity: a sign-flipped crossing point must fail the
    # classification suite
    def corrupted(u, v):
        rel = _orig(u, v)
        if rel.case_id is PairCase.CASE1:
            return PairRelation(PairCase.CASE1, theta=1.0 - rel.theta)
        return rel

    _orig = selfcheck.classify_pair
    monkeypatch.setattr(selfcheck, "classify_pair", corrupted)
    bad, ok, _ = selfcheck._check_crossing_classification(np.random.default_rng(0))
    assert not ok and bad > 0


def test_bench_smoke(capsys):
    assert bench_main(["--users", "3", "--frames", "150", "--smax", "2", "--skip-estimator"]) == 0
    out = capsys.readouterr().out
    assert "simulate" in out
    assert "agreement" in out
