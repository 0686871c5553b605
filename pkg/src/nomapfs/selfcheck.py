"""Built-in verification suites: fast reduced-size versions of the oracle
checks, runnable from the CLI as a smoke gate."""

from __future__ import annotations

import math
import time

import numpy as np

from .noma_alloc import (PairCase, classify_pair, optimal_schedule_ideal,
                         optimal_schedule_practical, pf_weight_of_allocation)
from .oracles import brute_force_best_metric, envelope_pf_weight
from .rate_estimator import solve_rates
from .sinr_model import SinrDistribution, survival_cqi

__all__ = ["run_selfcheck"]


def _check_ideal_oracle(rng):
    worst = 0.0
    for _ in range(60):
        n = int(rng.integers(1, 6))
        phi = np.exp(rng.uniform(np.log(0.1), np.log(100), n))
        rate = np.exp(rng.uniform(np.log(0.1), np.log(10), n))
        alloc = optimal_schedule_ideal(phi, rate)
        w = pf_weight_of_allocation(alloc, dict(enumerate(phi)), dict(enumerate(rate)), 1.0)
        ref = brute_force_best_metric(phi, rate, 1.0)
        worst = max(worst, abs(w - ref) / ref)
    return worst, worst <= 1e-4, "max rel diff vs subset+grid search"


def _check_practical_oracle(rng):
    worst = 0.0
    for _ in range(15):
        phi = np.exp(rng.uniform(np.log(0.1), np.log(100), 6))
        rate = np.exp(rng.uniform(np.log(0.1), np.log(10), 6))
        alloc = optimal_schedule_practical(phi, rate, 2)
        w = pf_weight_of_allocation(alloc, dict(enumerate(phi)), dict(enumerate(rate)), 1.0)
        ref = brute_force_best_metric(phi, rate, 1.0, s_max=2)
        worst = max(worst, abs(w - ref) / ref)
    return worst, worst <= 1e-4, "max rel diff vs capped subset search"


def _check_envelope_quadrature(rng):
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 7))
        phi = np.exp(rng.uniform(np.log(0.1), np.log(100), n))
        rate = np.exp(rng.uniform(np.log(0.1), np.log(10), n))
        alloc = optimal_schedule_ideal(phi, rate)
        w = pf_weight_of_allocation(alloc, dict(enumerate(phi)), dict(enumerate(rate)), 1.0)
        ref = envelope_pf_weight(phi, rate, 1.0)
        worst = max(worst, abs(w - ref) / ref)
    return worst, worst <= 1e-6, "max rel diff vs envelope integral"


def _check_crossing_classification(rng):
    """Verdicts must match direct curve comparison on a dense x grid."""
    xs = np.linspace(1e-4, 1.0 - 1e-4, 200)
    bad = 0
    for _ in range(2000):
        phi = np.exp(rng.uniform(np.log(0.1), np.log(100), 2))
        rate = np.exp(rng.uniform(np.log(0.1), np.log(10), 2))
        rel = classify_pair((phi[0], rate[0]), (phi[1], rate[1]))
        hi, lo = (0, 1) if phi[0] >= phi[1] else (1, 0)
        curve_hi = phi[hi] / (rate[hi] * (1 + xs * phi[hi]))
        curve_lo = phi[lo] / (rate[lo] * (1 + xs * phi[lo]))
        diff = curve_hi - curve_lo
        if rel.case_id is PairCase.CASE2 and np.any(diff > 1e-12 * curve_hi):
            bad += 1
        elif rel.case_id is PairCase.CASE3 and np.any(diff < -1e-12 * curve_hi):
            bad += 1
        elif rel.case_id is PairCase.CASE1:
            sign_flips = (diff[:-1] * diff[1:] < 0).sum()
            before = xs < rel.theta
            ok = np.all(diff[before] >= -1e-9 * curve_hi[before]) and sign_flips <= 1
            if not ok:
                bad += 1
    return bad, bad == 0, "verdicts disagreeing with sampled curves"


def _check_cdf_dominance(rng):
    """Dropping interferers into the residual raises the CDF pointwise
    (checked on the survival side, which does not saturate in float)."""
    phis = np.logspace(-3, 3, 200)
    bad = 0
    for _ in range(2000):
        n_int = int(rng.integers(1, 9))
        powers = 10 ** rng.uniform(-3, 0, n_int)
        noise = 10 ** rng.uniform(-4, -2)
        full = SinrDistribution(1.0, tuple(powers), noise)
        k = int(rng.integers(0, n_int))
        part = SinrDistribution(1.0, tuple(powers[:k]), noise + powers[k:].sum())
        if not np.all(survival_cqi(part, phis) < survival_cqi(full, phis)):
            bad += 1
    return bad, bad == 0, "instances with non-dominated partial CDF"


def _check_estimator_closed_form(rng):
    dist = SinrDistribution(1.0, (1.0,), 1e-12)
    sol = solve_rates([dist], bandwidth=1.0)
    err = abs(sol.rates[0] - 1.0 / math.log(2.0))
    return err, err <= 1e-3, "abs error vs 1/ln2"


def run_selfcheck(stream=None) -> int:
    """Run all suites; print one line per suite; exit code 0 iff all pass."""
    import sys

    stream = stream or sys.stdout
    rng = np.random.default_rng(20240901)
    suites = [
        ("ideal-vs-bruteforce", _check_ideal_oracle),
        ("practical-vs-bruteforce", _check_practical_oracle),
        ("envelope-quadrature", _check_envelope_quadrature),
        ("crossing-classification", _check_crossing_classification),
        ("cdf-dominance", _check_cdf_dominance),
        ("estimator-closed-form", _check_estimator_closed_form),
    ]
    failures = 0
    for name, fn in suites:
        t0 = time.perf_counter()
        value, ok, what = fn(rng)
        elapsed = time.perf_counter() - t0
        status = "PASS" if ok else "FAIL"
        if not ok:
            failures += 1
        print(f"{status}  {name:28s} {value:.3g} ({what}) [{elapsed:.1f}s]", file=stream)
    print(("all suites passed" if failures == 0 else f"{failures} suite(s) FAILED"), file=stream)
    return 0 if failures == 0 else 1
