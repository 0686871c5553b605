import math

import numpy as np
import pytest

from nomapfs.errors import DegeneratePairError, DomainError, InconsistencyError, InvalidParameterError
from nomapfs.noma_alloc import (Allocation, PairCase, classify_pair, coefficient_fn,
                                crossing_theta, optimal_schedule_ideal,
                                optimal_schedule_practical, pf_weight_of_allocation,
                                post_sic_sinr, rates_from_allocation)
from nomapfs.oracles import brute_force_best_metric, envelope_pf_weight


def rand_instance(rng, n):
    phi = np.exp(rng.uniform(np.log(0.1), np.log(100), n))
    rate = np.exp(rng.uniform(np.log(0.1), np.log(10), n))
    return phi, rate


def metric_of(alloc, phi, rate, bandwidth=1.0):
    return pf_weight_of_allocation(alloc, dict(enumerate(phi)), dict(enumerate(rate)), bandwidth)


class TestCoefficientFn:
    def test_limit_at_zero(self):
        assert coefficient_fn(1.0, 1.0, 1e-12) == pytest.approx(1.0)

    def test_substitution(self):
        assert coefficient_fn(3.0, 2.0, 1.0 / 3.0) == pytest.approx(0.75)

    def test_high_cqi_point(self):
        assert coefficient_fn(10.0, 1.0, 0.9) == pytest.approx(1.0)

    def test_strictly_decreasing(self):
        xs = np.linspace(0.01, 0.99, 50)
        vals = [coefficient_fn(7.0, 2.0, x) for x in xs]
        assert np.all(np.diff(vals) < 0)

    @pytest.mark.parametrize("bad", [(0.0, 1.0, 0.5), (1.0, -1.0, 0.5), (1.0, 1.0, 0.0), (1.0, 1.0, 1.0)])
    def test_domain_errors(self, bad):
        with pytest.raises(DomainError):
            coefficient_fn(*bad)


class TestCrossingTheta:
    def test_example(self):
        assert crossing_theta((4.0, 1.0), (1.0, 0.5)) == pytest.approx(0.5)

    def test_symmetry(self):
        assert crossing_theta((1.0, 0.5), (4.0, 1.0)) == pytest.approx(0.5)

    def test_equal_rates_degenerate(self):
        with pytest.raises(DegeneratePairError):
            crossing_theta((2.0, 1.0), (1.0, 1.0))

    def test_crossing_equalises_curves(self):
        rng = np.random.default_rng(3)
        found = 0
        while found < 50:
            (phi, rate) = rand_instance(rng, 2)
            if abs(rate[0] - rate[1]) < 1e-9:
                continue
            theta = crossing_theta((phi[0], rate[0]), (phi[1], rate[1]))
            if 0.0 < theta < 1.0:
                a = coefficient_fn(phi[0], rate[0], theta)
                b = coefficient_fn(phi[1], rate[1], theta)
                assert a == pytest.approx(b, rel=1e-9)
                found += 1


class TestClassifyPair:
    def test_case1(self):
        rel = classify_pair((4.0, 1.0), (1.0, 0.5))
        assert rel.case_id is PairCase.CASE1
        assert rel.theta == pytest.approx(0.5)

    def test_case2(self):
        rel = classify_pair((2.0, 4.0), (1.0, 1.0))
        assert rel.case_id is PairCase.CASE2 and rel.theta is None

    def test_case3(self):
        rel = classify_pair((2.0, 1.0), (1.0, 1.0))
        assert rel.case_id is PairCase.CASE3 and rel.theta is None

    def test_equal_cqi(self):
        assert classify_pair((2.0, 1.0), (2.0, 3.0)).case_id is PairCase.EQUAL_CQI

    def test_argument_order_invariance(self):
        rel = classify_pair((1.0, 0.5), (4.0, 1.0))
        assert rel.case_id is PairCase.CASE1
        assert rel.theta == pytest.approx(0.5)

    def test_matches_sampled_curves(self):
        # verdicts against direct numerical comparison of the two curves
        rng = np.random.default_rng(10)
        xs = np.linspace(1e-3, 1 - 1e-3, 1000)
        for _ in range(10_000):
            phi, rate = rand_instance(rng, 2)
            rel = classify_pair((phi[0], rate[0]), (phi[1], rate[1]))
            hi, lo = (0, 1) if phi[0] >= phi[1] else (1, 0)
            c_hi = phi[hi] / (rate[hi] * (1 + xs * phi[hi]))
            c_lo = phi[lo] / (rate[lo] * (1 + xs * phi[lo]))
            diff = c_hi - c_lo
            tol = 1e-9 * np.maximum(c_hi, c_lo)
            if rel.case_id is PairCase.CASE2:
                assert np.all(diff <= tol)
            elif rel.case_id is PairCase.CASE3:
                assert np.all(diff >= -tol)
            elif rel.case_id is PairCase.CASE1:
                assert np.all(diff[xs <= rel.theta - 1e-6] >= -tol[xs <= rel.theta - 1e-6])
                assert np.all(diff[xs >= rel.theta + 1e-6] <= tol[xs >= rel.theta + 1e-6])


class TestIdealSchedule:
    def test_single_user(self):
        alloc = optimal_schedule_ideal([5.0], [2.0], user_ids=[9])
        assert alloc.sequence == (9,)
        assert np.allclose(alloc.cprs, [0.0, 1.0])
        assert np.allclose(alloc.power_ratios, [1.0])

    def test_dominated_user_excluded(self):
        # everywhere-dominated pair: only the dominant user scheduled
        alloc = optimal_schedule_ideal([2.0, 1.0], [1.0, 1.0])
        assert alloc.sequence == (0,)
        assert np.allclose(alloc.power_ratios, [1.0])

    def test_matches_bruteforce_on_random_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            phi, rate = rand_instance(rng, int(rng.integers(2, 5)))
            alloc = optimal_schedule_ideal(phi, rate)
            w = metric_of(alloc, phi, rate)
            ref = brute_force_best_metric(phi, rate)
            assert w == pytest.approx(ref, rel=1e-4)

    def test_matches_bruteforce_on_correlated_states(self):
        # averaged rates correlated with CQI, as produced by the scheduler loop
        rng = np.random.default_rng(43)
        for _ in range(60):
            n = int(rng.integers(2, 6))
            phi = np.exp(rng.uniform(np.log(0.1), np.log(100), n))
            rate = np.log2(1 + phi) / n * np.exp(rng.normal(0, 0.5, n))
            alloc = optimal_schedule_ideal(phi, rate)
            w = metric_of(alloc, phi, rate)
            ref = brute_force_best_metric(phi, rate)
            assert w == pytest.approx(ref, rel=1e-4)

    def test_descending_cqi_and_increasing_crossings(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            phi, rate = rand_instance(rng, 6)
            alloc = optimal_schedule_ideal(phi, rate)
            phis = np.array([phi[u] for u in alloc.sequence])
            assert np.all(np.diff(phis) < 0)
            assert np.all(np.diff(alloc.cprs) > 0)

    def test_adjacent_curves_cross_at_the_breakpoints(self):
        # between consecutive breakpoints the scheduled user's curve is the max
        rng = np.random.default_rng(8)
        for _ in range(50):
            phi, rate = rand_instance(rng, 5)
            alloc = optimal_schedule_ideal(phi, rate)
            if alloc.n_scheduled < 2:
                continue
            for k in range(alloc.n_scheduled - 1):
                u, v = alloc.sequence[k], alloc.sequence[k + 1]
                theta = alloc.cprs[k + 1]
                for x in (theta * 0.3, theta - 1e-6):
                    assert coefficient_fn(phi[u], rate[u], x) >= coefficient_fn(phi[v], rate[v], x) - 1e-12
                for x in (theta + 1e-6, theta + 0.3 * (1 - theta)):
                    assert coefficient_fn(phi[v], rate[v], x) >= coefficient_fn(phi[u], rate[u], x) - 1e-12

    def test_equal_cqi_schedules_single_user(self):
        alloc = optimal_schedule_ideal([3.0, 3.0], [1.0, 2.0])
        assert alloc.sequence == (0,)  # smaller averaged rate dominates

    def test_tie_at_origin_prefers_smaller_cqi(self):
        # equal phi/rate ratio: flatter (smaller-CQI) curve dominates beyond 0
        alloc = optimal_schedule_ideal([4.0, 2.0], [4.0, 2.0])
        assert alloc.sequence[0] == 1

    def test_theta_budget(self):
        rng = np.random.default_rng(44)
        for n in (2, 5, 10, 25):
            phi, rate = rand_instance(rng, n)
            alloc = optimal_schedule_ideal(phi, rate)
            assert alloc.theta_evals <= n * (n + 1) // 2

    def test_empty_candidates_rejected(self):
        with pytest.raises(InvalidParameterError):
            optimal_schedule_ideal([], [])


class TestPracticalSchedule:
    def test_single_user_cap_is_best_ratio(self):
        alloc = optimal_schedule_practical([3.0, 1.0], [1.0, 1.0], s_max=1)
        assert alloc.sequence == (0,)
        rates = rates_from_allocation(alloc, {0: 3.0, 1: 1.0}, bandwidth=1.0)
        assert rates[0] == pytest.approx(2.0)

    def test_loose_cap_equals_ideal(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            phi, rate = rand_instance(rng, 4)
            ideal = optimal_schedule_ideal(phi, rate)
            capped = optimal_schedule_practical(phi, rate, s_max=10)
            assert capped.sequence == ideal.sequence
            assert np.allclose(capped.cprs, ideal.cprs)

    def test_matches_bruteforce_six_users_cap_two(self):
        rng = np.random.default_rng(45)
        for _ in range(25):
            phi, rate = rand_instance(rng, 6)
            alloc = optimal_schedule_practical(phi, rate, s_max=2)
            w = metric_of(alloc, phi, rate)
            ref = brute_force_best_metric(phi, rate, s_max=2)
            assert w == pytest.approx(ref, rel=1e-4)

    def test_monotone_in_cap_and_bounded_by_ideal(self):
        rng = np.random.default_rng(46)
        for _ in range(40):
            phi, rate = rand_instance(rng, 7)
            ideal = metric_of(optimal_schedule_ideal(phi, rate), phi, rate)
            prev = 0.0
            for cap in (1, 2, 3, 4):
                w = metric_of(optimal_schedule_practical(phi, rate, cap), phi, rate)
                assert w >= prev - 1e-12
                assert w <= ideal + 1e-10
                prev = w

    def test_invalid_cap(self):
        with pytest.raises(InvalidParameterError):
            optimal_schedule_practical([1.0], [1.0], s_max=0)


class TestPostSicAndRates:
    def test_two_user_example(self):
        alloc = Allocation(sequence=(1, 2), cprs=np.array([0.0, 0.2, 1.0]), power_ratios=None)
        gammas = post_sic_sinr(alloc, {1: 10.0, 2: 1.0})
        assert gammas[1] == pytest.approx(2.0)
        assert gammas[2] == pytest.approx(0.8 / 1.2)

    def test_single_user_full_power(self):
        alloc = Allocation(sequence=(0,), cprs=np.array([0.0, 1.0]), power_ratios=None)
        assert post_sic_sinr(alloc, {0: 5.0})[0] == pytest.approx(5.0)

    def test_vanishing_share_vanishing_sinr(self):
        alloc = Allocation(sequence=(0, 1), cprs=np.array([0.0, 1.0 - 1e-12, 1.0]), power_ratios=None)
        assert post_sic_sinr(alloc, {0: 4.0, 1: 2.0})[1] < 1e-11

    def test_single_user_rate(self):
        alloc = Allocation(sequence=(0,), cprs=np.array([0.0, 1.0]), power_ratios=None)
        rates = rates_from_allocation(alloc, {0: 3.0}, bandwidth=1.0)
        assert rates[0] == pytest.approx(2.0)

    def test_unscheduled_users_get_zero(self):
        alloc = Allocation(sequence=(0,), cprs=np.array([0.0, 1.0]), power_ratios=None)
        rates = rates_from_allocation(alloc, {0: 3.0, 7: 1.0}, bandwidth=1.0)
        assert rates[7] == 0.0

    def test_rate_equals_capacity_of_post_sic_sinr(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            phi, rate = rand_instance(rng, 4)
            alloc = optimal_schedule_ideal(phi, rate)
            cqis = dict(enumerate(phi))
            rates = rates_from_allocation(alloc, cqis, bandwidth=2.5)
            gammas = post_sic_sinr(alloc, cqis)
            for u in alloc.sequence:
                assert rates[u] == pytest.approx(2.5 * math.log2(1 + gammas[u]), rel=1e-12)

    def test_missing_cqi(self):
        alloc = Allocation(sequence=(0,), cprs=np.array([0.0, 1.0]), power_ratios=None)
        with pytest.raises(InconsistencyError):
            post_sic_sinr(alloc, {3: 1.0})


class TestPfWeight:
    def test_single_user(self):
        alloc = Allocation(sequence=(0,), cprs=np.array([0.0, 1.0]), power_ratios=None)
        w = pf_weight_of_allocation(alloc, {0: 3.0}, {0: 1.0}, bandwidth=1.0)
        assert w == pytest.approx(2.0)

    def test_matches_envelope_quadrature(self):
        rng = np.random.default_rng(12)
        for _ in range(25):
            phi, rate = rand_instance(rng, int(rng.integers(1, 6)))
            alloc = optimal_schedule_ideal(phi, rate)
            w = metric_of(alloc, phi, rate)
            ref = envelope_pf_weight(phi, rate)
            assert w == pytest.approx(ref, rel=1e-6)

    def test_no_feasible_allocation_beats_the_optimum(self):
        rng = np.random.default_rng(13)
        for _ in range(40):
            phi, rate = rand_instance(rng, 4)
            best = metric_of(optimal_schedule_ideal(phi, rate), phi, rate)
            # random feasible allocations: random subset, descending CQI, random splits
            for _ in range(25):
                size = int(rng.integers(1, 5))
                subset = rng.choice(4, size=size, replace=False)
                subset = subset[np.argsort(-phi[subset])]
                cuts = np.sort(rng.uniform(0.001, 0.999, size - 1))
                cprs = np.concatenate([[0.0], cuts, [1.0]])
                if np.any(np.diff(cprs) <= 0):
                    continue
                alloc = Allocation(sequence=tuple(int(u) for u in subset), cprs=cprs, power_ratios=None)
                assert metric_of(alloc, phi, rate) <= best + 1e-10


class TestAllocationInvariants:
    def test_rejects_non_monotone_cprs(self):
        with pytest.raises(InconsistencyError):
            Allocation(sequence=(0, 1), cprs=np.array([0.0, 0.7, 0.5]), power_ratios=None)

    def test_rejects_bad_endpoints(self):
        with pytest.raises(InconsistencyError):
            Allocation(sequence=(0,), cprs=np.array([0.1, 1.0]), power_ratios=None)
        with pytest.raises(InconsistencyError):
            Allocation(sequence=(0,), cprs=np.array([0.0, 0.9]), power_ratios=None)

    def test_rejects_duplicate_users(self):
        with pytest.raises(InconsistencyError):
            Allocation(sequence=(0, 0), cprs=np.array([0.0, 0.5, 1.0]), power_ratios=None)

    def test_power_ratios_sum_to_one(self):
        rng = np.random.default_rng(14)
        for _ in range(100):
            phi, rate = rand_instance(rng, 5)
            alloc = optimal_schedule_ideal(phi, rate)
            assert abs(alloc.power_ratios.sum() - 1.0) < 1e-12
