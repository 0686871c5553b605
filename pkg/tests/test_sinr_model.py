import math

import numpy as np
import pytest
from scipy.integrate import quad

from nomapfs.errors import DomainError, InconsistencyError
from nomapfs.sinr_model import SinrDistribution, cdf_cqi, pdf_cqi, residual_noise, survival_cqi


def ks_distance(samples, dist):
    """Kolmogorov-Smirnov distance between an empirical sample and the model CDF."""
    xs = np.sort(samples)
    model = cdf_cqi(dist, xs)
    n = xs.size
    upper = np.abs(np.arange(1, n + 1) / n - model).max()
    lower = np.abs(np.arange(0, n) / n - model).max()
    return max(upper, lower)


class TestClosedForm:
    def test_noise_only_exponential(self):
        d = SinrDistribution(1.0, (), 1.0)
        assert cdf_cqi(d, 1.0) == pytest.approx(1 - math.exp(-1))
        assert pdf_cqi(d, 1e-9) == pytest.approx(1.0, rel=1e-6)

    def test_single_interferer_interference_limited(self):
        d = SinrDistribution(1.0, (1.0,), 1e-15)
        assert cdf_cqi(d, 1.0) == pytest.approx(0.5, rel=1e-9)

    def test_cdf_monotone_and_normalised(self):
        d = SinrDistribution(2.0, (0.5, 0.2, 0.05), 0.3)
        phis = np.logspace(-4, 4, 500)
        cdf = cdf_cqi(d, phis)
        assert np.all(np.diff(cdf) >= 0)
        live = cdf < 1 - 1e-12  # strictly increasing until float saturation
        assert np.all(np.diff(cdf[live]) > 0)
        assert cdf[0] < 1e-3 and cdf[-1] > 1 - 1e-6
        total, _ = quad(lambda p: pdf_cqi(d, p), 0, np.inf, limit=300)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_pdf_matches_cdf_derivative(self):
        d = SinrDistribution(1.5, (0.8, 0.1), 0.25)
        phis = np.logspace(-3, 2, 1000)
        h = 1e-6 * np.maximum(phis, 1.0)
        fd = (cdf_cqi(d, phis + h) - cdf_cqi(d, phis - h)) / (2 * h)
        assert np.abs(fd - pdf_cqi(d, phis)).max() < 1e-6

    def test_domain_errors(self):
        d = SinrDistribution(1.0, (), 1.0)
        with pytest.raises(DomainError):
            cdf_cqi(d, 0.0)
        with pytest.raises(DomainError):
            SinrDistribution(0.0, (), 1.0)
        with pytest.raises(DomainError):
            SinrDistribution(1.0, (), 0.0)
        with pytest.raises(DomainError):
            SinrDistribution(1.0, (-0.1,), 1.0)

    def test_median_bisects(self):
        d = SinrDistribution(3.0, (0.4,), 0.7)
        assert cdf_cqi(d, d.median()) == pytest.approx(0.5, abs=1e-12)


class TestMonteCarloOracles:
    def test_all_links_faded_matches_product_form(self):
        # with every link exponentially faded, the model CDF is exact
        rng = np.random.default_rng(100)
        p_hat, powers, noise = 2.0, np.array([0.8, 0.3, 0.1]), 0.2
        n = 200_000
        sig = p_hat * rng.standard_exponential(n)
        interf = rng.standard_exponential((n, 3)) @ powers
        samples = sig / (interf + noise)
        d = SinrDistribution(p_hat, tuple(powers), noise)
        assert ks_distance(samples, d) < 0.005

    def test_constant_interference_matches_residual_folding(self):
        # serving fade only: interference acts as constant extra noise, which
        # is the degenerate (no individually modelled interferer) instance
        rng = np.random.default_rng(101)
        p_hat, powers, noise = 2.0, np.array([0.8, 0.3, 0.1]), 0.2
        n = 200_000
        samples = p_hat * rng.standard_exponential(n) / (powers.sum() + noise)
        folded = SinrDistribution(p_hat, (), noise + powers.sum())
        assert ks_distance(samples, folded) < 0.005

    def test_constant_interference_vs_product_form_gap(self):
        # quantifies the modelling difference between the two assumptions:
        # folding fades into constants dominates the product form everywhere
        # (strictness checked on the survival side, which does not saturate)
        p_hat, powers, noise = 2.0, (0.8, 0.3, 0.1), 0.2
        folded = SinrDistribution(p_hat, (), noise + sum(powers))
        product = SinrDistribution(p_hat, powers, noise)
        phis = np.logspace(-3, 3, 400)
        assert np.all(survival_cqi(folded, phis) < survival_cqi(product, phis))


class TestResidualNoise:
    def test_partial_report(self):
        assert residual_noise([4.0, 2.0, 1.0], [0, 1], 0.5) == pytest.approx(1.5)

    def test_full_report(self):
        assert residual_noise([4.0, 2.0, 1.0], [0, 1, 2], 0.5) == pytest.approx(0.5)

    def test_no_report(self):
        assert residual_noise([4.0, 2.0, 1.0], [], 0.5) == pytest.approx(7.5)

    def test_bad_index(self):
        with pytest.raises(InconsistencyError):
            residual_noise([4.0], [3], 0.5)


class TestDominance:
    def test_partial_information_dominates_pointwise(self):
        rng = np.random.default_rng(102)
        phis = np.logspace(-3, 3, 500)
        for _ in range(300):
            n_int = int(rng.integers(1, 9))
            powers = 10 ** rng.uniform(-3, 0, n_int)
            noise = 10 ** rng.uniform(-4, -2)
            keep = int(rng.integers(0, n_int))
            full = SinrDistribution(1.0, tuple(powers), noise)
            part = SinrDistribution(1.0, tuple(powers[:keep]), noise + powers[keep:].sum())
            assert np.all(survival_cqi(part, phis) < survival_cqi(full, phis))

    def test_equal_when_everything_reported(self):
        powers = (0.9, 0.4, 0.2)
        a = SinrDistribution(1.3, powers, 0.05)
        b = SinrDistribution(1.3, powers, 0.05)
        phis = np.logspace(-3, 3, 200)
        assert np.array_equal(cdf_cqi(a, phis), cdf_cqi(b, phis))

    def test_extra_interference_or_noise_degrades(self):
        base = SinrDistribution(1.0, (0.5,), 0.1)
        more_int = SinrDistribution(1.0, (0.5, 0.3), 0.1)
        more_noise = SinrDistribution(1.0, (0.5,), 0.2)
        phis = np.logspace(-2, 2, 200)
        assert np.all(survival_cqi(more_int, phis) < survival_cqi(base, phis))
        assert np.all(survival_cqi(more_noise, phis) < survival_cqi(base, phis))
