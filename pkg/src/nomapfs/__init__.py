"""Proportional-fair scheduling for downlink power-domain NOMA.

Library pieces: optimal power allocation and user selection (noma_alloc),
proportional-fair state (pfs_core), closed-form CQI distributions
(sinr_model), the analytical rate estimator (rate_estimator), the
system-level Monte-Carlo engine (network_sim), result aggregation (stats),
and the experiment CLI (cli / experiment).
"""

__version__ = "0.1.0"

from ._accel import NUMBA_ENABLED, lane_name
from .config import ExperimentConfig, load_config
from .noma_alloc import (Allocation, CqiSample, PairCase, PairRelation, classify_pair,
                         coefficient_fn, crossing_theta, optimal_schedule_ideal,
                         optimal_schedule_practical, pf_weight_of_allocation,
                         post_sic_sinr, rates_from_allocation)
from .pfs_core import UserState, pf_metric, update_average_rate
from .rate_estimator import RateSolution, expected_weight, mean_log_capacity, solve_rates
from .sinr_model import SinrDistribution, cdf_cqi, pdf_cqi, residual_noise
from .stats import ThroughputSummary, cell_edge_throughput, deviation_cdf, relative_deviation

__all__ = [
    "__version__",
    "NUMBA_ENABLED",
    "lane_name",
    "ExperimentConfig",
    "load_config",
    "Allocation",
    "CqiSample",
    "PairCase",
    "PairRelation",
    "classify_pair",
    "coefficient_fn",
    "crossing_theta",
    "optimal_schedule_ideal",
    "optimal_schedule_practical",
    "pf_weight_of_allocation",
    "post_sic_sinr",
    "rates_from_allocation",
    "UserState",
    "pf_metric",
    "update_average_rate",
    "RateSolution",
    "expected_weight",
    "mean_log_capacity",
    "solve_rates",
    "SinrDistribution",
    "cdf_cqi",
    "pdf_cqi",
    "residual_noise",
    "ThroughputSummary",
    "cell_edge_throughput",
    "deviation_cdf",
    "relative_deviation",
]
