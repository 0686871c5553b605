"""Aggregation of simulated and estimated rates into reported metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidParameterError

__all__ = ["ThroughputSummary", "EmpiricalCdf", "cell_edge_throughput", "relative_deviation", "deviation_cdf"]


@dataclass(frozen=True)
class ThroughputSummary:
    """Overall and cell-edge throughput plus the sorted per-user rates."""

    overall: float
    cell_edge: float
    per_user: np.ndarray

    @classmethod
    def from_rates(cls, rates) -> "ThroughputSummary":
        arr = np.sort(np.asarray(rates, dtype=float))
        return cls(overall=float(arr.sum()), cell_edge=cell_edge_throughput(arr), per_user=arr)


def cell_edge_throughput(per_user_rates) -> float:
    """Mean rate of the lowest 5% of users (at least one user)."""
    arr = np.sort(np.asarray(per_user_rates, dtype=float))
    if arr.size == 0:
        raise InvalidParameterError("empty rate list")
    k = max(1, math.ceil(0.05 * arr.size))
    return float(arr[:k].mean())


def relative_deviation(estimate: float, truth: float) -> float:
    """(estimate - truth) / truth."""
    if not truth > 0.0:
        raise DomainError(f"truth must be positive, got {truth}")
    return (estimate - truth) / truth


@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous empirical distribution of deviation samples."""

    samples: np.ndarray

    def __post_init__(self):
        arr = np.sort(np.asarray(self.samples, dtype=float))
        if arr.size == 0:
            raise InvalidParameterError("empty sample list")
        object.__setattr__(self, "samples", arr)

    def cdf(self, x: float) -> float:
        return float(np.searchsorted(self.samples, x, side="right")) / self.samples.size

    def quantile(self, p: float) -> float:
        if not 0.0 < p <= 1.0:
            raise InvalidParameterError(f"quantile level must be in (0,1], got {p}")
        idx = max(0, math.ceil(p * self.samples.size) - 1)
        return float(self.samples[idx])

    def fraction_within(self, bound: float) -> float:
        """Share of samples with |x| <= bound."""
        return float(np.mean(np.abs(self.samples) <= bound))

    @property
    def table(self) -> np.ndarray:
        """(value, cumulative probability) rows."""
        probs = np.arange(1, self.samples.size + 1) / self.samples.size
        return np.column_stack([self.samples, probs])


def deviation_cdf(samples) -> EmpiricalCdf:
    """Empirical CDF of per-user relative deviations."""
    return EmpiricalCdf(np.asarray(samples, dtype=float))
