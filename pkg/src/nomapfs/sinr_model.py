"""Stochastic CQI distributions for the multi-cell downlink.

With the serving link Rayleigh-faded (unit-mean exponential power gain) and
every interfering link independently Rayleigh-faded around its mean received
power p_i, the full-power SINR Phi = p_hat*E0 / (sum_i p_i*E_i + sigma) has
the closed form

    F(phi)  = 1 - exp(-sigma/p_hat * phi) * prod_i (p_i*phi/p_hat + 1)^-1
    f(phi)  = (sigma/p_hat + sum_i p_i/(p_i*phi + p_hat)) * (1 - F(phi))

The same functional form doubles as the partial-information model: interferers
that a terminal does not report are folded into the residual noise term as
constant power, which pointwise increases F (the modelled CQI is
stochastically smaller than the true one).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InconsistencyError

__all__ = ["SinrDistribution", "cdf_cqi", "pdf_cqi", "survival_cqi", "residual_noise"]


@dataclass(frozen=True)
class SinrDistribution:
    """Parameters of one user's CQI distribution.

    serving_power: mean received power of the serving link at full transmit
    power (W). interferer_powers: mean received powers of the individually
    modelled interferers (W). residual_noise: constant-power remainder, i.e.
    thermal noise plus any interference not modelled individually (W).
    """

    serving_power: float
    interferer_powers: tuple = field(default=())
    residual_noise: float = 0.0

    def __post_init__(self):
        powers = tuple(float(p) for p in self.interferer_powers)
        object.__setattr__(self, "interferer_powers", powers)
        object.__setattr__(self, "serving_power", float(self.serving_power))
        object.__setattr__(self, "residual_noise", float(self.residual_noise))
        if not self.serving_power > 0.0:
            raise DomainError(f"serving_power must be positive, got {self.serving_power}")
        if not self.residual_noise > 0.0:
            raise DomainError(f"residual_noise must be positive, got {self.residual_noise}")
        if any(p < 0.0 for p in powers):
            raise DomainError("interferer powers must be non-negative")

    def cdf(self, phi):
        return cdf_cqi(self, phi)

    def pdf(self, phi):
        return pdf_cqi(self, phi)

    def median(self) -> float:
        """CQI value with F = 1/2, found by bisection."""
        lo, hi = 0.0, 1.0
        for _ in range(200):
            if cdf_cqi(self, hi) > 0.5:
                break
            hi *= 4.0
        else:
            raise DomainError("median search failed to bracket")
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if cdf_cqi(self, mid) < 0.5:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def _check_phi(phi):
    arr = np.asarray(phi, dtype=float)
    if np.any(arr <= 0.0):
        raise DomainError("phi must be positive")
    return arr


def survival_cqi(dist: SinrDistribution, phi):
    """P{Phi >= phi}, computed multiplicatively (no cancellation near 1)."""
    arr = _check_phi(phi)
    surv = np.exp(-dist.residual_noise / dist.serving_power * arr)
    for p in dist.interferer_powers:
        if p > 0.0:
            surv = surv / (p * arr / dist.serving_power + 1.0)
    return surv if arr.ndim else float(surv)


def cdf_cqi(dist: SinrDistribution, phi):
    """CQI distribution function; accepts scalars or arrays of positive phi."""
    out = 1.0 - survival_cqi(dist, phi)
    return out if np.asarray(phi).ndim else float(out)


def pdf_cqi(dist: SinrDistribution, phi):
    """CQI density; accepts scalars or arrays of positive phi."""
    arr = _check_phi(phi)
    hazard = np.full_like(arr, dist.residual_noise / dist.serving_power)
    for p in dist.interferer_powers:
        if p > 0.0:
            hazard = hazard + p / (p * arr + dist.serving_power)
    out = hazard * survival_cqi(dist, arr)
    return out if arr.ndim else float(out)


def residual_noise(all_interferer_powers: Sequence[float], reported_set: Sequence[int], thermal_noise: float) -> float:
    """Constant-power remainder: unreported interferer means plus thermal noise."""
    powers = [float(p) for p in all_interferer_powers]
    reported = set(int(i) for i in reported_set)
    for i in reported:
        if i < 0 or i >= len(powers):
            raise InconsistencyError(f"reported interferer index {i} out of range")
    leftover = sum(p for i, p in enumerate(powers) if i not in reported)
    return leftover + float(thermal_noise)
