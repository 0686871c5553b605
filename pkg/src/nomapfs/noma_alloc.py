"""Optimal power allocation and user selection for power-domain multiplexing.

Core objects: the gain curve pi_u(x) = phi_u / (R_u (1 + x phi_u)) describing
how much metric a user contributes per unit of cumulative power ratio x, the
crossing point theta of two such curves, and the greedy walk along the upper
envelope that yields the metric-maximising scheduled sequence and cumulative
power ratios. A subset search on top of the same walk handles receivers that
can only cancel a bounded number of superposed signals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from . import kernels
from .errors import DegeneratePairError, DomainError, InconsistencyError, InvalidParameterError
from .pfs_core import UserState

__all__ = [
    "CqiSample",
    "Allocation",
    "PairCase",
    "PairRelation",
    "coefficient_fn",
    "crossing_theta",
    "classify_pair",
    "optimal_schedule_ideal",
    "optimal_schedule_practical",
    "post_sic_sinr",
    "rates_from_allocation",
    "pf_weight_of_allocation",
]

LN2 = math.log(2.0)


@dataclass(frozen=True)
class CqiSample:
    """One frame's realised channel quality: linear SINR at full transmit power."""

    user_id: int
    cqi: float

    def __post_init__(self):
        if not (self.cqi > 0.0 and math.isfinite(self.cqi)):
            raise DomainError(f"cqi must be positive and finite, got {self.cqi!r}")


class PairCase(Enum):
    CASE1 = "case1"  # curves cross inside (0,1)
    CASE2 = "case2"  # higher-CQI member below the other on all of (0,1)
    CASE3 = "case3"  # higher-CQI member above the other on all of (0,1)
    EQUAL_CQI = "equal_cqi"


@dataclass(frozen=True)
class PairRelation:
    """Relation between the gain curves of two users.

    theta is set only for CASE1 and lies strictly inside (0,1). Cases are
    stated for the higher-CQI member of the pair: CASE2 means it is dominated
    everywhere, CASE3 that it dominates everywhere. For EQUAL_CQI the member
    with the smaller averaged rate dominates.
    """

    case_id: PairCase
    theta: Optional[float] = None

    def __post_init__(self):
        if (self.theta is not None) != (self.case_id is PairCase.CASE1):
            raise InconsistencyError("theta must be present exactly for CASE1")
        if self.theta is not None and not (0.0 < self.theta < 1.0):
            raise InconsistencyError(f"theta must lie in (0,1), got {self.theta}")


@dataclass(frozen=True)
class Allocation:
    """A scheduled user sequence with its cumulative power ratios.

    sequence lists user ids in decoding order (descending CQI); cprs has one
    more entry, starting at 0 and ending at 1, strictly increasing; the
    per-user power ratios are the consecutive differences and sum to 1.
    theta_evals is instrumentation: how many crossing-point evaluations the
    producing search spent.
    """

    sequence: tuple
    cprs: np.ndarray
    power_ratios: np.ndarray
    theta_evals: int = field(default=0, compare=False)

    def __post_init__(self):
        seq = tuple(int(u) for u in self.sequence)
        cprs = np.asarray(self.cprs, dtype=float)
        object.__setattr__(self, "sequence", seq)
        object.__setattr__(self, "cprs", cprs)
        if len(seq) == 0:
            raise InconsistencyError("empty allocation")
        if len(set(seq)) != len(seq):
            raise InconsistencyError("duplicate user in scheduled sequence")
        if cprs.shape != (len(seq) + 1,):
            raise InconsistencyError("cprs must have one more entry than the sequence")
        if cprs[0] != 0.0 or cprs[-1] != 1.0:
            raise InconsistencyError("cumulative power ratios must start at 0 and end at 1")
        if np.any(np.diff(cprs) <= 0.0):
            raise InconsistencyError("cumulative power ratios must be strictly increasing")
        ratios = np.diff(cprs)
        object.__setattr__(self, "power_ratios", ratios)

    @property
    def n_scheduled(self) -> int:
        return len(self.sequence)

    def ratio_of(self, user_id: int) -> float:
        return float(self.power_ratios[self.sequence.index(user_id)])


def coefficient_fn(cqi: float, avg_rate: float, x: float) -> float:
    """Gain curve value phi / (R (1 + x phi)); strictly decreasing in x."""
    if not cqi > 0.0:
        raise DomainError(f"cqi must be positive, got {cqi}")
    if not avg_rate > 0.0:
        raise DomainError(f"avg_rate must be positive, got {avg_rate}")
    if not 0.0 < x < 1.0:
        raise DomainError(f"x must lie in (0,1), got {x}")
    return cqi / (avg_rate * (1.0 + x * cqi))


def crossing_theta(u: Sequence[float], v: Sequence[float]) -> float:
    """Crossing point of two gain curves: (R_u/phi_u - R_v/phi_v)/(R_v - R_u).

    u and v are (cqi, avg_rate) pairs. Symmetric in argument order; the caller
    is responsible for checking membership in (0,1). Equal averaged rates have
    no finite crossing.
    """
    phi_u, r_u = float(u[0]), float(u[1])
    phi_v, r_v = float(v[0]), float(v[1])
    for phi, r in ((phi_u, r_u), (phi_v, r_v)):
        if not (phi > 0.0 and r > 0.0):
            raise DomainError("cqi and avg_rate must be positive")
    if r_u == r_v:
        raise DegeneratePairError("equal averaged rates: the gain curves do not cross")
    return (r_u / phi_u - r_v / phi_v) / (r_v - r_u)


def classify_pair(u: Sequence[float], v: Sequence[float]) -> PairRelation:
    """Classify the dominance relation of two users' gain curves on (0,1).

    Arguments are (cqi, avg_rate) pairs; internally the higher-CQI member
    plays the role of u. With rate ratio q = R_v/R_u (v the lower-CQI member):
      * q <= phi_v/phi_u          -> CASE2, u below v everywhere,
      * q >= (1+1/phi_u)/(1+1/phi_v) -> CASE3, u above v everywhere,
      * otherwise                 -> CASE1 with theta inside (0,1).
    CQIs equal within 1e-12 relative return EQUAL_CQI.
    """
    phi_u, r_u = float(u[0]), float(u[1])
    phi_v, r_v = float(v[0]), float(v[1])
    for phi, r in ((phi_u, r_u), (phi_v, r_v)):
        if not (phi > 0.0 and r > 0.0):
            raise DomainError("cqi and avg_rate must be positive")

    if abs(phi_u - phi_v) <= kernels.REL_EQ * max(phi_u, phi_v):
        return PairRelation(PairCase.EQUAL_CQI)
    if phi_u < phi_v:
        phi_u, phi_v = phi_v, phi_u
        r_u, r_v = r_v, r_u

    q = r_v / r_u
    if q <= phi_v / phi_u:
        return PairRelation(PairCase.CASE2)
    if q >= (1.0 + 1.0 / phi_u) / (1.0 + 1.0 / phi_v):
        return PairRelation(PairCase.CASE3)
    theta = crossing_theta((phi_u, r_u), (phi_v, r_v))
    return PairRelation(PairCase.CASE1, theta=theta)


def _as_arrays(cqis, avg_rates, user_ids):
    phi = np.ascontiguousarray(cqis, dtype=float)
    rate = np.ascontiguousarray(avg_rates, dtype=float)
    if phi.ndim != 1 or phi.shape != rate.shape:
        raise InvalidParameterError("cqis and avg_rates must be 1-d arrays of equal length")
    if phi.size == 0:
        raise InvalidParameterError("empty candidate set")
    if not (np.all(phi > 0.0) & np.all(np.isfinite(phi))):
        raise DomainError("all CQIs must be positive and finite")
    if not np.all(rate > 0.0):
        raise DomainError("all averaged rates must be positive")
    if user_ids is None:
        ids = np.arange(phi.size, dtype=np.int64)
    else:
        ids = np.asarray(user_ids, dtype=np.int64)
        if ids.shape != phi.shape:
            raise InvalidParameterError("user_ids must match cqis in length")
        if len(set(ids.tolist())) != ids.size:
            raise InvalidParameterError("duplicate user ids")
    # deterministic tie-breaking toward the smallest user id
    order = np.argsort(ids, kind="stable")
    return phi[order], rate[order], ids[order]


def optimal_schedule_ideal(cqis, avg_rates, user_ids=None) -> Allocation:
    """Metric-maximising schedule with no limit on the multiplexed user count.

    Implements the envelope walk: start from the argmax of the gain curves at
    x=0 (ties toward the smaller CQI, then smaller user id), then repeatedly
    append the candidate whose crossing with the current curve is nearest, the
    crossings becoming the cumulative power ratios. Spends at most
    U(U+1)/2 crossing evaluations.
    """
    phi, rate, ids = _as_arrays(cqis, avg_rates, user_ids)
    n = phi.size
    seq = np.empty(n, dtype=np.int64)
    alpha = np.empty(n + 1, dtype=np.float64)
    cand = np.arange(n, dtype=np.int64)
    vpos = np.empty(n, dtype=np.int64)
    vtheta = np.empty(n, dtype=np.float64)
    n_sched, evals = kernels.greedy_schedule(phi, rate, cand, n, seq, alpha, vpos, vtheta)
    chosen = seq[:n_sched]
    return Allocation(
        sequence=tuple(ids[chosen].tolist()),
        cprs=alpha[: n_sched + 1].copy(),
        power_ratios=np.diff(alpha[: n_sched + 1]),
        theta_evals=int(evals),
    )


def optimal_schedule_practical(cqis, avg_rates, s_max: int, user_ids=None, bandwidth: float = 1.0) -> Allocation:
    """Metric-maximising schedule multiplexing at most s_max users.

    Exhaustively searches candidate subsets of size <= s_max, solving each by
    the same envelope walk restricted to the subset. With s_max >= the number
    of candidates this coincides with optimal_schedule_ideal; with s_max = 1
    it reduces to classic single-user scheduling, argmax of B log2(1+phi)/R.
    The metric ranking is bandwidth-independent, so bandwidth only needs to be
    supplied when the caller wants comparable metric values.
    """
    if int(s_max) != s_max or s_max < 1:
        raise InvalidParameterError(f"s_max must be an integer >= 1, got {s_max}")
    s_max = int(s_max)
    phi, rate, ids = _as_arrays(cqis, avg_rates, user_ids)
    n = phi.size
    seq = np.empty(n, dtype=np.int64)
    alpha = np.empty(n + 1, dtype=np.float64)
    cand = np.empty(n, dtype=np.int64)
    vpos = np.empty(n, dtype=np.int64)
    vtheta = np.empty(n, dtype=np.float64)
    comb = np.empty(n, dtype=np.int64)
    n_sched, _w, evals = kernels.best_limited_schedule(
        phi, rate, n, s_max, seq, alpha, cand, vpos, vtheta, comb, float(bandwidth)
    )
    chosen = seq[:n_sched]
    return Allocation(
        sequence=tuple(ids[chosen].tolist()),
        cprs=alpha[: n_sched + 1].copy(),
        power_ratios=np.diff(alpha[: n_sched + 1]),
        theta_evals=int(evals),
    )


def _cqi_of(cqis: Mapping[int, float], user: int) -> float:
    try:
        return float(cqis[user])
    except KeyError:
        raise InconsistencyError(f"scheduled user {user} has no CQI") from None


def post_sic_sinr(allocation: Allocation, cqis: Mapping[int, float]) -> dict:
    """Post-cancellation SINR per scheduled user.

    The first user in the sequence decodes free of intra-cell interference:
    gamma = phi * lambda. Later users see the earlier (stronger) users' power
    as residual interference: gamma_n = phi*lambda_n / (phi*sum_{m<n} lambda_m + 1).
    """
    gammas = {}
    cum = 0.0
    for k, user in enumerate(allocation.sequence):
        phi = _cqi_of(cqis, user)
        lam = float(allocation.power_ratios[k])
        if k == 0:
            gammas[user] = phi * lam
        else:
            gammas[user] = phi * lam / (phi * cum + 1.0)
        cum += lam
    return gammas


def rates_from_allocation(allocation: Allocation, cqis: Mapping[int, float], bandwidth: float) -> dict:
    """Shannon rates per user: B log2((1+a_n phi)/(1+a_{n-1} phi)).

    Users present in cqis but not in the schedule get rate 0.
    """
    rates = {user: 0.0 for user in cqis}
    for k, user in enumerate(allocation.sequence):
        phi = _cqi_of(cqis, user)
        lo = float(allocation.cprs[k])
        hi = float(allocation.cprs[k + 1])
        rates[user] = bandwidth * math.log2((1.0 + hi * phi) / (1.0 + lo * phi))
    return rates


def pf_weight_of_allocation(
    allocation: Allocation,
    cqis: Mapping[int, float],
    states: Mapping[int, Union[UserState, float]],
    bandwidth: float,
) -> float:
    """Metric sum_n r_n/R_n of an allocation under the given averaged rates."""
    rates = rates_from_allocation(allocation, cqis, bandwidth)
    total = 0.0
    for user in allocation.sequence:
        if user not in states:
            raise InconsistencyError(f"scheduled user {user} has no tracked state")
        state = states[user]
        avg = state.avg_rate if isinstance(state, UserState) else float(state)
        total += rates[user] / avg
    return total
