"""Proportional-fair state tracking and metric evaluation.

The scheduler keeps one exponentially averaged rate per user,
R(t+1) = (1 - 1/tau) R(t) + r(t)/tau, and ranks candidate allocations by the
frame metric sum_u r_u / R_u.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Union

from .errors import InconsistencyError, InvalidParameterError

__all__ = ["UserState", "update_average_rate", "pf_metric"]


@dataclass(frozen=True)
class UserState:
    """Per-user proportional-fair memory: identity plus averaged rate (bits/s).

    avg_rate must stay strictly positive; the simulator enforces this with a
    small positive floor so never-scheduled users keep a finite metric.
    """

    user_id: int
    avg_rate: float

    def __post_init__(self):
        if not self.avg_rate > 0.0:
            raise InvalidParameterError(
                f"avg_rate must be positive, got {self.avg_rate!r} for user {self.user_id}"
            )


def update_average_rate(state: UserState, inst_rate: float, tau: float, floor: float = 0.0) -> UserState:
    """One averaging step: R' = (1 - 1/tau) R + r/tau, clamped to floor.

    inst_rate is the rate obtained this frame (0 when unscheduled). tau >= 1
    is the averaging window in frames.
    """
    if tau < 1.0:
        raise InvalidParameterError(f"averaging window tau must be >= 1, got {tau}")
    if inst_rate < 0.0:
        raise InvalidParameterError(f"instantaneous rate must be >= 0, got {inst_rate}")
    new_rate = (1.0 - 1.0 / tau) * state.avg_rate + inst_rate / tau
    if new_rate < floor:
        new_rate = floor
    return replace(state, avg_rate=new_rate)


def _avg_rate(value: Union[UserState, float]) -> float:
    return value.avg_rate if isinstance(value, UserState) else float(value)


def pf_metric(rates: Mapping[int, float], states: Mapping[int, Union[UserState, float]]) -> float:
    """Frame metric sum_u r_u/R_u; users with zero rate contribute nothing.

    Raises InconsistencyError when a user with a nonzero rate has no state.
    """
    total = 0.0
    for user, rate in rates.items():
        if rate == 0.0:
            continue
        if user not in states:
            raise InconsistencyError(f"scheduled user {user} has no tracked state")
        total += rate / _avg_rate(states[user])
    return total
