"""Experiment configuration: declarative key-value files with explicit units.

Keys carry their unit in the name (tx_power_dbm, bandwidth_hz, ...); every
dB/dBm quantity is converted to linear exactly once, when the config object is
constructed. Sweep axes (users, s_max, i_max, epsilon_cv) take comma-separated
lists; s_max accepts "inf" for unconstrained multiplexing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Tuple, Union

from .errors import ConfigError

__all__ = ["ExperimentConfig", "load_config", "parse_config_text", "db_to_linear", "dbm_to_watt"]


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def dbm_to_watt(value_dbm: float) -> float:
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


SMax = Union[int, float]  # int >= 1, or math.inf


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment description; defaults reproduce the reference setup
    (500 m hexagonal grid, 10 MHz @ 2 GHz, 46 dBm, 15 dBi, -174 dBm/Hz noise
    density, 5 dB noise figure, 10 ms frames, averaging window 1000)."""

    users: Tuple[int, ...] = (10,)
    s_max: Tuple[SMax, ...] = (2,)
    i_max: Tuple[int, ...] = (8,)
    epsilon_cv: Tuple[float, ...] = (0.0,)
    drops: int = 2
    warmup_frames: int = 2000
    measured_frames: int = 10000
    seed: int = 1

    bandwidth_hz: float = 10e6
    carrier_ghz: float = 2.0
    tx_power_dbm: float = 46.0
    antenna_gain_dbi: float = 15.0
    noise_density_dbm_hz: float = -174.0
    noise_figure_db: float = 5.0
    pf_window: float = 1000.0
    frame_duration_ms: float = 10.0
    inter_site_distance_m: float = 500.0
    min_link_distance_m: float = 35.0
    shadowing_std_db: float = 8.0
    # share of shadowing variance common to all links of a user (3GPP-style
    # inter-site correlation); 0 makes every link independent
    shadowing_site_corr: float = 0.5
    pathloss_offset_db: float = 128.1
    pathloss_slope_db: float = 37.6
    fading: str = "full"
    estimator_tol: float = 1e-4
    estimator_max_iter: int = 200

    # linear-domain quantities, derived exactly once
    tx_power_w: float = field(init=False)
    noise_w: float = field(init=False)
    antenna_gain_lin: float = field(init=False)

    def __post_init__(self):
        if self.fading not in ("full", "serving-only"):
            raise ConfigError(f"fading must be 'full' or 'serving-only', got {self.fading!r}")
        for name in ("bandwidth_hz", "pf_window", "inter_site_distance_m",
                     "min_link_distance_m", "frame_duration_ms"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("drops", "warmup_frames", "measured_frames"):
            if getattr(self, name) < 0 or (name == "drops" and self.drops < 1):
                raise ConfigError(f"{name} out of range")
        if not self.users or any(u < 1 for u in self.users):
            raise ConfigError("users must be a non-empty list of counts >= 1")
        for s in self.s_max:
            if s != math.inf and (int(s) != s or s < 1):
                raise ConfigError(f"s_max entries must be integers >= 1 or inf, got {s}")
        if any(i < 0 for i in self.i_max):
            raise ConfigError("i_max entries must be >= 0")
        if any(e < 0 for e in self.epsilon_cv):
            raise ConfigError("epsilon_cv entries must be >= 0")
        if not 0.0 <= self.shadowing_site_corr <= 1.0:
            raise ConfigError("shadowing_site_corr must lie in [0, 1]")
        object.__setattr__(self, "tx_power_w", dbm_to_watt(self.tx_power_dbm))
        object.__setattr__(
            self, "noise_w",
            dbm_to_watt(self.noise_density_dbm_hz) * self.bandwidth_hz * db_to_linear(self.noise_figure_db),
        )
        object.__setattr__(self, "antenna_gain_lin", db_to_linear(self.antenna_gain_dbi))

    @property
    def total_frames(self) -> int:
        return self.warmup_frames + self.measured_frames

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ["inf" if v == math.inf else v for v in value]
            out[f.name] = value
        return out


_LIST_KEYS = {"users", "s_max", "i_max", "epsilon_cv"}
_INT_KEYS = {"drops", "warmup_frames", "measured_frames", "seed", "estimator_max_iter"}
_STR_KEYS = {"fading"}


def _parse_scalar(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _STR_KEYS:
            return raw
        if key in _INT_KEYS:
            return int(raw)
        if key == "users":
            return int(raw)
        if key == "i_max":
            return int(raw)
        if key == "s_max":
            return math.inf if raw.lower() in ("inf", "infinity") else int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"invalid value for key '{key}': {raw!r}") from None


def parse_config_text(text: str) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig) if f.init}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in known:
            raise ConfigError(f"unknown key '{key}' (line {lineno})")
        if key in _LIST_KEYS:
            values[key] = tuple(_parse_scalar(key, item) for item in raw.split(","))
        else:
            values[key] = _parse_scalar(key, raw)
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())
