"""System-level Monte-Carlo engine: geometry, propagation, measurement, and
the per-frame scheduling loop.

A drop freezes user positions and shadowing, then simulates frames: draw
Rayleigh fades, form each user's full-power SINR against the 36 interfering
sites, run the configured scheduler, convert power slices to Shannon rates,
and update the proportional-fair averages. Every random quantity is drawn
from a per-user substream derived from (drop seed, purpose tag, user index),
so results are a pure function of (config, seed) and the first k users of a
drop are identical no matter how many users the drop holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels, stats
from .config import ExperimentConfig
from .errors import InvalidParameterError
from .sinr_model import SinrDistribution

__all__ = [
    "NetworkLayout",
    "LinkBudget",
    "MeasurementReport",
    "DropScenario",
    "DropResult",
    "build_layout",
    "drop_users",
    "link_gain",
    "realize_cqi",
    "measure_and_report",
    "prepare_drop",
    "simulate",
    "run_drop",
]

N_SITES = 37
N_INTERFERERS = N_SITES - 1

# substream purpose tags mixed into the seed material
_TAG_PREP = 1
_TAG_FADING = 2
_TAG_MEAS = 3
_TAG_PFINIT = 4

_FRAME_BLOCK = 1024


def _rng(*entropy) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(tuple(int(e) for e in entropy)))


@dataclass(frozen=True)
class NetworkLayout:
    """Hexagonal-grid deployment: measured site at the origin plus three full
    rings of interferers (37 sites total)."""

    site_xy: np.ndarray
    inter_site_distance: float
    min_link_distance: float

    @property
    def cell_radius(self) -> float:
        # circumradius of the central site's hexagonal cell
        return self.inter_site_distance / math.sqrt(3.0)


def build_layout(config: Optional[ExperimentConfig] = None, *,
                 inter_site_distance: float = 500.0,
                 min_link_distance: float = 35.0) -> NetworkLayout:
    """37-site hexagonal grid; site 0 sits at the origin."""
    if config is not None:
        inter_site_distance = config.inter_site_distance_m
        min_link_distance = config.min_link_distance_m
    d = float(inter_site_distance)
    a1 = np.array([d, 0.0])
    a2 = np.array([0.5 * d, 0.5 * math.sqrt(3.0) * d])
    sites = []
    for q in range(-3, 4):
        for r in range(-3, 4):
            if max(abs(q), abs(r), abs(q + r)) <= 3:
                sites.append(q * a1 + r * a2)
    xy = np.array(sites)
    # origin first, then by distance/angle for a reproducible ordering
    order = np.lexsort((np.arctan2(xy[:, 1], xy[:, 0]), np.round(np.hypot(xy[:, 0], xy[:, 1]), 6)))
    xy = xy[order]
    assert xy.shape == (N_SITES, 2) and np.hypot(*xy[0]) < 1e-9
    return NetworkLayout(site_xy=xy, inter_site_distance=d, min_link_distance=float(min_link_distance))


def drop_users(layout: NetworkLayout, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform positions in the central hexagonal cell, at least the minimum
    link distance away from the serving site. Returns (count, 2) metres."""
    if count < 1:
        raise InvalidParameterError(f"count must be >= 1, got {count}")
    neighbours = layout.site_xy[1:7]  # the six sites at one grid step
    radius = layout.cell_radius
    out = np.empty((count, 2))
    filled = 0
    while filled < count:
        pts = rng.uniform(-radius, radius, size=(4 * (count - filled) + 8, 2))
        d0 = np.hypot(pts[:, 0], pts[:, 1])
        ok = d0 >= layout.min_link_distance
        for nb in neighbours:
            ok &= d0 < np.hypot(pts[:, 0] - nb[0], pts[:, 1] - nb[1])
        good = pts[ok]
        take = min(good.shape[0], count - filled)
        out[filled: filled + take] = good[:take]
        filled += take
    return out


def link_gain(distance_m: float, shadowing_db: float, config: ExperimentConfig) -> float:
    """Linear channel gain: antenna gain minus 128.1+37.6*log10(d_km) path
    loss, plus the log-normal shadowing draw (all in dB)."""
    pl_db = config.pathloss_offset_db + config.pathloss_slope_db * math.log10(distance_m / 1000.0)
    return 10.0 ** ((config.antenna_gain_dbi - pl_db + shadowing_db) / 10.0)


@dataclass(frozen=True)
class LinkBudget:
    """Long-term gain of one link; mean received power is gain * tx power."""

    gain: float

    def mean_rx_power(self, tx_power_w: float) -> float:
        return self.gain * tx_power_w


@dataclass(frozen=True)
class MeasurementReport:
    """Per-user measurement: serving RSRP, the strongest interferer RSRPs (up
    to the reporting cap), and the constant residual of everything else."""

    serving_rsrp: float
    reported_irsrp: tuple
    residual: float
    cv: float
    reported_indices: tuple

    def to_distribution(self) -> SinrDistribution:
        return SinrDistribution(
            serving_power=self.serving_rsrp,
            interferer_powers=self.reported_irsrp,
            residual_noise=self.residual,
        )


def _erlang_factors(epsilon: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-mean Erlang measurement factors with coefficient of variation
    <= epsilon (shape rounded up to the next integer)."""
    if epsilon == 0.0:
        return np.ones(size)
    shape = math.ceil(1.0 / epsilon ** 2)
    return rng.gamma(shape, 1.0 / shape, size=size)


def measure_and_report(serving_mean_w: float, interferer_means_w: Sequence[float],
                       i_max: int, epsilon: float, rng: np.random.Generator,
                       noise_w: float) -> MeasurementReport:
    """Select the i_max largest interferer means, apply measurement noise to
    every reported value, and fold the rest plus thermal noise into the
    residual (computed from the true means)."""
    if i_max < 0:
        raise InvalidParameterError(f"i_max must be >= 0, got {i_max}")
    if epsilon < 0:
        raise InvalidParameterError(f"epsilon must be >= 0, got {epsilon}")
    means = np.asarray(interferer_means_w, dtype=float)
    order = np.argsort(-means, kind="stable")
    reported = order[: min(i_max, means.size)]
    factors = _erlang_factors(epsilon, reported.size + 1, rng)
    residual = float(means.sum() - means[reported].sum() + noise_w)
    achieved_cv = 0.0 if epsilon == 0.0 else 1.0 / math.sqrt(math.ceil(1.0 / epsilon ** 2))
    return MeasurementReport(
        serving_rsrp=float(serving_mean_w * factors[0]),
        reported_irsrp=tuple((means[reported] * factors[1:]).tolist()),
        residual=residual,
        cv=achieved_cv,
        reported_indices=tuple(int(i) for i in reported),
    )


@dataclass(frozen=True)
class DropScenario:
    """One frozen placement: positions, link gains, and the drop seed."""

    config: ExperimentConfig
    layout: NetworkLayout
    seed: int
    positions: np.ndarray        # (U, 2)
    serving_gain: np.ndarray     # (U,)
    interferer_gain: np.ndarray  # (U, 36)

    @property
    def n_users(self) -> int:
        return self.positions.shape[0]

    @property
    def serving_mean_w(self) -> np.ndarray:
        return self.serving_gain * self.config.tx_power_w

    @property
    def interferer_means_w(self) -> np.ndarray:
        return self.interferer_gain * self.config.tx_power_w

    def subset(self, n: int) -> "DropScenario":
        """First n users; identical to preparing the drop with n users."""
        if not 1 <= n <= self.n_users:
            raise InvalidParameterError(f"subset size {n} out of range")
        return DropScenario(
            config=self.config, layout=self.layout, seed=self.seed,
            positions=self.positions[:n], serving_gain=self.serving_gain[:n],
            interferer_gain=self.interferer_gain[:n],
        )

    def reports(self, i_max: int, epsilon: float) -> list:
        eps_key = int(round(epsilon * 1e9))
        out = []
        for u in range(self.n_users):
            rng = _rng(self.seed, _TAG_MEAS, u, i_max, eps_key)
            out.append(
                measure_and_report(
                    float(self.serving_mean_w[u]), self.interferer_means_w[u],
                    i_max, epsilon, rng, self.config.noise_w,
                )
            )
        return out

    def estimated_distributions(self, i_max: int, epsilon: float) -> list:
        return [rep.to_distribution() for rep in self.reports(i_max, epsilon)]

    def true_distributions(self) -> list:
        """Full-information distributions: every interferer modelled."""
        return [
            SinrDistribution(
                serving_power=float(self.serving_mean_w[u]),
                interferer_powers=tuple(self.interferer_means_w[u].tolist()),
                residual_noise=self.config.noise_w,
            )
            for u in range(self.n_users)
        ]


def prepare_drop(config: ExperimentConfig, seed: int, n_users: int) -> DropScenario:
    """Draw positions and shadowing for one drop; user k's draws depend only
    on (seed, k), never on n_users."""
    layout = build_layout(config)
    positions = np.empty((n_users, 2))
    serving_gain = np.empty(n_users)
    interferer_gain = np.empty((n_users, N_INTERFERERS))
    corr = config.shadowing_site_corr
    for u in range(n_users):
        rng = _rng(seed, _TAG_PREP, u)
        pos = drop_users(layout, 1, rng)[0]
        # shadowing splits into a component common to the user's links plus
        # per-link independent parts (inter-site correlation = corr)
        common = rng.normal(0.0, config.shadowing_std_db)
        link = rng.normal(0.0, config.shadowing_std_db, size=N_SITES)
        shadow = math.sqrt(corr) * common + math.sqrt(1.0 - corr) * link
        positions[u] = pos
        dists = np.hypot(layout.site_xy[:, 0] - pos[0], layout.site_xy[:, 1] - pos[1])
        gains = [link_gain(dists[s], shadow[s], config) for s in range(N_SITES)]
        serving_gain[u] = gains[0]
        interferer_gain[u] = gains[1:]
    return DropScenario(config=config, layout=layout, seed=int(seed), positions=positions,
                        serving_gain=serving_gain, interferer_gain=interferer_gain)


def realize_cqi(serving_gain, interferer_gain, tx_power_w: float, noise_w: float,
                rng: np.random.Generator, *, fading: str = "full", n_frames: int = 1) -> np.ndarray:
    """Full-power SINR draws: serving link exponentially faded; interfering
    links likewise in "full" mode, held at their means in "serving-only"
    mode. Returns (n_frames, U)."""
    serving_gain = np.atleast_1d(np.asarray(serving_gain, dtype=float))
    interferer_gain = np.asarray(interferer_gain, dtype=float)
    if interferer_gain.ndim == 1:
        interferer_gain = interferer_gain[None, :] if serving_gain.size == 1 else interferer_gain[:, None]
    n_users = serving_gain.size
    serving_mean = serving_gain * tx_power_w
    interferer_means = interferer_gain * tx_power_w
    fades = rng.standard_exponential(size=(n_frames, n_users, interferer_means.shape[1] + 1))
    signal = serving_mean[None, :] * fades[:, :, 0]
    if fading == "full":
        interference = np.einsum("fui,ui->fu", fades[:, :, 1:], interferer_means)
    elif fading == "serving-only":
        interference = np.broadcast_to(interferer_means.sum(axis=1)[None, :], signal.shape)
    else:
        raise InvalidParameterError(f"unknown fading mode {fading!r}")
    return signal / (interference + noise_w)


@dataclass(frozen=True)
class DropResult:
    """Time-averaged outcome of one simulated drop."""

    users: int
    s_max: object
    seed: int
    mean_rates: np.ndarray       # per-user average over the measured window
    overall: float
    cell_edge: float
    pf_trace: np.ndarray         # achieved metric per frame (incl. warm-up)
    ladder: Optional[np.ndarray]  # per-frame best metric at caps (inf,3,2,1)
    avg_rate_cv: np.ndarray      # per-user CV of the averaged-rate trace
    max_theta_evals: int
    max_lambda_err: float
    warmup_frames: int

    @property
    def summary(self) -> stats.ThroughputSummary:
        return stats.ThroughputSummary.from_rates(self.mean_rates)


def _mode_of(s_max) -> int:
    if s_max == math.inf or s_max is None:
        return 0
    if int(s_max) != s_max or s_max < 1:
        raise InvalidParameterError(f"s_max must be a positive integer or inf, got {s_max}")
    return int(s_max)


def simulate(scenario: DropScenario, s_max, *, record_ladder: bool = False) -> DropResult:
    """Run the frame loop of one drop under the given multiplexing cap
    (inf or None for unconstrained)."""
    cfg = scenario.config
    mode = _mode_of(s_max)
    n_users = scenario.n_users
    n_frames = cfg.total_frames
    warmup = cfg.warmup_frames

    floor = 1e-6 * cfg.bandwidth_hz / n_users
    avg_rate = np.empty(n_users)
    for u in range(n_users):
        init_rng = _rng(scenario.seed, _TAG_PFINIT, u)
        avg_rate[u] = init_rng.uniform(0.5, 1.5) * cfg.bandwidth_hz / n_users

    serving_mean = scenario.serving_mean_w
    interferer_means = scenario.interferer_means_w
    static_interference = interferer_means.sum(axis=1)
    fading_rngs = [_rng(scenario.seed, _TAG_FADING, u) for u in range(n_users)]

    rates = np.zeros((n_frames, n_users))
    state = np.empty((n_frames, n_users))
    metric = np.empty(n_frames)
    ladder = np.empty((n_frames, 4)) if record_ladder else None
    ladder_block = ladder if record_ladder else np.empty((0, 4))

    max_evals = 0
    max_lambda_err = 0.0
    phis = np.empty((_FRAME_BLOCK, n_users))
    for start in range(0, n_frames, _FRAME_BLOCK):
        stop = min(start + _FRAME_BLOCK, n_frames)
        blk = stop - start
        for u in range(n_users):
            fades = fading_rngs[u].standard_exponential(size=(blk, N_INTERFERERS + 1))
            signal = serving_mean[u] * fades[:, 0]
            if cfg.fading == "full":
                interference = fades[:, 1:] @ interferer_means[u]
            else:
                interference = static_interference[u]
            phis[:blk, u] = signal / (interference + cfg.noise_w)
        out_ladder = ladder_block[start:stop] if record_ladder else ladder_block
        evals, lam_err = kernels.run_frames(
            phis[:blk], avg_rate, cfg.pf_window, floor, cfg.bandwidth_hz, mode,
            record_ladder, rates[start:stop], metric[start:stop], out_ladder,
            state[start:stop],
        )
        max_evals = max(max_evals, int(evals))
        max_lambda_err = max(max_lambda_err, float(lam_err))

    measured = rates[warmup:]
    mean_rates = measured.mean(axis=0)
    trace = state[warmup:]
    avg_rate_cv = trace.std(axis=0) / trace.mean(axis=0)
    return DropResult(
        users=n_users,
        s_max=s_max,
        seed=scenario.seed,
        mean_rates=mean_rates,
        overall=float(mean_rates.sum()),
        cell_edge=stats.cell_edge_throughput(mean_rates),
        pf_trace=metric,
        ladder=ladder,
        avg_rate_cv=avg_rate_cv,
        max_theta_evals=max_evals,
        max_lambda_err=max_lambda_err,
        warmup_frames=warmup,
    )


def run_drop(config: ExperimentConfig, seed: int, *, users: Optional[int] = None,
             s_max=None, record_ladder: bool = False) -> DropResult:
    """Prepare and simulate one drop; users and s_max default to the first
    entry of the respective config sweep axis."""
    n_users = users if users is not None else config.users[0]
    cap = s_max if s_max is not None else config.s_max[0]
    scenario = prepare_drop(config, seed, n_users)
    return simulate(scenario, cap, record_ladder=record_ladder)
