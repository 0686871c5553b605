"""Analytical per-user rate expectation via the scheduling-balance fixed point.

Under stationary proportional-fair operation every user's expected frame
metric contribution E[r_u/R_u] settles at 1. Writing that expectation through
the gain-curve order statistics and substituting first the gain level onto the
CQI axis and then the power coordinate by z = ln(1 + phi*x) gives, per user,

    w_u(r) = B/(ln2 * r_u) * E_phi[ int_0^{log1p(phi)}
                 prod_{v!=u} F_v(phi*rho_v / (1+(e^z-1)(1-rho_v))) dz ]

with rho_v = r_v/r_u; both integration axes are then smooth and bounded-tailed
even for interference-limited CQI distributions. Solving w_u(r) = 1 for all
users simultaneously yields the expected rates; a damped multiplicative
iteration r_u <- r_u * w_u^eta does this robustly.

Quadrature: tensor Gauss-Legendre, the CQI axis parameterised as
phi = expm1(scale*t/(1-t)) and the inner axis as z = log1p(phi)*tau. Node
counts start at (64, 128) and are doubled until two successive estimates agree
to the requested relative tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Tuple

import numpy as np

from . import kernels
from ._accel import NUMBA_ENABLED
from .errors import ConvergenceError, DomainError, InvalidParameterError, QuadratureError
from .sinr_model import SinrDistribution

__all__ = ["RateSolution", "expected_weight", "solve_rates", "mean_log_capacity"]

LN2 = math.log(2.0)


@dataclass(frozen=True)
class RateSolution:
    """Solved per-user expected rates (bits/s) with convergence evidence."""

    rates: np.ndarray
    total: float
    residuals: np.ndarray
    iterations: int


@lru_cache(maxsize=32)
def _gl_unit(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on (0, 1)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _pack(dists: Sequence[SinrDistribution]):
    n_pow = max((len(d.interferer_powers) for d in dists), default=0)
    n_pow = max(n_pow, 1)
    p_hat = np.array([d.serving_power for d in dists])
    resid = np.array([d.residual_noise for d in dists])
    powers = np.zeros((len(dists), n_pow))
    for i, d in enumerate(dists):
        if d.interferer_powers:
            powers[i, : len(d.interferer_powers)] = d.interferer_powers
    return p_hat, powers, resid


def _weight_grid_numpy(tau_nodes, tau_weights, t_nodes, t_weights, scale,
                       p_hat_u, powers_u, resid_u, own_rate,
                       p_hat_v, powers_v, resid_v, rates_v, bandwidth):
    """Vectorised twin of kernels.weight_grid for the numpy lane."""
    s_all = scale * t_nodes / (1.0 - t_nodes)
    keep = s_all < 700.0  # beyond this the survivor factor underflows to 0
    s = s_all[keep]
    t_nodes = t_nodes[keep]
    t_weights = t_weights[keep]
    phi = np.expm1(s)

    surv = np.exp(-resid_u / p_hat_u * phi)
    hazard = np.full_like(phi, resid_u / p_hat_u)
    for pk in powers_u:
        if pk > 0.0:
            surv = surv / (pk * phi / p_hat_u + 1.0)
            hazard = hazard + pk / (pk * phi + p_hat_u)
    f_u = hazard * surv
    # keep only nodes with live density: avoids jacobian overflow noise on
    # nodes whose contribution is an exact zero anyway
    live = f_u > 0.0
    s, phi, f_u = s[live], phi[live], f_u[live]
    t_nodes, t_weights = t_nodes[live], t_weights[live]
    jac = (phi + 1.0) * scale / (1.0 - t_nodes) ** 2
    base = f_u * jac * t_weights * s

    if p_hat_v.shape[0] == 0 or s.size == 0:
        return float(np.sum(base)) * bandwidth / (LN2 * own_rate)

    ez = np.expm1(s[None, :] * tau_nodes[:, None])  # (n_tau, nt)
    prod = np.ones_like(ez)
    for v in range(p_hat_v.shape[0]):
        rho = rates_v[v] / own_rate
        den = 1.0 + ez * (1.0 - rho)
        bad = den <= 1e-300
        a = phi[None, :] * rho / np.where(bad, 1.0, den)
        sv = np.exp(-resid_v[v] / p_hat_v[v] * a)
        for pk in powers_v[v]:
            if pk > 0.0:
                sv = sv / (pk * a / p_hat_v[v] + 1.0)
        prod = prod * np.where(bad, 1.0, 1.0 - sv)
    inner = tau_weights @ prod  # (nt,)
    return float(np.sum(base * inner)) * bandwidth / (LN2 * own_rate)


def _weight_once(dist_u, own_rate, p_hat_v, powers_v, resid_v, rates_v, bandwidth, scale, nx, nt):
    xn, xw = _gl_unit(nx)
    tn, tw = _gl_unit(nt)
    powers_u = np.asarray(dist_u.interferer_powers, dtype=float)
    if powers_u.size == 0:
        powers_u = np.zeros(1)
    fn = kernels.weight_grid if NUMBA_ENABLED else _weight_grid_numpy
    return fn(
        xn, xw, tn, tw, scale,
        dist_u.serving_power, powers_u, dist_u.residual_noise, float(own_rate),
        p_hat_v, powers_v, resid_v, rates_v, float(bandwidth),
    )


def _weight_refined(dist_u, own_rate, p_hat_v, powers_v, resid_v, rates_v, bandwidth, scale,
                    rel_tol=1e-6, start=(64, 128), max_levels=5):
    nx, nt = start
    estimates = []
    prev = None
    for _ in range(max_levels):
        val = _weight_once(dist_u, own_rate, p_hat_v, powers_v, resid_v, rates_v, bandwidth, scale, nx, nt)
        estimates.append(val)
        if prev is not None and abs(val - prev) <= rel_tol * max(abs(val), 1e-300):
            return val
        prev = val
        nx *= 2
        nt *= 2
    raise QuadratureError(
        f"weight quadrature did not stabilise to {rel_tol:g} after {max_levels} doublings",
        estimates=estimates,
    )


def expected_weight(user: SinrDistribution, own_rate: float,
                    others: Sequence[Tuple[SinrDistribution, float]],
                    bandwidth: float, *, rel_tol: float = 1e-6) -> float:
    """Expected frame-metric contribution of a user at the given rate point.

    others lists (distribution, rate) for every competing user. Strictly
    decreasing in own_rate; equals 1 at the balanced rate point.
    """
    if not own_rate > 0.0:
        raise DomainError(f"own_rate must be positive, got {own_rate}")
    if any(not r > 0.0 for _, r in others):
        raise DomainError("competitor rates must be positive")
    dists_v = [d for d, _ in others]
    p_hat_v, powers_v, resid_v = _pack(dists_v)
    rates_v = np.array([r for _, r in others], dtype=float)
    scale = max(math.log1p(user.median()), 1e-2)
    return _weight_refined(user, own_rate, p_hat_v, powers_v, resid_v, rates_v,
                           bandwidth, scale, rel_tol=rel_tol)


def mean_log_capacity(dist: SinrDistribution, bandwidth: float, rel_tol: float = 1e-9) -> float:
    """Average single-user Shannon rate B*E[log2(1+Phi)] by quadrature."""
    scale = max(math.log1p(dist.median()), 1e-2)
    prev = None
    nt = 128
    for _ in range(6):
        tn, tw = _gl_unit(nt)
        s_all = scale * tn / (1.0 - tn)
        keep = s_all < 700.0
        s = s_all[keep]
        phi = np.expm1(s)
        dens = dist.pdf(phi)
        # jacobian only where the density has not underflown (it can overflow)
        live = dens > 0.0
        jac = np.zeros_like(s)
        jac[live] = (phi[live] + 1.0) * scale / (1.0 - tn[keep][live]) ** 2
        val = float(np.sum(tw[keep] * dens * jac * s)) / LN2
        if prev is not None and abs(val - prev) <= rel_tol * max(abs(val), 1e-300):
            return bandwidth * val
        prev = val
        nt *= 2
    raise QuadratureError(f"capacity quadrature did not stabilise to {rel_tol:g}")


class _BalanceSystem:
    """Evaluation helper for the coupled balance equations w_u(r) = 1."""

    def __init__(self, dists, bandwidth, quad_tol):
        self.dists = dists
        self.n = len(dists)
        self.bandwidth = float(bandwidth)
        self.quad_tol = quad_tol
        self.p_hat, self.powers, self.resid = _pack(dists)
        self.scales = np.array([max(math.log1p(d.median()), 1e-2) for d in dists])
        self.others = [np.array([v for v in range(self.n) if v != u], dtype=np.int64)
                       for u in range(self.n)]

    def _args(self, u, own_rate, rates):
        idx = self.others[u]
        return (self.dists[u], own_rate, self.p_hat[idx], self.powers[idx],
                self.resid[idx], rates[idx], self.bandwidth, self.scales[u])

    def weight(self, u, own_rate, rates, grid):
        return _weight_once(*self._args(u, own_rate, rates), nx=grid[0], nt=grid[1])

    def weight_certified(self, u, rates, start):
        return _weight_refined(*self._args(u, rates[u], rates), rel_tol=self.quad_tol, start=start)

    def residuals_certified(self, rates, start):
        return np.array([abs(self.weight_certified(u, rates, start) - 1.0) for u in range(self.n)])

    def sweep(self, rates, grid, rtol):
        """One Gauss-Seidel pass: rebalance each user in turn against the
        current rates of the others. Mutates rates; returns the largest
        entry imbalance seen and whether anything moved."""
        worst = 0.0
        moved = False
        for u in range(self.n):
            w = self.weight(u, rates[u], rates, grid)
            dev = abs(w - 1.0)
            if dev > worst:
                worst = dev
            if dev > rtol:
                rates[u] = self.solve_user(u, rates, grid, rtol, w_start=w)
                moved = True
        return worst, moved

    def solve_user(self, u, rates, grid, rtol, w_start=None):
        """Root of w_u(r) = 1 in own rate, others fixed: bracket by geometric
        expansion, then regula falsi in (log r, log w); w is strictly
        decreasing in r, so the bracket is safe."""
        r = rates[u]
        w = self.weight(u, r, rates, grid) if w_start is None else w_start
        if abs(w - 1.0) <= rtol:
            return r
        growing = w > 1.0
        lo, hi, wlo, whi = r, r, w, w
        for _ in range(80):
            if growing:
                hi *= 4.0
                whi = self.weight(u, hi, rates, grid)
                if whi <= 1.0:
                    break
                lo, wlo = hi, whi
            else:
                lo /= 4.0
                wlo = self.weight(u, lo, rates, grid)
                if wlo >= 1.0:
                    break
                hi, whi = lo, wlo
        llo, lhi = math.log(lo), math.log(hi)
        glo = math.log(max(wlo, 1e-300))
        ghi = math.log(max(whi, 1e-300))
        for _ in range(80):
            denom = glo - ghi
            lm = llo + (lhi - llo) * glo / denom if denom != 0.0 else 0.5 * (llo + lhi)
            if not (min(llo, lhi) < lm < max(llo, lhi)):
                lm = 0.5 * (llo + lhi)
            rm = math.exp(lm)
            wm = self.weight(u, rm, rates, grid)
            if abs(wm - 1.0) <= rtol:
                return rm
            if wm > 1.0:
                llo, glo = lm, math.log(max(wm, 1e-300))
            else:
                lhi, ghi = lm, math.log(max(wm, 1e-300))
        return math.exp(0.5 * (llo + lhi))


def solve_rates(users: Sequence[SinrDistribution], bandwidth: float,
                tol: float = 1e-4, max_iter: int = 200, *,
                quad_tol: float = 1e-6, initial_rates=None) -> RateSolution:
    """Solve the balance system w_u(r) = 1 for every user.

    Nonlinear Gauss-Seidel: sweep over users, each time root-solving the
    user's own balance with the competitors held fixed (safe because w_u is
    strictly decreasing in the own rate), with Aitken extrapolation of the
    sweep map and a coarse-grid warm start. The returned point is certified
    by re-evaluating every weight with node-doubling quadrature.

    initial_rates warm-starts the iteration (e.g. from a solution under a
    different reporting configuration). Raises ConvergenceError with the last
    iterate attached when max_iter sweeps are exhausted.
    """
    dists = list(users)
    n = len(dists)
    if n == 0:
        raise InvalidParameterError("at least one user required")
    if not tol > 0.0:
        raise InvalidParameterError(f"tol must be positive, got {tol}")

    system = _BalanceSystem(dists, bandwidth, quad_tol)
    if initial_rates is not None:
        rates = np.asarray(initial_rates, dtype=float).copy()
        if rates.shape != (n,) or not np.all(rates > 0.0):
            raise InvalidParameterError("initial_rates must be positive, one per user")
    else:
        rates = np.array([mean_log_capacity(d, bandwidth) for d in dists]) / n
    sweeps = 0

    # grid escalation: iterate on a fixed grid, then certify against
    # node-doubled quadrature; on certificate failure move to the finer grid
    stages = [((32, 64), max(3e-2, tol), False), ((64, 128), 0.5 * tol, True),
              ((128, 256), 0.5 * tol, True), ((256, 512), 0.5 * tol, True)]
    for grid, target, certify in stages:
        rtol_inner = 0.25 * target
        prev_step = None
        while True:
            sweeps += 1
            if sweeps > max_iter:
                raise ConvergenceError(
                    f"rate balance did not converge within {max_iter} sweeps",
                    rates=rates, residuals=np.abs([system.weight(u, rates[u], rates, grid) - 1.0
                                                   for u in range(n)]),
                    iterations=sweeps - 1,
                )
            x_before = np.log(rates)
            worst, moved = system.sweep(rates, grid, rtol_inner)
            if not moved and worst <= target:
                break
            step = np.log(rates) - x_before
            # Aitken extrapolation along the dominant linear mode of the sweep map
            if prev_step is not None and moved:
                denom = float(prev_step @ prev_step)
                lam = float(step @ prev_step) / denom if denom > 0.0 else 0.0
                if 0.0 < lam < 0.95:
                    rates = np.exp(np.log(rates) + lam / (1.0 - lam) * step)
                    prev_step = None
                else:
                    prev_step = step
            else:
                prev_step = step

        if certify:
            residuals = system.residuals_certified(rates, start=grid)
            if residuals.max() <= tol:
                return RateSolution(rates=rates.copy(), total=float(rates.sum()),
                                    residuals=residuals, iterations=sweeps)

    raise ConvergenceError(
        "rate balance converged on the iteration grid but failed certification",
        rates=rates, residuals=residuals, iterations=sweeps,
    )
