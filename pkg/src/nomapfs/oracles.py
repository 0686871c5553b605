"""Independent reference solvers used to validate the fast allocation search.

Deliberately built on a different route than nomapfs.kernels: instead of the
crossing-point walk, the schedule metric is maximised by exhaustive subset and
ordering enumeration with a lattice search over the cumulative power ratios.
For a fixed scheduled sequence c_1..c_S the metric decomposes as

    w = f_S(1) + sum_{n<S} [f_n(a_n) - f_{n+1}(a_n)],   f_n(x) = B log2(1+x phi_n)/R_n,

so maximising over strictly increasing breakpoints a_1 < ... < a_{S-1} on a
uniform lattice is a prefix-max dynamic program, followed by golden-section
polish of each breakpoint inside its lattice cell.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.integrate import quad

__all__ = [
    "grid_metric_for_sequence",
    "brute_force_best_metric",
    "envelope_pf_weight",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(fn, lo, hi, tol=1e-12, max_iter=200):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    xm = 0.5 * (a + b)
    return xm, fn(xm)


def grid_metric_for_sequence(phis, rates, bandwidth=1.0, step=1e-3, refine=True):
    """Best metric for a fixed scheduled sequence via lattice DP plus polish.

    phis/rates are given in scheduling order. Returns (metric, breakpoints).
    """
    phis = np.asarray(phis, dtype=float)
    rates = np.asarray(rates, dtype=float)
    s = phis.size
    cap_last = bandwidth * np.log2(1.0 + phis[-1]) / rates[-1]
    if s == 1:
        return float(cap_last), np.array([])

    n_cells = int(round(1.0 / step))
    grid = np.arange(1, n_cells) * step  # interior breakpoint values
    # d_n(x) = f_n(x) - f_{n+1}(x) for each interior breakpoint n
    fvals = bandwidth * np.log2(1.0 + grid[None, :] * phis[:, None]) / rates[:, None]
    d = fvals[:-1] - fvals[1:]

    # prefix-max DP over strictly increasing lattice breakpoints
    best = d[0].copy()
    choice = np.zeros((s - 1, grid.size), dtype=np.int64)
    positions = np.arange(grid.size)
    for n in range(1, s - 1):
        run = np.maximum.accumulate(best)
        prefarg = np.maximum.accumulate(np.where(best >= run, positions, 0))
        new_best = np.full(grid.size, -np.inf)
        new_best[1:] = d[n, 1:] + run[:-1]
        choice[n, 1:] = prefarg[:-1]
        best = new_best

    j = int(np.argmax(best))
    breakpoints = np.empty(s - 1)
    breakpoints[-1] = grid[j]
    for n in range(s - 2, 0, -1):
        j = int(choice[n, j])
        breakpoints[n - 1] = grid[j]

    def total(bp):
        w = cap_last
        for n in range(s - 1):
            w += bandwidth * np.log2(1.0 + bp[n] * phis[n]) / rates[n]
            w -= bandwidth * np.log2(1.0 + bp[n] * phis[n + 1]) / rates[n + 1]
        return float(w)

    if refine:
        # the metric is separable in the breakpoints, so each one can be
        # polished on its own inside +-1 lattice cell
        for n in range(s - 1):
            lo = max(breakpoints[n] - step, step * 1e-3)
            hi = min(breakpoints[n] + step, 1.0 - step * 1e-3)
            if n > 0:
                lo = max(lo, breakpoints[n - 1] + 1e-12)
            if n < s - 2:
                hi = min(hi, breakpoints[n + 1] - 1e-12)
            if hi <= lo:
                continue
            dn = lambda x, n=n: (
                bandwidth * math.log2(1.0 + x * phis[n]) / rates[n]
                - bandwidth * math.log2(1.0 + x * phis[n + 1]) / rates[n + 1]
            )
            breakpoints[n], _ = _golden_max(dn, lo, hi)

    return total(breakpoints), breakpoints


def _descending_orderings(idx, phis):
    """All orderings of idx that sort CQIs descending (ties permuted)."""
    groups = []
    for _, grp in itertools.groupby(sorted(idx, key=lambda i: -phis[i]), key=lambda i: phis[i]):
        groups.append(list(grp))
    for perm in itertools.product(*(itertools.permutations(g) for g in groups)):
        yield [i for block in perm for i in block]


def brute_force_best_metric(phis, rates, bandwidth=1.0, s_max=None, step=1e-3, refine=True):
    """Max metric over every non-empty subset of size <= s_max (all, if None),
    every descending-CQI ordering, and the breakpoint lattice."""
    phis = np.asarray(phis, dtype=float)
    rates = np.asarray(rates, dtype=float)
    n = phis.size
    cap = n if s_max is None else min(int(s_max), n)
    best = -np.inf
    for size in range(1, cap + 1):
        for subset in itertools.combinations(range(n), size):
            for order in _descending_orderings(subset, phis):
                w, _ = grid_metric_for_sequence(phis[order], rates[order], bandwidth, step, refine)
                best = max(best, w)
    return float(best)


def envelope_pf_weight(phis, rates, bandwidth=1.0, epsrel=1e-10):
    """Adaptive quadrature of B/ln2 * int_0^1 max_u phi_u/(R_u(1+x phi_u)) dx."""
    phis = np.asarray(phis, dtype=float)
    rates = np.asarray(rates, dtype=float)

    def envelope(x):
        return float(np.max(phis / (rates * (1.0 + x * phis))))

    val, _err = quad(envelope, 0.0, 1.0, epsabs=0.0, epsrel=epsrel, limit=500)
    return bandwidth / math.log(2.0) * val
