"""Hot scheduling kernels shared by the library API and the frame simulator.

Everything here is written as scalar loops over plain float64/int64 arrays so
the same source runs under numba's @njit (default) or as ordinary Python when
the fallback lane is selected (see nomapfs._accel). All functions are pure:
randomness stays outside, so a given input array always produces the same
output in either lane.

Conventions:
  * candidates are addressed by position into phi[]/rate[] arrays,
  * a schedule is (seq, alpha, n_sched): seq[:n_sched] lists positions in
    scheduling order, alpha[:n_sched+1] the cumulative power ratios with
    alpha[0] = 0 and alpha[n_sched] = 1,
  * mode 0 means unconstrained multiplexing, mode k >= 1 caps the multiplexed
    user count at k (mode 1 is plain single-user scheduling).
"""

import math

import numpy as np

from ._accel import maybe_njit

# Relative tolerance treating two CQIs as equal; continuous fading essentially
# never triggers it, but constructed inputs can.
REL_EQ = 1e-12
# Open-interval margin for crossing points: a crossing within eps of 0 or 1
# allocates zero measure and is treated as absent.
THETA_EPS = 1e-12

LN2 = math.log(2.0)


@maybe_njit(cache=True)
def crossing_or_neg(phi_u, r_u, phi_v, r_v):
    """Crossing point of the two power-split gain curves, or -1.0.

    Returns theta = (r_u/phi_u - r_v/phi_v) / (r_v - r_u) when it lies
    strictly inside (0, 1); otherwise -1.0 (no usable crossing: one curve
    dominates the other over the whole unit interval, or the pair is
    degenerate).
    """
    mx = phi_u if phi_u > phi_v else phi_v
    if abs(phi_u - phi_v) <= REL_EQ * mx:
        return -1.0
    if r_u == r_v:
        return -1.0
    theta = (r_u / phi_u - r_v / phi_v) / (r_v - r_u)
    # Written so that NaN/inf also lands in the rejection branch.
    if theta > THETA_EPS and theta < 1.0 - THETA_EPS:
        return theta
    return -1.0


@maybe_njit(cache=True)
def greedy_schedule(phi, rate, cand, n_cand, seq, alpha, vpos, vtheta):
    """Greedy construction of the metric-maximising schedule over cand[:n_cand].

    Walks the upper envelope of the gain curves pi_u(x) = phi_u/(R_u(1+x*phi_u))
    from x=0 to x=1: start at the argmax of pi_u(0), then repeatedly jump to
    the curve with the nearest crossing inside (0, 1). Ties pick the smallest
    CQI, then the earliest candidate position.

    seq, alpha, vpos, vtheta are caller-provided scratch (lengths >= n_cand,
    n_cand+1, n_cand, n_cand). Returns (n_sched, theta_evals).
    """
    # argmax of pi(0) = phi/rate
    c_cur = cand[0]
    best = phi[c_cur] / rate[c_cur]
    for k in range(1, n_cand):
        j = cand[k]
        p0 = phi[j] / rate[j]
        if p0 > best * (1.0 + REL_EQ):
            c_cur = j
            best = p0
        elif p0 >= best * (1.0 - REL_EQ):
            if phi[j] < phi[c_cur] * (1.0 - REL_EQ):
                c_cur = j
                best = p0

    seq[0] = c_cur
    alpha[0] = 0.0
    n_sched = 1
    evals = 0

    # valid set: candidates whose curve crosses the current one inside (0,1)
    m = 0
    for k in range(n_cand):
        j = cand[k]
        if j == c_cur:
            continue
        t = crossing_or_neg(phi[c_cur], rate[c_cur], phi[j], rate[j])
        evals += 1
        if t > 0.0:
            vpos[m] = j
            vtheta[m] = t
            m += 1

    while m > 0:
        bi = 0
        for k in range(1, m):
            if vtheta[k] < vtheta[bi] * (1.0 - REL_EQ):
                bi = k
            elif vtheta[k] <= vtheta[bi] * (1.0 + REL_EQ):
                if phi[vpos[k]] < phi[vpos[bi]] * (1.0 - REL_EQ):
                    bi = k
        c_next = vpos[bi]
        a_cur = vtheta[bi]
        alpha[n_sched] = a_cur
        seq[n_sched] = c_next
        n_sched += 1

        # keep only curves crossing the new leader beyond the fresh breakpoint:
        # an earlier crossing means that curve is already below the envelope
        # for the rest of the interval
        mm = 0
        for k in range(m):
            if k == bi:
                continue
            j = vpos[k]
            t = crossing_or_neg(phi[c_next], rate[c_next], phi[j], rate[j])
            evals += 1
            if t > a_cur:
                vpos[mm] = j
                vtheta[mm] = t
                mm += 1
        m = mm

    alpha[n_sched] = 1.0
    return n_sched, evals


@maybe_njit(cache=True)
def schedule_metric(phi, rate, seq, alpha, n_sched, bandwidth):
    """Sum of r_u/R_u over the schedule, rates from the Shannon capacity of
    each power slice: r = B*log2((1+alpha_n*phi)/(1+alpha_{n-1}*phi))."""
    w = 0.0
    for k in range(n_sched):
        j = seq[k]
        num = 1.0 + alpha[k + 1] * phi[j]
        den = 1.0 + alpha[k] * phi[j]
        w += bandwidth * (math.log(num / den) / LN2) / rate[j]
    return w


@maybe_njit(cache=True)
def schedule_rates(phi, seq, alpha, n_sched, bandwidth, out_rates):
    """Per-user rates of a schedule written into out_rates (pre-zeroed)."""
    for k in range(n_sched):
        j = seq[k]
        num = 1.0 + alpha[k + 1] * phi[j]
        den = 1.0 + alpha[k] * phi[j]
        out_rates[j] = bandwidth * (math.log(num / den) / LN2)


@maybe_njit(cache=True)
def best_limited_schedule(phi, rate, n_users, s_max, seq, alpha, cand, vpos, vtheta, comb, bandwidth):
    """Best schedule multiplexing at most s_max users.

    Enumerates every candidate subset of size 1..s_max and runs the greedy
    envelope walk restricted to it; subsets where some member ends up with
    zero measure are skipped because the identical allocation arises from the
    smaller subset. Fills seq/alpha with the winner and returns
    (n_sched, metric, theta_evals).
    """
    if s_max >= n_users:
        for k in range(n_users):
            cand[k] = k
        n_sched, evals = greedy_schedule(phi, rate, cand, n_users, seq, alpha, vpos, vtheta)
        w = schedule_metric(phi, rate, seq, alpha, n_sched, bandwidth)
        return n_sched, w, evals

    best_w = -1.0
    best_n = 0
    evals = 0
    # scratch for the subset runs; winner copied into seq/alpha
    sub_seq = np.empty(s_max, dtype=np.int64)
    sub_alpha = np.empty(s_max + 1, dtype=np.float64)

    for size in range(1, s_max + 1):
        for k in range(size):
            comb[k] = k
        while True:
            for k in range(size):
                cand[k] = comb[k]
            n_sched, ev = greedy_schedule(phi, rate, cand, size, sub_seq, sub_alpha, vpos, vtheta)
            evals += ev
            if n_sched == size:
                w = schedule_metric(phi, rate, sub_seq, sub_alpha, n_sched, bandwidth)
                if w > best_w:
                    best_w = w
                    best_n = n_sched
                    for k in range(n_sched):
                        seq[k] = sub_seq[k]
                        alpha[k] = sub_alpha[k]
                    alpha[n_sched] = 1.0
            # next lexicographic combination
            i = size - 1
            while i >= 0 and comb[i] == n_users - size + i:
                i -= 1
            if i < 0:
                break
            comb[i] += 1
            for k in range(i + 1, size):
                comb[k] = comb[k - 1] + 1
    return best_n, best_w, evals


@maybe_njit(cache=True)
def run_frames(phis, avg_rate, tau, floor, bandwidth, mode, ladder, out_rates, out_metric, out_ladder, out_state):
    """Frame loop over a block of CQI realisations.

    phis: (frames, users) CQI per frame. avg_rate: (users,) proportional-fair
    averages, updated in place frame by frame with
    R <- (1-1/tau)R + r/tau, clamped to floor. For each frame the configured
    scheduler is run, per-user rates and the achieved metric (against the
    pre-update averages) are recorded, and out_state receives the post-update
    averages.

    When ladder is true, out_ladder[f] additionally records the best
    attainable metric on the same (phi, R) state for multiplexing caps
    (unbounded, 3, 2, 1) as diagnostics; out_ladder is untouched otherwise.

    Returns (max theta evals of any unconstrained run, max |sum(lambda)-1|).
    """
    n_frames, n_users = phis.shape
    seq = np.empty(n_users, dtype=np.int64)
    alpha = np.empty(n_users + 1, dtype=np.float64)
    cand = np.empty(n_users, dtype=np.int64)
    vpos = np.empty(n_users, dtype=np.int64)
    vtheta = np.empty(n_users, dtype=np.float64)
    comb = np.empty(n_users, dtype=np.int64)

    max_evals = 0
    max_lambda_err = 0.0

    for f in range(n_frames):
        phi = phis[f]
        if mode == 0:
            for k in range(n_users):
                cand[k] = k
            n_sched, evals = greedy_schedule(phi, avg_rate, cand, n_users, seq, alpha, vpos, vtheta)
            if evals > max_evals:
                max_evals = evals
        else:
            n_sched, _w, _ev = best_limited_schedule(
                phi, avg_rate, n_users, mode, seq, alpha, cand, vpos, vtheta, comb, bandwidth
            )

        for u in range(n_users):
            out_rates[f, u] = 0.0
        schedule_rates(phi, seq, alpha, n_sched, bandwidth, out_rates[f])

        w = 0.0
        lam_sum = 0.0
        for k in range(n_sched):
            j = seq[k]
            w += out_rates[f, j] / avg_rate[j]
            lam_sum += alpha[k + 1] - alpha[k]
        out_metric[f] = w
        err = abs(lam_sum - 1.0)
        if err > max_lambda_err:
            max_lambda_err = err

        if ladder:
            for k in range(n_users):
                cand[k] = k
            ns, ev = greedy_schedule(phi, avg_rate, cand, n_users, seq, alpha, vpos, vtheta)
            if ev > max_evals:
                max_evals = ev
            out_ladder[f, 0] = schedule_metric(phi, avg_rate, seq, alpha, ns, bandwidth)
            for li in range(1, 4):
                cap = 4 - li  # 3, 2, 1
                if cap >= n_users:
                    out_ladder[f, li] = out_ladder[f, 0]
                else:
                    _ns, wbest, _ev = best_limited_schedule(
                        phi, avg_rate, n_users, cap, seq, alpha, cand, vpos, vtheta, comb, bandwidth
                    )
                    out_ladder[f, li] = wbest

        keep = 1.0 - 1.0 / tau
        for u in range(n_users):
            r_new = keep * avg_rate[u] + out_rates[f, u] / tau
            if r_new < floor:
                r_new = floor
            avg_rate[u] = r_new
            out_state[f, u] = r_new

    return max_evals, max_lambda_err


@maybe_njit(cache=True)
def weight_grid(tau_nodes, tau_weights, t_nodes, t_weights, scale,
                p_hat_u, powers_u, resid_u, own_rate,
                p_hat_v, powers_v, resid_v, rates_v, bandwidth):
    """Scheduling-weight integral for one user on a tensor Gauss-Legendre grid.

    Evaluates

        w = B/(ln2 * r_u) * int_0^inf f_u(phi)
                 * int_0^{log1p(phi)} prod_v F_v(phi*rho_v / (1+(e^z-1)(1-rho_v))) dz dphi

    with rho_v = r_v/r_u, which is the double integral of the user's expected
    metric contribution after substituting the power coordinate by
    z = ln(1 + phi*x). The z substitution removes the near-singular spike the
    raw power coordinate develops at heavy-tailed phi. Outer axis:
    s = log1p(phi) = scale*t/(1-t) over t_nodes; inner axis: z = s*tau over
    tau_nodes.

    powers_* are zero-padded (rows per distribution); zero entries contribute
    neutral factors.
    """
    n_tau = tau_nodes.shape[0]
    nt = t_nodes.shape[0]
    n_others = p_hat_v.shape[0]
    n_pow_u = powers_u.shape[0]
    n_pow_v = powers_v.shape[1]

    total = 0.0
    for jt in range(nt):
        t = t_nodes[jt]
        s = scale * t / (1.0 - t)
        if s > 700.0:
            # survival underflows to zero far before exp overflow territory
            continue
        phi = math.expm1(s)
        # dphi = e^s ds, ds = scale/(1-t)^2 dt
        jac = (phi + 1.0) * scale / ((1.0 - t) * (1.0 - t))

        # survival and density of the user's own CQI at phi
        surv = math.exp(-resid_u / p_hat_u * phi)
        hazard = resid_u / p_hat_u
        for k in range(n_pow_u):
            pk = powers_u[k]
            if pk > 0.0:
                surv /= pk * phi / p_hat_u + 1.0
                hazard += pk / (pk * phi + p_hat_u)
        f_u = hazard * surv
        if f_u <= 0.0:
            continue
        base = f_u * jac * t_weights[jt] * s

        if n_others == 0:
            total += base
            continue

        inner = 0.0
        for ix in range(n_tau):
            z = s * tau_nodes[ix]
            ez = math.expm1(z)
            prod = 1.0
            for v in range(n_others):
                rho = rates_v[v] / own_rate
                den = 1.0 + ez * (1.0 - rho)
                if den <= 1e-300:
                    continue  # curve of v cannot reach this level: F_v = 1
                a = phi * rho / den
                sv = math.exp(-resid_v[v] / p_hat_v[v] * a)
                for k in range(n_pow_v):
                    pk = powers_v[v, k]
                    if pk > 0.0:
                        sv /= pk * a / p_hat_v[v] + 1.0
                prod *= 1.0 - sv
                if prod <= 1e-300:
                    prod = 0.0
                    break
            inner += tau_weights[ix] * prod
        total += base * inner

    return total * bandwidth / (LN2 * own_rate)
