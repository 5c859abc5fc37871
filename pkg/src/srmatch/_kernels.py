"""Compiled inner loops.  Tables are passed as (h, f values, 1 - f values, cum int f, cum int (1-f))."""
import numpy as np
from numba import njit

SB, WEIGHTED, GREEDY = 0, 1, 2
BUDGET, REWARDS = 0, 1
POINT_RULE, INTEGRAL_RULE = 0, 1


@njit(cache=True, nogil=True)
def f_eval(h, vals, x):
    n = vals.size - 1
    if x >= n * h:
        return vals[n]
    if x <= 0.0:
        return vals[0]
    k = int(x / h)
    if k >= n:
        k = n - 1
    t = x / h - k
    return vals[k] + t * (vals[k + 1] - vals[k])


@njit(cache=True, nogil=True)
def cum_eval(h, vals, cum, x):
    """int_0^x of the piecewise-linear interpolant of ``vals`` (constant past the grid)."""
    n = vals.size - 1
    if x <= 0.0:
        return 0.0
    if x >= n * h:
        return cum[n] + (x - n * h) * vals[n]
    k = int(x / h)
    if k >= n:
        k = n - 1
    s = x / h - k
    return cum[k] + h * (vals[k] * (s - 0.5 * s * s) + vals[k + 1] * 0.5 * s * s)


@njit(cache=True, nogil=True)
def inv_sup(h, vals, c):
    """sup{y >= 0 : f(y) <= c}; inf if c >= f(L_max); -1 if c < f(0)."""
    n = vals.size - 1
    if c >= vals[n]:
        return np.inf
    if c < vals[0]:
        return -1.0
    lo, hi = 0, n  # vals[lo] <= c < vals[hi]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if vals[mid] <= c:
            lo = mid
        else:
            hi = mid
    return h * lo + h * (c - vals[lo]) / (vals[lo + 1] - vals[lo])


@njit(cache=True, nogil=True)
def run_integral(indptr, nbr_u, nbr_p, weights, rank, theta, algo, model, uniforms,
                 h, fv, qv, cumf, cumq, dual_rule, record_loads):
    n_on = indptr.size - 1
    n_off = weights.size
    matched = np.full(n_on, -1, np.int64)
    gain = np.zeros(n_on)
    beta = np.zeros(n_on)
    alpha_inc = np.zeros(n_on)
    load_after = np.zeros(n_on)
    alpha = np.zeros(n_off)
    loads = np.zeros(n_off)
    succ = np.zeros(n_off, np.bool_)
    prior = np.full(n_off, np.nan)
    succ_p = np.full(n_off, np.nan)
    hist = np.zeros((n_on + 1 if record_loads else 1, n_off if record_loads else 1))
    for j in range(n_on):
        best = -1
        bkey1 = 0.0
        bkey2 = 0.0
        for e in range(indptr[j], indptr[j + 1]):
            u = nbr_u[e]
            if succ[u]:
                continue
            p = nbr_p[e]
            if algo == SB:
                k1 = -loads[u]
                k2 = 0.0
            elif algo == WEIGHTED:
                k1 = weights[u] * p * (1.0 - f_eval(h, fv, loads[u]))
                k2 = -loads[u]
            else:
                k1 = weights[u] * p
                k2 = 0.0
            # neighbors are scanned in lexicographic order, so strict improvement keeps the smaller id
            if best < 0 or k1 > bkey1 or (k1 == bkey1 and k2 > bkey2):
                best = e
                bkey1 = k1
                bkey2 = k2
        if best >= 0:
            u = nbr_u[best]
            p = nbr_p[best]
            w = weights[u]
            l0 = loads[u]
            l1 = l0 + p
            matched[j] = u
            if model == BUDGET:
                end = l1 if l1 < theta[u] else theta[u]
                if end < l0:
                    end = l0
                gain[j] = w * (end - l0)
                if l1 >= theta[u]:
                    succ[u] = True
                    prior[u] = l0
                    succ_p[u] = p
            else:
                end = l1
                gain[j] = w * p
                if uniforms[j] < p:
                    succ[u] = True
                    prior[u] = l0
                    succ_p[u] = p
            if dual_rule == POINT_RULE:
                a = w * (end - l0) * f_eval(h, fv, l0)
                b = w * (end - l0) * (1.0 - f_eval(h, fv, l0))
            else:
                a = w * (cum_eval(h, fv, cumf, end) - cum_eval(h, fv, cumf, l0))
                b = w * (cum_eval(h, qv, cumq, end) - cum_eval(h, qv, cumq, l0))
            alpha[u] += a
            alpha_inc[j] = a
            beta[j] = b
            loads[u] = l1
            load_after[j] = l1
        if record_loads:
            hist[j + 1, :] = loads
    return matched, gain, beta, alpha_inc, load_after, alpha, loads, succ, prior, succ_p, hist


@njit(cache=True, nogil=True)
def _x_at(tau, l, p, w, cap, h, fv):
    s0 = p * w * (1.0 - f_eval(h, fv, l))
    if tau > s0:
        return 0.0
    if tau <= 0.0:
        return cap
    y = inv_sup(h, fv, 1.0 - tau / (p * w))
    if y == np.inf:
        return cap
    x = (y - l) / p
    if x < 0.0:
        return 0.0
    return x if x < cap else cap


@njit(cache=True, nogil=True)
def _water_fill(room, amount, out):
    """Add ``amount`` to ``out`` at equal rates, each entry limited by ``room``."""
    m = room.size
    order = np.argsort(room)
    left = amount
    k = 0
    for idx in range(m):
        i = order[idx]
        if room[i] <= 0.0:
            k += 1
            continue
        share = left / (m - k)
        if room[i] <= share:
            out[i] += room[i]
            left -= room[i]
        else:
            out[i] += share
            left -= share
        k += 1
    return left


@njit(cache=True, nogil=True)
def fractional_step(lo_e, hi_e, nbr_u, nbr_p, weights, theta, loads, h, fv, x_out):
    """Fill x_out[0:deg] with the fractional assignment of one arrival."""
    deg = hi_e - lo_e
    cap = np.zeros(deg)
    ls = np.zeros(deg)
    ps = np.zeros(deg)
    ws = np.zeros(deg)
    total = 0.0
    smax = 0.0
    for k in range(deg):
        u = nbr_u[lo_e + k]
        p = nbr_p[lo_e + k]
        x_out[k] = 0.0
        if loads[u] >= theta[u]:
            continue
        ls[k] = loads[u]
        ps[k] = p
        ws[k] = weights[u]
        c = (theta[u] - loads[u]) / p
        cap[k] = c if c < 1.0 else 1.0
        total += cap[k]
        s = p * ws[k] * (1.0 - f_eval(h, fv, ls[k]))
        if s > smax:
            smax = s
    if total <= 1.0:
        for k in range(deg):
            x_out[k] = cap[k]
        return
    lo = 0.0
    hi = smax * (1.0 + 1e-9) + 1e-300
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s = 0.0
        for k in range(deg):
            if cap[k] > 0.0:
                s += _x_at(mid, ls[k], ps[k], ws[k], cap[k], h, fv)
        if s >= 1.0:
            lo = mid
        else:
            hi = mid
        # stop on the tau bracket only: an early exit on |sum - 1| could leave a wide
        # bracket and spread the remainder without equalizing scores
        if hi - lo <= 1e-13 * smax:
            break
    # x(hi) sums below 1; spread the rest over vertices whose fraction jumps between hi and lo
    room = np.zeros(deg)
    s_hi = 0.0
    for k in range(deg):
        if cap[k] > 0.0:
            xh = _x_at(hi, ls[k], ps[k], ws[k], cap[k], h, fv)
            xl = _x_at(lo, ls[k], ps[k], ws[k], cap[k], h, fv)
            x_out[k] = xh
            s_hi += xh
            room[k] = xl - xh
    if s_hi < 1.0:
        _water_fill(room, 1.0 - s_hi, x_out[:deg])


@njit(cache=True, nogil=True)
def run_fractional(indptr, nbr_u, nbr_p, weights, theta, h, fv, qv, cumf, cumq, record_loads):
    n_on = indptr.size - 1
    n_off = weights.size
    nnz = nbr_u.size
    x = np.zeros(nnz)
    dl = np.zeros(nnz)
    gain = np.zeros(n_on)
    beta = np.zeros(n_on)
    alpha_inc = np.zeros(n_on)
    alpha = np.zeros(n_off)
    loads = np.zeros(n_off)
    hist = np.zeros((n_on + 1 if record_loads else 1, n_off if record_loads else 1))
    maxdeg = 0
    for j in range(n_on):
        if indptr[j + 1] - indptr[j] > maxdeg:
            maxdeg = indptr[j + 1] - indptr[j]
    buf = np.zeros(max(maxdeg, 1))
    for j in range(n_on):
        a0 = indptr[j]
        a1 = indptr[j + 1]
        fractional_step(a0, a1, nbr_u, nbr_p, weights, theta, loads, h, fv, buf)
        for k in range(a1 - a0):
            xk = buf[k]
            if xk <= 0.0:
                continue
            e = a0 + k
            u = nbr_u[e]
            p = nbr_p[e]
            w = weights[u]
            l0 = loads[u]
            l1 = l0 + p * xk
            if l1 >= theta[u] or (theta[u] - l0) / p <= xk:
                l1 = theta[u]
            x[e] = xk
            dl[e] = l1 - l0
            gain[j] += w * (l1 - l0)
            a = w * (cum_eval(h, fv, cumf, l1) - cum_eval(h, fv, cumf, l0))
            alpha[u] += a
            alpha_inc[j] += a
            beta[j] += w * (cum_eval(h, qv, cumq, l1) - cum_eval(h, qv, cumq, l0))
            loads[u] = l1
        if record_loads:
            hist[j + 1, :] = loads
    return x, dl, gain, beta, alpha_inc, alpha, loads, hist


@njit(cache=True, nogil=True)
def run_rounding(indptr, nbr_u, nbr_p, weights, theta_int, x, dl, uniforms, delta):
    """Round a fractional run arrival by arrival; track l^A - l^A' per vertex."""
    n_on = indptr.size - 1
    n_off = weights.size
    la = np.zeros(n_off)
    lb = np.zeros(n_off)
    drift = np.zeros(n_off)
    matched = np.full(n_on, -1, np.int64)
    first_fail = -1
    for j in range(n_on):
        r = uniforms[j]
        acc = 0.0
        pick = -1
        for e in range(indptr[j], indptr[j + 1]):
            la[nbr_u[e]] += dl[e]
            acc += x[e]
            if pick < 0 and r < acc:
                pick = e
        if pick >= 0:
            u = nbr_u[pick]
            lb[u] += nbr_p[pick]
            matched[j] = u
        for e in range(indptr[j], indptr[j + 1]):
            u = nbr_u[e]
            d = la[u] - lb[u]
            if d > drift[u]:
                drift[u] = d
            if first_fail < 0 and d > delta:
                first_fail = j
    obj = 0.0
    for u in range(n_off):
        obj += weights[u] * (lb[u] if lb[u] < theta_int[u] else theta_int[u])
    return matched, lb, la, drift, obj, first_fail
