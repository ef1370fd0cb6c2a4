"""Compiled inner loops for the simulation engine.

These mirror the per-agent functions in ``potential`` and ``geometry`` and
are tested against them; they exist only because the engine evaluates the
closed-loop field twice per step for tens of thousands of steps.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def follower_field(q, followers, ptr, nbr, gains, k, delta, floor, out_u, out_margin, out_m):
    """Fill control inputs, edge margins and m_ij for every follower.

    Edges are stored CSR-style: follower row ``r`` owns ``nbr[ptr[r]:ptr[r+1]]``.
    Returns -1 on success, otherwise the index of the first edge whose margin
    is ``<= floor``; in that case only ``out_margin`` is filled.
    """
    d = q.shape[1]
    m_rows = followers.shape[0]
    bad = -1
    for r in range(m_rows):
        i = followers[r]
        for e in range(ptr[r], ptr[r + 1]):
            j = nbr[e]
            s = 0.0
            for c in range(d):
                diff = q[i, c] - q[j, c]
                s += diff * diff
            b = delta - s
            out_margin[e] = b
            if b <= floor and bad < 0:
                bad = e
    if bad >= 0:
        return bad

    inv_k = 1.0 / k
    for r in range(m_rows):
        i = followers[r]
        lo = ptr[r]
        hi = ptr[r + 1]
        gamma = 0.0
        prod = 1.0
        for e in range(lo, hi):
            gamma += 0.5 * (delta - out_margin[e])
            prod *= out_margin[e]
        beta = 0.5 * prod
        denom = k * (gamma**k + beta) ** (inv_k + 1.0)
        for c in range(d):
            out_u[r, c] = 0.0
        for e in range(lo, hi):
            b_bar = 1.0
            for l in range(lo, hi):
                if l != e:
                    b_bar *= out_margin[l]
            m = (k * beta + b_bar * gamma) / denom
            out_m[e] = m
            j = nbr[e]
            for c in range(d):
                out_u[r, c] -= gains[r] * m * (q[i, c] - q[j, c])
    return -1


@njit(cache=True)
def discrete_update(q, followers, ptr, nbr, gains, m_coef, step, out_q, out_coef_min, out_sum_err):
    """Convex-combination step ``q_i <- (1 - T sum pi_ij) q_i + T sum pi_ij q_j``."""
    d = q.shape[1]
    coef_min = np.inf
    sum_err = 0.0
    for r in range(followers.shape[0]):
        i = followers[r]
        off_total = 0.0
        for e in range(ptr[r], ptr[r + 1]):
            off_total += step * gains[r] * m_coef[e]
        self_coef = 1.0 - off_total
        total = self_coef
        for c in range(d):
            out_q[i, c] = self_coef * q[i, c]
        for e in range(ptr[r], ptr[r + 1]):
            w = step * gains[r] * m_coef[e]
            total += w
            if w < coef_min:
                coef_min = w
            j = nbr[e]
            for c in range(d):
                out_q[i, c] += w * q[j, c]
        if self_coef < coef_min:
            coef_min = self_coef
        err = abs(total - 1.0)
        if err > sum_err:
            sum_err = err
    out_coef_min[0] = coef_min
    out_sum_err[0] = sum_err


@njit(cache=True)
def _cross(ox, oy, ax, ay, bx, by):
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


@njit(cache=True)
def hull_area_batch(points):
    """Area of the planar convex hull of ``points[t]`` for every ``t``."""
    steps = points.shape[0]
    n = points.shape[1]
    out = np.zeros(steps)
    hx = np.empty(2 * n)
    hy = np.empty(2 * n)
    xs = np.empty(n)
    ys = np.empty(n)
    for t in range(steps):
        # insertion sort by (x, y); n is small
        for p in range(n):
            x = points[t, p, 0]
            y = points[t, p, 1]
            s = p
            while s > 0 and (xs[s - 1] > x or (xs[s - 1] == x and ys[s - 1] > y)):
                xs[s] = xs[s - 1]
                ys[s] = ys[s - 1]
                s -= 1
            xs[s] = x
            ys[s] = y
        h = 0
        for p in range(n):
            while h >= 2 and _cross(hx[h - 2], hy[h - 2], hx[h - 1], hy[h - 1], xs[p], ys[p]) <= 0.0:
                h -= 1
            hx[h] = xs[p]
            hy[h] = ys[p]
            h += 1
        lower = h + 1
        for p in range(n - 2, -1, -1):
            while h >= lower and _cross(hx[h - 2], hy[h - 2], hx[h - 1], hy[h - 1], xs[p], ys[p]) <= 0.0:
                h -= 1
            hx[h] = xs[p]
            hy[h] = ys[p]
            h += 1
        area = 0.0
        for v in range(h - 1):
            area += hx[v] * hy[v + 1] - hx[v + 1] * hy[v]
        out[t] = 0.5 * abs(area)
    return out


@njit(cache=True)
def pi_stats(n, followers, ptr, nbr, edge_gain, m_coef, row):
    """Smallest off-diagonal weight ``K_i m_ij`` and largest |row sum| of pi.

    Each follower row is materialized densely in ``row`` (length ``n``) with
    diagonal ``-sum_j K_i m_ij`` and summed entry by entry.
    """
    off_min = np.inf
    sum_err = 0.0
    for r in range(followers.shape[0]):
        for c in range(n):
            row[c] = 0.0
        total = 0.0
        for e in range(ptr[r], ptr[r + 1]):
            w = edge_gain[e] * m_coef[e]
            row[nbr[e]] = w
            total += w
            if w < off_min:
                off_min = w
        row[followers[r]] = -total
        s = 0.0
        for c in range(n):
            s += row[c]
        if abs(s) > sum_err:
            sum_err = abs(s)
    return off_min, sum_err
