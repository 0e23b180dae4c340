"""Compiled bulk-simulation kernels.

These mirror the pure-Python rules in `designs` exactly (same integer
cross-multiplication for interval membership, same float arithmetic and
pooling order for the isotonic fit), so batch results are bit-identical
to replaying `run_trial` with the same uniform stream. Equality is
enforced by tests.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _pava_buf(vals, wts, k, level, weight, size):
    """In-place weighted PAVA over vals[:k]; wts holds float weights."""
    nb = 0
    for i in range(k):
        level[nb] = vals[i]
        weight[nb] = wts[i]
        size[nb] = 1
        nb += 1
        while nb > 1 and level[nb - 2] > level[nb - 1]:
            w = weight[nb - 2] + weight[nb - 1]
            level[nb - 2] = (level[nb - 2] * weight[nb - 2] + level[nb - 1] * weight[nb - 1]) / w
            weight[nb - 2] = w
            size[nb - 2] += size[nb - 1]
            nb -= 1
    pos = 0
    for b in range(nb):
        for _ in range(size[b]):
            vals[pos] = level[b]
            pos += 1


@njit(cache=True)
def interval_batch(f, start, k, n, lo_num, lo_den, hi_num, hi_den, us, tail_start,
                   s1_out, s2_out, n_out, tox_out, final_out):
    """Simulate one interval-design trial per row of `us`.

    Membership tests use exact integer cross-multiplication against the
    rational interval endpoints lo_num/lo_den and hi_num/hi_den. Outputs:
    tail min/max visited level, per-level counts, and the dose the rule
    would allocate next (the MTD recommendation).
    """
    reps = us.shape[0]
    m = f.shape[0]
    for r in range(reps):
        cur = start
        s1 = m + 1
        s2 = 0
        for u in range(m):
            n_out[r, u] = 0
            tox_out[r, u] = 0
        i = 0
        while i < n:
            csize = k if n - i >= k else n - i
            for _ in range(csize):
                y = 1 if us[r, i] < f[cur - 1] else 0
                n_out[r, cur - 1] += 1
                tox_out[r, cur - 1] += y
                if i >= tail_start:
                    if cur < s1:
                        s1 = cur
                    if cur > s2:
                        s2 = cur
                i += 1
            t = tox_out[r, cur - 1]
            c = n_out[r, cur - 1]
            if t * lo_den <= lo_num * c:
                if cur < m:
                    cur += 1
            elif t * hi_den >= hi_num * c:
                if cur > 1:
                    cur -= 1
        s1_out[r] = s1
        s2_out[r] = s2
        final_out[r] = cur


@njit(cache=True)
def point_batch(f, p, start, k, n, us, u_star, cohorts_out, n_at_out, tox_at_out, final_out):
    """Simulate one point-design trial per row of `us`.

    Tracks how many cohorts level `u_star` receives plus its final counts,
    which is what the non-convergence trap detector needs.
    """
    reps = us.shape[0]
    m = f.shape[0]
    vals = np.empty(m)
    wts = np.empty(m)
    lvl = np.empty(m, np.int64)
    ncnt = np.empty(m, np.int64)
    tcnt = np.empty(m, np.int64)
    level = np.empty(m)
    weight = np.empty(m)
    size = np.empty(m, np.int64)
    for r in range(reps):
        for u in range(m):
            ncnt[u] = 0
            tcnt[u] = 0
        cohorts = 0
        cur = start
        i = 0
        while i < n:
            if cur == u_star:
                cohorts += 1
            csize = k if n - i >= k else n - i
            for _ in range(csize):
                y = 1 if us[r, i] < f[cur - 1] else 0
                ncnt[cur - 1] += 1
                tcnt[cur - 1] += y
                i += 1
            kk = 0
            for u in range(m):
                if ncnt[u] > 0:
                    vals[kk] = tcnt[u] / ncnt[u]
                    wts[kk] = ncnt[u]
                    lvl[kk] = u + 1
                    kk += 1
            _pava_buf(vals, wts, kk, level, weight, size)
            if vals[kk - 1] < p:
                cur = lvl[kk - 1] + 1 if lvl[kk - 1] < m else m
            elif vals[0] > p:
                cur = lvl[0] - 1 if lvl[0] > 1 else 1
            else:
                best = lvl[0]
                bd = abs(vals[0] - p)
                for t in range(1, kk):
                    d = abs(vals[t] - p)
                    if d < bd:
                        bd = d
                        best = lvl[t]
                cur = best
        cohorts_out[r] = cohorts
        n_at_out[r] = ncnt[u_star - 1]
        tox_at_out[r] = tcnt[u_star - 1]
        final_out[r] = cur
