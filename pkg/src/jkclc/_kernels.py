"""Compiled inner loops for the Monte Carlo power table."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def power_counts(z, m1, m2, rho, a1, a2, crit):
    """Rejection counts ``counts[d, w]`` of the combination statistic.

    For draw ``r`` and mean shift ``(m1[d], m2[d])`` the statistic is
    ``u2^2 + a1 (u1^2 - u2^2) + a2 ((rho u1 + s u2)^2 - u2^2)`` with
    ``u = z[r] + m`` and ``s = sqrt(1 - rho^2)``.  The per-draw terms are
    formed exactly as in :func:`quantile_rows`, so at a zero shift each
    statistic is bit-identical to the one its critical value came from.
    """
    n_draws = z.shape[0]
    n_delta = m1.shape[0]
    n_w = a1.shape[0]
    s = math.sqrt(1.0 - rho * rho)
    counts = np.zeros((n_delta, n_w), dtype=np.int64)
    base = np.empty(n_draws)
    d1 = np.empty(n_draws)
    d2 = np.empty(n_draws)
    for d in range(n_delta):
        for r in range(n_draws):
            u1 = z[r, 0] + m1[d]
            u2 = z[r, 1] + m2[d]
            base[r] = u2 * u2
            t = rho * u1 + s * u2
            d1[r] = u1 * u1 - base[r]
            d2[r] = t * t - base[r]
        # one pass over the draws per weight vectorizes well
        for w in range(n_w):
            x1 = a1[w]
            x2 = a2[w]
            c = crit[w]
            k = 0
            for r in range(n_draws):
                k += base[r] + x1 * d1[r] + x2 * d2[r] >= c
            counts[d, w] = k
    return counts


@njit(cache=True)
def quantile_rows(z, rho, a1, a2, k):
    """``k``-th order statistic (0-based) of the combination statistic for each weight pair."""
    n_draws = z.shape[0]
    s = math.sqrt(1.0 - rho * rho)
    base = np.empty(n_draws)
    d1 = np.empty(n_draws)
    d2 = np.empty(n_draws)
    for r in range(n_draws):
        u1 = z[r, 0]
        u2 = z[r, 1]
        base[r] = u2 * u2
        t = rho * u1 + s * u2
        d1[r] = u1 * u1 - base[r]
        d2[r] = t * t - base[r]
    out = np.empty(a1.shape[0])
    stat = np.empty(n_draws)
    cand = np.empty(n_draws)
    guess = -np.inf
    for w in range(a1.shape[0]):
        for r in range(n_draws):
            stat[r] = base[r] + a1[w] * d1[r] + a2[w] * d2[r]
        # neighbouring weights have close quantiles: keep only draws above a
        # lower guess and select within them; fall back if the guess is too high
        c = 0
        for r in range(n_draws):
            v = stat[r]
            cand[c] = v
            c += v >= guess
        below = n_draws - c
        if below <= k:
            q = _select(cand[:c], k - below)
        else:
            q = _select(stat, k)
        out[w] = q
        guess = 0.85 * q
    return out


@njit(cache=True)
def _select(a, k):
    """In-place Hoare quickselect; returns the ``k``-th smallest element of ``a``."""
    lo = 0
    hi = a.shape[0] - 1
    while lo < hi:
        p = a[(lo + hi) // 2]
        i = lo
        j = hi
        while i <= j:
            while a[i] < p:
                i += 1
            while a[j] > p:
                j -= 1
            if i <= j:
                a[i], a[j] = a[j], a[i]
                i += 1
                j -= 1
        if k <= j:
            hi = j
        elif k >= i:
            lo = i
        else:
            break
    return a[k]
