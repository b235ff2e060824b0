"""Brute-force reference implementations used as independent test oracles.

Everything here is written as literal loops over ``i`` and ``j != i`` with a
dense hat matrix, deliberately sharing no code with the package.
"""

import math

import numpy as np


def dense_hat(Z):
    Z = np.asarray(Z, dtype=float)
    return Z @ np.linalg.solve(Z.T @ Z, Z.T)


def quad_form_loop(P, a, b, K):
    n = len(a)
    s = 0.0
    for i in range(n):
        for j in range(n):
            if j != i:
                s += a[i] * P[i, j] * b[j]
    return s / math.sqrt(K)


def standard_gamma_loop(P, y, x, b0, K):
    """The six standard estimators as literal double sums."""
    n = len(y)
    e = y - x * b0
    phi1 = phi12 = phi13 = psi2 = tau2 = ups = 0.0
    psi1 = tau1 = 0.0
    for i in range(n):
        px = 0.0
        for j in range(n):
            if j == i:
                continue
            p2 = P[i, j] ** 2
            px += P[i, j] * x[j]
            phi1 += p2 * e[i] ** 2 * e[j] ** 2
            phi12 += p2 * (x[j] * e[j] * e[i] ** 2 + x[i] * e[i] * e[j] ** 2)
            phi13 += p2 * x[i] * e[i] * x[j] * e[j]
            psi2 += p2 * x[i] * e[i] * x[j] * e[j]
            tau2 += p2 * x[i] ** 2 * x[j] * e[j]
            ups += p2 * x[i] ** 2 * x[j] ** 2
        psi1 += px**2 * e[i] ** 2
        tau1 += px**2 * x[i] * e[i]
    return dict(
        phi1=2 * phi1 / K,
        phi12=phi12 / K,
        phi13=2 * phi13 / K,
        psi=(psi1 + psi2) / K,
        tau=(tau1 + tau2) / K,
        upsilon=2 * ups / K,
    )


def crossfit_gamma_loop(P, y, x, b0, K):
    """The six cross-fit estimators as literal double sums with a dense ``M``.

    ``Upsilon`` uses ``X_i M_i X`` in both factors.
    """
    n = len(y)
    e = y - x * b0
    M = np.eye(n) - P
    Me = [float(M[i] @ e) for i in range(n)]
    Mx = [float(M[i] @ x) for i in range(n)]
    phi1 = phi12 = phi13 = psi2 = tau2 = ups = 0.0
    psi1 = tau1 = 0.0
    for i in range(n):
        px = 0.0
        for j in range(n):
            if j == i:
                continue
            pt = P[i, j] ** 2 / (M[i, i] * M[j, j] + M[i, j] ** 2)
            px += P[i, j] * x[j]
            phi1 += pt * (e[i] * Me[i]) * (e[j] * Me[j])
            phi12 += pt * (Mx[j] * e[j] * e[i] * Me[i] + Mx[i] * e[i] * e[j] * Me[j])
            phi13 += pt * Mx[i] * e[i] * Mx[j] * e[j]
            psi2 += pt * Mx[i] * e[i] * Mx[j] * e[j]
            tau2 += pt * (x[i] * Mx[i]) * (Mx[j] * e[j])
            ups += pt * (x[i] * Mx[i]) * (x[j] * Mx[j])
        psi1 += px**2 * e[i] * Me[i] / M[i, i]
        tau1 += px**2 * (e[i] * Mx[i] / (2 * M[i, i]) + x[i] * Me[i] / (2 * M[i, i]))
    return dict(
        phi1=2 * phi1 / K,
        phi12=phi12 / K,
        phi13=2 * phi13 / K,
        psi=(psi1 + psi2) / K,
        tau=(tau1 + tau2) / K,
        upsilon=2 * ups / K,
    )


def population_gamma_loop(P, sigma2, eta2, gamma, Pi, K):
    """Population variance components from per-observation moments."""
    n = len(sigma2)
    omega = [sum(P[i, j] * Pi[j] for j in range(n) if j != i) for i in range(n)]
    phi1 = phi12 = phi13 = psi = tau = ups = 0.0
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            p2 = P[i, j] ** 2
            phi1 += 2 * p2 * sigma2[i] * sigma2[j]
            phi12 += p2 * (gamma[j] * sigma2[i] + gamma[i] * sigma2[j])
            phi13 += 2 * p2 * gamma[i] * gamma[j]
            psi += p2 * (eta2[i] * sigma2[j] + gamma[i] * gamma[j])
            tau += 2 * p2 * eta2[i] * gamma[j]
            ups += 2 * p2 * eta2[i] * eta2[j]
        psi += omega[i] ** 2 * sigma2[i]
        tau += 2 * omega[i] ** 2 * gamma[i]
        ups += 4 * omega[i] ** 2 * eta2[i]
    return dict(phi1=phi1 / K, phi12=phi12 / K, phi13=phi13 / K, psi=psi / K, tau=tau / K, upsilon=ups / K)


def krs_series_direct(r, terms=50):
    """``r - 1 + exp(-r/2) / S`` with ``S`` summed term by term from factorials."""
    s = sum((-r / 2) ** j / (math.factorial(j) * (1 + 2 * j)) for j in range(terms))
    return r - 1 + math.exp(-r / 2) / s


def krs_closed_form(r):
    """Same quantity through ``S = sqrt(pi/(2r)) erf(sqrt(r/2))`` for ``r > 0``."""
    s = math.sqrt(math.pi / (2 * r)) * math.erf(math.sqrt(r / 2))
    return r - 1 + math.exp(-r / 2) / s


def random_instance(rng, n, K, hetero=True):
    Z = rng.standard_normal((n, K))
    pi = rng.standard_normal(K) * 0.5
    v = rng.standard_normal(n)
    u = 0.5 * v + rng.standard_normal(n)
    if hetero:
        scale = np.exp(0.5 * rng.standard_normal(n))
        u *= scale
    x = Z @ pi + v
    y = 0.3 * x + u
    return Z, y, x
