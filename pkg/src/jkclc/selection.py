"""Minimax-regret choice of the CLC weights.

Given the conditioning statistic ``D`` and the variance bundle, the
noncentrality ``mu_D`` is replaced by a plug-in proxy (``pp`` or ``krs``),
power is simulated on a grid of weights and alternatives, and the weights
with the smallest maximum regret (up to a Monte Carlo slackness band) are
returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError
from .limit import (
    BRACKET_TOL,
    DEFAULT_ABAR,
    MCConfig,
    Weights,
    bracket,
    c_b_sup,
    coeff_c,
    crit_values,
    normal_draws,
    power_table,
    trig_weight_grid,
)
from .stats import StatBundle
from .variance import GammaHat, sigma_d

METHODS = ("pp", "krs")
KRS_MAX_TERMS = 500
KRS_REL_TOL = 1e-14
KRS_CANCELLATION = 1e8


@dataclass(frozen=True)
class SelectionConfig:
    p1: float = 0.01
    p2: float = 1.1
    t_grid: int = 16
    delta_grid_size: int = 31
    mc: MCConfig = field(default_factory=MCConfig)
    abar: float = DEFAULT_ABAR

    def __post_init__(self):
        if not 0 < self.p1 < 1:
            raise ValueError(f"p1 must lie in (0, 1), got {self.p1}")
        if not self.p2 > 1:
            raise ValueError(f"p2 must exceed 1, got {self.p2}")
        if self.t_grid < 2:
            raise ValueError("t_grid must be at least 2")
        if self.delta_grid_size < 1:
            raise ValueError("delta_grid_size must be positive")
        if not self.p1 < self.abar < 1:
            raise ValueError(f"abar must lie in (p1, 1), got {self.abar}")


def _check_sigma(sigma_d_hat: float):
    if not sigma_d_hat > 0:
        raise DegenerateError(f"sigma_D must be positive, got {sigma_d_hat}")


def mu_proxy_pp(d_hat: float, sigma_d_hat: float) -> float:
    """Positive-part proxy ``sigma_D sqrt(max(r - 1, 0))`` with ``r = (D / sigma_D)^2``."""
    _check_sigma(sigma_d_hat)
    r = (d_hat / sigma_d_hat) ** 2
    return sigma_d_hat * math.sqrt(max(r - 1.0, 0.0))


def krs_ratio(r: float) -> tuple[float, bool]:
    """Series-corrected noncentrality ``r_krs`` and whether the fallback ``r - 1`` was used.

    ``r_krs = r - 1 + exp(-r/2) / S`` with
    ``S = sum_j (-r/2)^j / (j! (1 + 2j))``.  The alternating series loses
    all accuracy once its largest term dwarfs the sum; in that regime (or if
    ``S <= 0`` or the terms overflow) the correction is below ``exp(-r/2)`` in size and ``r - 1``
    is returned instead.
    """
    if not r >= 0:
        raise ValueError(f"r must be non-negative, got {r}")
    x = 0.5 * r
    term = 1.0
    total = 1.0
    largest = 1.0
    for j in range(KRS_MAX_TERMS):
        term *= -x / (j + 1) * (1 + 2 * j) / (3 + 2 * j)
        total += term
        largest = max(largest, abs(term))
        if abs(term) < KRS_REL_TOL * abs(total):
            break
    if not math.isfinite(largest) or not total > 0 or largest > KRS_CANCELLATION * total:
        return max(r - 1.0, 0.0), True
    return r - 1.0 + math.exp(-x) / total, False


def mu_proxy_krs(d_hat: float, sigma_d_hat: float) -> float:
    """Proxy ``sigma_D sqrt(r_krs)``; never below :func:`mu_proxy_pp`."""
    _check_sigma(sigma_d_hat)
    r_krs, _ = krs_ratio((d_hat / sigma_d_hat) ** 2)
    return sigma_d_hat * math.sqrt(max(r_krs, 0.0))


def mu_proxy(method: str, d_hat: float, sigma_d_hat: float) -> float:
    if method == "pp":
        return mu_proxy_pp(d_hat, sigma_d_hat)
    if method == "krs":
        return mu_proxy_krs(d_hat, sigma_d_hat)
    raise ValueError(f"method must be one of {METHODS}, got {method!r}")


def lower_bound_a(mu: float, gamma: GammaHat, c_b: float, cmax: float, cfg: SelectionConfig) -> float:
    """Data-dependent lower bound on ``a1``.

    ``min(p1, p2 cmax Phi1 c_B / (Delta*^4 mu^2))`` with
    ``Delta* = Phi1^{1/2} Psi^{-1/2} / rho``; ``mu = 0`` gives ``p1`` and
    ``rho = 0`` (infinite ``Delta*``) gives 0.
    """
    if not cmax > 0:
        raise ValueError(f"cmax must be positive, got {cmax}")
    if mu == 0:
        return cfg.p1
    if gamma.rho == 0:
        return 0.0
    delta_star = math.sqrt(gamma.phi1 / gamma.psi) / gamma.rho
    second = cfg.p2 * cmax * gamma.phi1 * c_b / (delta_star**4 * mu * mu)
    return min(cfg.p1, second)


def weight_grid(lower: float, cfg: SelectionConfig) -> list[Weights]:
    """The ``t_grid^2`` trigonometric weight grid, ascending in ``(t1, t2)``."""
    return [Weights(a1, a2) for a1, a2 in trig_weight_grid(lower, cfg.t_grid, cfg.abar)]


@dataclass(frozen=True)
class MinimaxDiagnostics:
    mu_proxy: float
    sigma_d: float
    lower_bound: float
    cmax: float
    c_b: float
    q_hat: np.ndarray
    q_min: float
    slack: float
    xi_size: int
    chosen_index: int
    grid: np.ndarray
    rho_zero: bool
    krs_fallback: bool

    def as_dict(self) -> dict:
        return {
            "mu_proxy": self.mu_proxy,
            "sigma_d": self.sigma_d,
            "lower_bound": self.lower_bound,
            "cmax": self.cmax,
            "c_b": self.c_b,
            "q_min": self.q_min,
            "slack": self.slack,
            "xi_size": self.xi_size,
            "chosen_index": self.chosen_index,
            "rho_zero": self.rho_zero,
            "krs_fallback": self.krs_fallback,
        }


def delta_grid(beta0: float, B, size: int) -> np.ndarray:
    lo, hi = float(B[0]), float(B[1])
    if not lo <= beta0 <= hi:
        raise ValueError(f"B = [{lo}, {hi}] must contain beta0 = {beta0}")
    return np.linspace(lo, hi, size) - beta0


def minimax_weights(
    bundle: StatBundle,
    gamma: GammaHat,
    beta0: float,
    B,
    method: str,
    cfg: SelectionConfig,
    alpha: float = 0.05,
    n_obs: int | None = None,
    draws: np.ndarray | None = None,
) -> tuple[Weights, MinimaxDiagnostics]:
    """Minimax-regret weights for the CLC test at ``beta0``.

    Parameters
    ----------
    bundle : StatBundle
        Statistics at ``beta0``; only ``d_hat`` is used.
    gamma : GammaHat
        Variance bundle at ``beta0``.
    beta0 : float
        Null value, inside ``B``.
    B : pair of float
        Parameter space; alternatives are ``delta = beta - beta0`` for
        ``cfg.delta_grid_size`` equispaced ``beta`` in ``B``.
    method : {"pp", "krs"}
        Noncentrality proxy.
    cfg : SelectionConfig
    alpha : float
    n_obs : int, optional
        Sample size; adds ``1/n`` to the minimal regret.  ``None`` (limit
        problem) adds nothing.
    draws : ndarray, optional
        ``(R, 2)`` normal draws; generated from ``cfg.mc`` when omitted.

    Returns
    -------
    Weights
        The ``floor(L/2)``-th (1-based) element of the slackness set of
        size ``L``, in grid order.
    MinimaxDiagnostics
    """
    z = normal_draws(cfg.mc) if draws is None else draws
    n_draws = z.shape[0]
    rho = gamma.rho
    deltas = delta_grid(beta0, B, cfg.delta_grid_size)

    sd = sigma_d(gamma)
    krs_fallback = False
    if method == "krs":
        _check_sigma(sd)
        r_krs, krs_fallback = krs_ratio((bundle.d_hat / sd) ** 2)
        f = sd * math.sqrt(max(r_krs, 0.0))
    else:
        f = mu_proxy(method, bundle.d_hat, sd)

    base_grid = trig_weight_grid(0.0, cfg.t_grid, cfg.abar)
    base_crit = crit_values(base_grid[:, 0], base_grid[:, 1], rho, alpha, z)
    cmax = float(base_crit.max())
    c_b = c_b_sup(gamma, deltas)
    lower = lower_bound_a(f, gamma, c_b, cmax, cfg)

    if lower == 0.0:
        grid, crit = base_grid, base_crit
    else:
        grid = trig_weight_grid(lower, cfg.t_grid, cfg.abar)
        crit = crit_values(grid[:, 0], grid[:, 1], rho, alpha, z)
    # where the bracket vanishes both mean shifts diverge, every test has power
    # tending to one and the regret to zero, so such alternatives drop out
    regular = np.abs(bracket(deltas, gamma)) >= BRACKET_TOL
    c1, c2 = coeff_c(deltas[regular], gamma)
    table = power_table(grid, crit, c1 * f, c2 * f, rho, z)  # (delta, w)
    envelope = table.max(axis=1)
    q_hat = (envelope[:, None] - table).max(axis=0)

    q_min = float(q_hat.min()) + (1.0 / n_obs if n_obs else 0.0)
    slack = math.sqrt(max(q_min * (1.0 - q_min), 0.0)) * math.sqrt(2.0 * math.log(math.log(n_draws)) / n_draws)
    xi = np.flatnonzero(q_hat <= q_min + slack)
    idx = int(xi[max(len(xi) // 2, 1) - 1])
    chosen = Weights(grid[idx, 0], grid[idx, 1])
    diag = MinimaxDiagnostics(
        mu_proxy=f,
        sigma_d=sd,
        lower_bound=lower,
        cmax=cmax,
        c_b=c_b,
        q_hat=q_hat,
        q_min=q_min,
        slack=slack,
        xi_size=len(xi),
        chosen_index=idx,
        grid=grid,
        rho_zero=rho == 0,
        krs_fallback=krs_fallback,
    )
    return chosen, diag
