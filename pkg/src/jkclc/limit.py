"""The Gaussian limit problem behind the CLC test.

With ``Z1 = AR`` and ``Z2 = LM*`` independent standard normals under the
null, the CLC statistic is

    a1 Z1^2 + a2 (rho Z1 + sqrt(1 - rho^2) Z2)^2 + (1 - a1 - a2) Z2^2,

a quadratic form whose ``1 - alpha`` quantile ``C_alpha(a1, a2; rho)`` is
computed by Monte Carlo.  Under a local alternative the two normals are
shifted by ``(C1(delta), C2(delta)) * mu_D``.  All Monte Carlo quantities
share a single ``R x 2`` draw matrix per seed (common random numbers), so
differences across weights and alternatives are smooth in the inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import stats

from ._kernels import power_counts, quantile_rows
from .variance import GammaHat

DEFAULT_ABAR = 0.999
BRACKET_TOL = 1e-10


@dataclass(frozen=True)
class Weights:
    """Combination weights on ``AR^2`` and ``LM^2``; ``LM*^2`` gets ``1 - a1 - a2``."""

    a1: float
    a2: float

    def __post_init__(self):
        object.__setattr__(self, "a1", float(self.a1))
        object.__setattr__(self, "a2", float(self.a2))
        if not (self.a1 >= 0 and self.a2 >= 0):
            raise ValueError(f"weights must be non-negative, got ({self.a1}, {self.a2})")
        if not self.a1 + self.a2 < 1:
            raise ValueError(f"a1 + a2 must be below 1, got {self.a1 + self.a2}")


@dataclass(frozen=True)
class MCConfig:
    """Monte Carlo settings: number of draws, seed and antithetic pairing ``Z2 -> -Z2``."""

    draws: int = 2000
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if int(self.draws) != self.draws or self.draws < 1000:
            raise ValueError(f"draws must be an integer >= 1000, got {self.draws}")
        if self.antithetic and self.draws % 2:
            raise ValueError("antithetic pairing needs an even number of draws")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def normal_draws(mc: MCConfig) -> np.ndarray:
    """The read-only ``(R, 2)`` standard-normal matrix for ``mc``."""
    rng = np.random.default_rng(int(mc.seed))
    if mc.antithetic:
        half = rng.standard_normal((mc.draws // 2, 2))
        z = np.concatenate([half, half * np.array([1.0, -1.0])])
    else:
        z = rng.standard_normal((mc.draws, 2))
    z.setflags(write=False)
    return z


def _check_level(rho: float, alpha: float):
    if not abs(rho) < 1:
        raise ValueError(f"|rho| must be below 1, got {rho}")
    if not 0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 0.5), got {alpha}")


def _order_index(alpha: float, n_draws: int) -> int:
    """0-based index of the ``ceil((1 - alpha) R)``-th order statistic."""
    k = math.ceil((1.0 - alpha) * n_draws - 1e-9)
    return min(max(k, 1), n_draws) - 1


def combination_statistic(z: np.ndarray, a1, a2, rho: float) -> np.ndarray:
    """Per-draw statistic; broadcasting ``a1``/``a2`` of shape ``(W, 1)`` gives a ``(W, R)`` array."""
    u1, u2 = z[:, 0], z[:, 1]
    base = u2 * u2
    t = rho * u1 + math.sqrt(1.0 - rho * rho) * u2
    return base + a1 * (u1 * u1 - base) + a2 * (t * t - base)


def crit_values(a1, a2, rho: float, alpha: float, z: np.ndarray, exact_central: bool = True) -> np.ndarray:
    """Critical values for arrays of weights sharing the draw matrix ``z``.

    When ``exact_central`` is set, weights whose statistic is exactly
    ``Z2^2`` (``a1 = 0`` and ``a2 rho = 0``) get the exact chi-square(1)
    quantile, so the CLC test with those weights coincides with the LM* test.
    """
    _check_level(rho, alpha)
    a1 = np.ascontiguousarray(np.atleast_1d(np.asarray(a1, dtype=float)))
    a2 = np.ascontiguousarray(np.atleast_1d(np.asarray(a2, dtype=float)))
    out = quantile_rows(np.ascontiguousarray(z), float(rho), a1, a2, _order_index(alpha, z.shape[0]))
    if exact_central:
        central = (a1 == 0) & (a2 * rho == 0)
        out[central] = _chi2_quantile(alpha)
    return out


@lru_cache(maxsize=64)
def _chi2_quantile(alpha: float) -> float:
    return float(stats.chi2.ppf(1.0 - alpha, 1))


def crit_value(
    w: Weights, rho: float, alpha: float, mc: MCConfig, draws: np.ndarray | None = None,
    exact_central: bool = True,
) -> float:
    """Simulated ``1 - alpha`` quantile ``C_alpha(a1, a2; rho)``.

    Parameters
    ----------
    w : Weights
    rho : float
        Correlation between AR and LM, ``|rho| < 1``.
    alpha : float
        Level in ``(0, 0.5)``.
    mc : MCConfig
        Seeds the draw matrix unless ``draws`` is given.
    draws : ndarray, optional
        Pre-generated ``(R, 2)`` draws (common random numbers).
    exact_central : bool
        Use the exact chi-square(1) quantile when the statistic is ``Z2^2``.
    """
    z = normal_draws(mc) if draws is None else draws
    return float(crit_values(w.a1, w.a2, rho, alpha, z, exact_central)[0])


def trig_weight_grid(lower: float = 0.0, t_grid: int = 16, abar: float = DEFAULT_ABAR) -> np.ndarray:
    """``(t_grid^2, 2)`` array of ``(a1, a2)`` ordered ascending in ``(t1, t2)``.

    ``a1 = sin^2 t1`` with ``t1`` spanning ``[arcsin sqrt(lower), pi/2]`` and
    ``a2 = cos^2 t1 sin^2 t2`` with ``t2`` spanning ``[0, pi/2]``.  Points
    beyond ``a1 + a2 = abar`` are pulled back along ``a2``.
    """
    if not 0 <= lower < 1:
        raise ValueError(f"lower must lie in [0, 1), got {lower}")
    if t_grid < 2:
        raise ValueError("t_grid must be at least 2")
    if not 0 < abar < 1:
        raise ValueError("abar must lie in (0, 1)")
    t1 = np.linspace(math.asin(math.sqrt(lower)), math.pi / 2, t_grid)
    t2 = np.linspace(0.0, math.pi / 2, t_grid)
    T1, T2 = np.meshgrid(t1, t2, indexing="ij")
    a1 = np.sin(T1).ravel() ** 2
    a2 = (np.cos(T1) ** 2 * np.sin(T2) ** 2).ravel()
    # sin^2(arcsin(sqrt(l))) can land a hair below l
    a1 = np.clip(a1, lower, abar)
    a2 = np.clip(np.minimum(a2, abar - a1), 0.0, None)
    return np.column_stack([a1, a2])


def crit_value_max(
    rho: float, alpha: float, mc: MCConfig, a_grid=None, draws: np.ndarray | None = None,
) -> float:
    """``sup`` of ``C_alpha(a1, a2; rho)`` over a weight grid (default: the 16x16 grid with lower bound 0)."""
    grid = trig_weight_grid() if a_grid is None else _as_pairs(a_grid)
    if grid.shape[0] == 0:
        raise ValueError("empty weight grid")
    z = normal_draws(mc) if draws is None else draws
    return float(crit_values(grid[:, 0], grid[:, 1], rho, alpha, z).max())


def _as_pairs(a_grid) -> np.ndarray:
    if isinstance(a_grid, np.ndarray):
        return a_grid.reshape(-1, 2).astype(float)
    return np.array([[w.a1, w.a2] if isinstance(w, Weights) else list(w) for w in a_grid], dtype=float).reshape(-1, 2)


def bracket(delta, gamma: GammaHat):
    """``1 - (delta^2, delta) S^{-1} (Phi13, tau)'``."""
    c1, c2 = gamma.projection_coef()
    delta = np.asarray(delta, dtype=float)
    return 1.0 - (delta * delta * c1 + delta * c2)


def coeff_c(delta, gamma: GammaHat):
    """Deviation coefficients ``(C1(delta), C2(delta))`` of ``AR`` and ``LM*`` under the alternative.

    Accepts a scalar or an array of ``delta``.

    Raises
    ------
    ZeroDivisionError
        If the bracket is below ``1e-10`` in absolute value.
    """
    d = np.asarray(delta, dtype=float)
    br = bracket(d, gamma)
    if np.any(np.abs(br) < BRACKET_TOL):
        bad = d[np.abs(br) < BRACKET_TOL] if d.ndim else d
        raise ZeroDivisionError(f"deviation coefficient singular at delta={np.ravel(bad)[0]:.6g}")
    rho = gamma.rho
    inv_phi = 1.0 / math.sqrt(gamma.phi1)
    inv_psi = 1.0 / math.sqrt(gamma.psi)
    c1 = inv_phi * d * d / br
    c2 = (inv_psi * d - rho * inv_phi * d * d) / br / math.sqrt(1.0 - rho * rho)
    if d.ndim == 0:
        return float(c1), float(c2)
    return c1, c2


def c_b_sup(gamma: GammaHat, delta_grid) -> float:
    """``c_B = max`` over the grid of the squared bracket."""
    grid = np.atleast_1d(np.asarray(delta_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("empty delta grid")
    return float(np.max(bracket(grid, gamma) ** 2))


def power_table(
    weights: np.ndarray, crit: np.ndarray, m1, m2, rho: float, draws: np.ndarray,
) -> np.ndarray:
    """Rejection frequencies, shape ``(len(m1), len(weights))``, for mean shifts ``(m1, m2)``."""
    w = np.ascontiguousarray(weights, dtype=float).reshape(-1, 2)
    counts = power_counts(
        np.ascontiguousarray(draws),
        np.atleast_1d(np.asarray(m1, dtype=float)),
        np.atleast_1d(np.asarray(m2, dtype=float)),
        float(rho),
        np.ascontiguousarray(w[:, 0]),
        np.ascontiguousarray(w[:, 1]),
        np.ascontiguousarray(crit, dtype=float),
    )
    return counts / draws.shape[0]


def power_estimate(
    w: Weights, delta: float, mu_proxy: float, gamma: GammaHat, alpha: float, mc: MCConfig,
    draws: np.ndarray | None = None, crit: float | None = None,
) -> float:
    """Monte Carlo power of the ``w``-combination at ``delta`` with ``mu_D`` replaced by ``mu_proxy``."""
    z = normal_draws(mc) if draws is None else draws
    if crit is None:
        crit = crit_value(w, gamma.rho, alpha, mc, draws=z)
    c1, c2 = coeff_c(delta, gamma)
    table = power_table(
        np.array([[w.a1, w.a2]]), np.array([crit]), [c1 * mu_proxy], [c2 * mu_proxy], gamma.rho, z
    )
    return float(table[0, 0])


def eig2(w: Weights, rho: float):
    """Eigendecomposition of the 2x2 matrix of the combination statistic.

    Returns ``(nu1, nu2, U)`` with ``nu1 >= nu2``, ``U`` orthonormal with
    eigenvectors as columns, and ``U diag(nu) U' = M``.  An already diagonal
    matrix with equal entries gives ``U = I``.
    """
    if not abs(rho) < 1:
        raise ValueError(f"|rho| must be below 1, got {rho}")
    a1, a2 = w.a1, w.a2
    m11 = a1 + a2 * rho * rho
    m22 = 1.0 - m11
    m12 = a2 * rho * math.sqrt(1.0 - rho * rho)
    half_diff = 0.5 * (m11 - m22)
    radius = math.hypot(half_diff, m12)
    nu1 = 0.5 + radius
    nu2 = 0.5 - radius
    theta = 0.5 * math.atan2(2.0 * m12, m11 - m22)
    c, s = math.cos(theta), math.sin(theta)
    return nu1, max(nu2, 0.0), np.array([[c, -s], [s, c]])


def weights_matrix(w: Weights, rho: float) -> np.ndarray:
    m11 = w.a1 + w.a2 * rho * rho
    m12 = w.a2 * rho * math.sqrt(1.0 - rho * rho)
    return np.array([[m11, m12], [m12, 1.0 - m11]])


def as_weights(pairs: Sequence) -> list[Weights]:
    return [Weights(a1, a2) for a1, a2 in pairs]
