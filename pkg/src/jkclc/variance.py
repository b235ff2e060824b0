"""Variance components of the jackknife quadratic forms.

Two estimator families are provided for
``gamma(b0) = (Phi1, Phi12, Phi13, Psi, tau, Upsilon, rho)``:

* ``standard``: weights ``P_ij^2`` on products of raw residuals;
* ``crossfit``: weights ``P_ij^2 / (M_ii M_jj + M_ij^2)`` on products of
  residuals with leave-out residuals ``M_i e``.

Every component is a double sum ``sum_i sum_{j!=i} G_ij a_i b_j`` (plus a
few single sums) where ``a`` and ``b`` are elementwise products of ``y``,
``x`` and their projections.  Since ``e(b0) = y - x b0`` is linear in
``b0``, the vectors are polynomials in ``b0`` with coefficients in a fixed
small basis, so a single O(n^2) sweep computing ``B' G B`` for the basis
``B`` gives the components at every ``b0``.  :class:`GammaPath` holds that
sweep; :func:`standard_gamma` and :func:`crossfit_gamma` evaluate it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .design import IVDataset, ProjectionContext
from .errors import DataError, DegenerateError

RHO_BOUND = 1.0 - 1e-8
PSD_TOL = 1e-10
CROSSFIT_DENOM_TOL = 1e-14

VARIANCE_FAMILIES = ("standard", "crossfit")


@dataclass(frozen=True)
class GammaHat:
    """Variance bundle of ``(Q_ee, Q_Xe, Q_XX)``; ``rho`` is derived from the other fields."""

    phi1: float
    phi12: float
    phi13: float
    psi: float
    tau: float
    upsilon: float
    rho: float = field(init=False)

    def __post_init__(self):
        for name in ("phi1", "phi12", "phi13", "psi", "tau", "upsilon"):
            object.__setattr__(self, name, float(getattr(self, name)))
        prod = self.phi1 * self.psi
        rho = self.phi12 / math.sqrt(prod) if prod > 0 else math.nan
        object.__setattr__(self, "rho", rho)

    def validate(self) -> "GammaHat":
        """Raise :class:`DegenerateError` unless the bundle is usable by the tests."""
        if not all(math.isfinite(v) for v in self.as_tuple()):
            raise DegenerateError("degenerate variance estimate (non-finite component)")
        if self.phi1 <= 0 or self.psi <= 0 or self.upsilon <= 0:
            raise DegenerateError(
                "degenerate variance estimate "
                f"(phi1={self.phi1:.3g}, psi={self.psi:.3g}, upsilon={self.upsilon:.3g})"
            )
        if not abs(self.rho) < RHO_BOUND:
            raise DegenerateError(f"degenerate orthogonalization (|rho|={abs(self.rho):.12f})")
        return self

    def as_tuple(self) -> tuple[float, ...]:
        return (self.phi1, self.phi12, self.phi13, self.psi, self.tau, self.upsilon, self.rho)

    def as_dict(self) -> dict:
        return dict(zip(("phi1", "phi12", "phi13", "psi", "tau", "upsilon", "rho"), self.as_tuple()))

    def solve_block(self, v1, v2):
        """Return ``S^{-1} (v1, v2)'`` for ``S = [[phi1, phi12], [phi12, psi]]``."""
        det = self.phi1 * self.psi - self.phi12**2
        if not (self.phi1 > 0 and det > 0):
            raise DegenerateError("gamma block not PD")
        return (self.psi * v1 - self.phi12 * v2) / det, (self.phi1 * v2 - self.phi12 * v1) / det

    def projection_coef(self):
        """Coefficients of ``Q_XX`` on ``(Q_ee, Q_Xe)``: ``S^{-1} (phi13, tau)'``."""
        return self.solve_block(self.phi13, self.tau)


def sigma_d(gamma: GammaHat) -> float:
    """Standard deviation of the conditioning statistic ``D``.

    The Schur complement ``Upsilon - (phi13, tau) S^{-1} (phi13, tau)'`` is
    clamped at zero only when it is within ``-1e-10`` of zero.
    """
    c1, c2 = gamma.projection_coef()
    schur = gamma.upsilon - (gamma.phi13 * c1 + gamma.tau * c2)
    if schur < -PSD_TOL:
        raise DegenerateError(f"gamma not PSD (Schur complement {schur:.3g})")
    return math.sqrt(max(schur, 0.0))


def _kernel_apply(ctx: ProjectionContext, B: np.ndarray, crossfit: bool) -> np.ndarray:
    """``G @ B`` where ``G_ij = P_ij^2`` (or its cross-fit reweighting) off the diagonal, 0 on it."""
    out = np.empty_like(B)
    m_diag = 1.0 - ctx.leverages
    for rows, block in ctx.blocks():
        G = block * block
        if crossfit:
            denom = m_diag[rows, None] * m_diag[None, :] + G
            if denom.min() < CROSSFIT_DENOM_TOL:
                raise DegenerateError("cross-fit denominator vanishes")
            G /= denom
        local = np.arange(rows.stop - rows.start)
        G[local, local + rows.start] = 0.0
        out[rows] = G @ B
    return out


class GammaPath:
    """Variance components of one dataset as polynomials in the null value ``b0``.

    Parameters
    ----------
    ctx : ProjectionContext
        Projection of the (partialled) instruments.
    data : IVDataset
        Dataset without controls.
    variance : {"standard", "crossfit"}
        Estimator family.
    """

    def __init__(self, ctx: ProjectionContext, data: IVDataset, variance: str = "crossfit"):
        if variance not in VARIANCE_FAMILIES:
            raise ValueError(f"variance must be one of {VARIANCE_FAMILIES}, got {variance!r}")
        if data.W is not None:
            raise DataError("partial out the controls before computing variance components")
        if data.n != ctx.n:
            raise DataError(f"dataset has {data.n} rows but the projection has {ctx.n}")
        self.variance = variance
        self.K = ctx.K
        y, x = data.y, data.x
        h = ctx.leverages
        Px, Py = ctx.project(np.column_stack([x, y])).T
        w = Px - h * x  # sum_{j != i} P_ij x_j
        if variance == "standard":
            basis = np.column_stack([y * y, x * y, x * x])
            self._S = basis.T @ _kernel_apply(ctx, basis, crossfit=False)
            self._L = basis.T @ (w * w)
        else:
            if np.any(1.0 - h < 1e-8):
                raise DegenerateError("M_ii below 1e-8")
            ry, rx = y - Py, x - Px
            basis = np.column_stack([y * ry, y * rx, x * ry, x * rx])
            self._S = basis.T @ _kernel_apply(ctx, basis, crossfit=True)
            self._L = basis.T @ (w * w / (1.0 - h))
        self._S = 0.5 * (self._S + self._S.T)
        self.q_yy = ctx.quad_form(y, y)
        self.q_xy = ctx.quad_form(x, y)
        self.q_xx = ctx.quad_form(x, x)
        self.n = data.n

    def _coefs(self, b0: float):
        if self.variance == "standard":
            u = np.array([1.0, -2.0 * b0, b0 * b0])  # e^2
            v = np.array([0.0, 1.0, -b0])  # x e
            c = np.array([0.0, 0.0, 1.0])  # x^2
            psi_single = self._L @ u
            tau_single = self._L @ v
        else:
            u = np.array([1.0, -b0, -b0, b0 * b0])  # e_i M_i e
            v = np.array([0.0, 1.0, 0.0, -b0])  # e_i M_i x
            c = np.array([0.0, 0.0, 0.0, 1.0])  # x_i M_i x
            psi_single = self._L @ u
            tau_single = 0.5 * (self._L @ np.array([0.0, 1.0, 1.0, -2.0 * b0]))
        return u, v, c, psi_single, tau_single

    def at(self, b0: float, validate: bool = True) -> GammaHat:
        u, v, c, psi_single, tau_single = self._coefs(float(b0))
        S, K = self._S, self.K
        gamma = GammaHat(
            phi1=2.0 * (u @ S @ u) / K,
            phi12=2.0 * (u @ S @ v) / K,
            phi13=2.0 * (v @ S @ v) / K,
            psi=(psi_single + v @ S @ v) / K,
            tau=(tau_single + c @ S @ v) / K,
            upsilon=2.0 * (c @ S @ c) / K,
        )
        return gamma.validate() if validate else gamma

    def q_at(self, b0: float) -> tuple[float, float, float]:
        """``(Q_ee, Q_Xe, Q_XX)`` at ``b0``."""
        b0 = float(b0)
        q_ee = self.q_yy - 2.0 * b0 * self.q_xy + b0 * b0 * self.q_xx
        return q_ee, self.q_xy - b0 * self.q_xx, self.q_xx


def gamma_path(ctx: ProjectionContext, data: IVDataset, variance: str = "crossfit") -> GammaPath:
    return GammaPath(ctx, data, variance)


def standard_gamma(ctx: ProjectionContext, data: IVDataset, beta0: float) -> GammaHat:
    """Standard (non-cross-fit) estimator of ``gamma(beta0)``."""
    return GammaPath(ctx, data, "standard").at(beta0)


def crossfit_gamma(ctx: ProjectionContext, data: IVDataset, beta0: float) -> GammaHat:
    """Cross-fit estimator of ``gamma(beta0)`` using leave-out residuals ``M_i e / M_ii``."""
    return GammaPath(ctx, data, "crossfit").at(beta0)
