"""Jackknife AR, LM and orthogonalized LM statistics for a null value ``beta0``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .design import IVDataset, ProjectionContext
from .errors import DataError, DegenerateError
from .variance import RHO_BOUND, GammaHat


@dataclass(frozen=True)
class QTriplet:
    """``(Q_ee, Q_Xe, Q_XX)`` evaluated at the null residual ``e = y - x beta0``."""

    q_ee: float
    q_xe: float
    q_xx: float


@dataclass(frozen=True)
class StatBundle:
    ar: float
    lm: float
    lm_star: float
    d_hat: float
    f_tilde: float
    q: QTriplet
    gamma: GammaHat


def q_triplet(ctx: ProjectionContext, data: IVDataset, beta0: float) -> QTriplet:
    if data.W is not None:
        raise DataError("partial out the controls before computing statistics")
    e = data.y - data.x * beta0
    return QTriplet(
        q_ee=ctx.quad_form(e, e),
        q_xe=ctx.quad_form(data.x, e),
        q_xx=ctx.quad_form(data.x, data.x),
    )


def bundle_from_q(q: QTriplet, gamma: GammaHat) -> StatBundle:
    """Standardize a Q-triplet with a given variance bundle.

    Raises
    ------
    DegenerateError
        If the ``(Phi1, Phi12; Phi12, Psi)`` block is not positive definite
        or ``|rho|`` reaches ``1 - 1e-8``.
    """
    if not (gamma.phi1 > 0 and gamma.psi > 0):
        raise DegenerateError("gamma block not PD")
    c1, c2 = gamma.projection_coef()  # raises on a non-PD block
    rho = gamma.rho
    if not abs(rho) < RHO_BOUND:
        raise DegenerateError(f"degenerate orthogonalization (|rho|={abs(rho):.12f})")
    if not gamma.upsilon > 0:
        raise DegenerateError("degenerate variance estimate (upsilon <= 0)")
    ar = q.q_ee / math.sqrt(gamma.phi1)
    lm = q.q_xe / math.sqrt(gamma.psi)
    return StatBundle(
        ar=ar,
        lm=lm,
        lm_star=(lm - rho * ar) / math.sqrt(1.0 - rho * rho),
        d_hat=q.q_xx - (q.q_ee * c1 + q.q_xe * c2),
        f_tilde=q.q_xx / gamma.upsilon,
        q=q,
        gamma=gamma,
    )


def stat_bundle(ctx: ProjectionContext, data: IVDataset, beta0: float, gamma: GammaHat) -> StatBundle:
    """AR, LM, LM*, the conditioning statistic ``D`` and ``F = Q_XX / Upsilon``."""
    return bundle_from_q(q_triplet(ctx, data, beta0), gamma)


def synthetic_bundle(ar: float, lm: float, q_xx: float, gamma: GammaHat) -> StatBundle:
    """Bundle from standardized statistics, used where only ``(AR, LM)`` are simulated."""
    q = QTriplet(q_ee=ar * math.sqrt(gamma.phi1), q_xe=lm * math.sqrt(gamma.psi), q_xx=q_xx)
    return bundle_from_q(q, gamma)


def q_triplet_array(path, beta0: np.ndarray) -> np.ndarray:
    """Vectorized ``(Q_ee, Q_Xe, Q_XX)`` over many null values from a precomputed gamma path."""
    b = np.asarray(beta0, dtype=float)
    q_ee = path.q_yy - 2.0 * b * path.q_xy + b * b * path.q_xx
    return np.stack([q_ee, path.q_xy - b * path.q_xx, np.full_like(b, path.q_xx)], axis=-1)
