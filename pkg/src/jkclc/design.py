"""Data container, partialling-out of controls and hat-matrix algebra.

All jackknife quantities are built from the projection matrix
``P = Z (Z'Z)^{-1} Z'`` of the instrument matrix.  ``P`` is never stored:
a :class:`ProjectionContext` keeps an orthonormal basis ``U`` of the column
space of ``Z`` (so that ``P = U U'``) and O(n^2) sums are evaluated by
sweeping over row blocks of ``U``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator

import numpy as np
import scipy.linalg

from .errors import DataError, DegenerateError

RANK_TOL = 1e-10
LEVERAGE_TOL = 1e-12
DENSE_P_MAX_N = 2000


@dataclass(frozen=True)
class IVDataset:
    """Outcome ``y``, endogenous regressor ``x``, instruments ``Z`` and optional controls ``W``."""

    y: np.ndarray
    x: np.ndarray
    Z: np.ndarray
    W: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        x = np.asarray(self.x, dtype=float).reshape(-1)
        Z = np.asarray(self.Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        if Z.ndim != 2:
            raise DataError(f"Z must be a matrix, got shape {Z.shape}")
        n = y.shape[0]
        if x.shape[0] != n or Z.shape[0] != n:
            raise DataError(
                f"y, x and Z must have the same number of rows, got {n}, {x.shape[0]}, {Z.shape[0]}"
            )
        K = Z.shape[1]
        if K < 1:
            raise DataError("at least one instrument is required")
        if n <= K:
            raise DataError(f"need n > K, got n={n}, K={K}")
        for name, arr in (("y", y), ("x", x), ("Z", Z)):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} contains non-finite values")
        W = self.W
        if W is not None:
            W = np.asarray(W, dtype=float)
            if W.ndim == 1:
                W = W[:, None]
            if W.shape[0] != n:
                raise DataError(f"W must have {n} rows, got {W.shape[0]}")
            if not np.all(np.isfinite(W)):
                raise DataError("W contains non-finite values")
            if n <= K + W.shape[1]:
                raise DataError(f"need n > K + d, got n={n}, K={K}, d={W.shape[1]}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "W", W)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def K(self) -> int:
        return self.Z.shape[1]


def read_csv(path) -> IVDataset:
    """Load a dataset with columns ``y``, ``x``, ``z1..zK`` and optionally ``w1..wd``."""
    import pandas as pd

    df = pd.read_csv(path)
    for col in ("y", "x"):
        if col not in df.columns:
            raise DataError(f"missing required column '{col}'")

    def numbered(prefix):
        cols = [c for c in df.columns if re.fullmatch(prefix + r"\d+", str(c))]
        return sorted(cols, key=lambda c: int(str(c)[1:]))

    zcols = numbered("z")
    wcols = numbered("w")
    if not zcols:
        raise DataError("missing instrument columns 'z1'..'zK'")
    used = ["y", "x", *zcols, *wcols]
    missing = df[used].isna().any()
    if missing.any():
        bad = ", ".join(str(c) for c in missing[missing].index)
        raise DataError(f"missing values in column(s): {bad}")
    try:
        arr = df[used].to_numpy(dtype=float)
    except ValueError as exc:
        raise DataError(f"non-numeric data: {exc}") from None
    k = len(zcols)
    return IVDataset(
        y=arr[:, 0],
        x=arr[:, 1],
        Z=arr[:, 2 : 2 + k],
        W=arr[:, 2 + k :] if wcols else None,
    )


def partial_out(data: IVDataset) -> IVDataset:
    """Residualize ``y``, ``x`` and every column of ``Z`` on the controls ``W``.

    Instrument columns that become numerically zero (norm below
    ``1e-10 * sqrt(n)``) are dropped.  Without controls the input is
    returned unchanged.
    """
    if data.W is None:
        return data
    W = data.W
    n, d = W.shape
    if n <= d:
        raise DataError(f"need n > d, got n={n}, d={d}")
    Q, R, _ = scipy.linalg.qr(W, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[0] == 0 or np.any(diag < RANK_TOL * diag[0]):
        raise DataError("controls collinear")

    def resid(v):
        return v - Q @ (Q.T @ v)

    Z = resid(data.Z)
    keep = np.linalg.norm(Z, axis=0) >= RANK_TOL * np.sqrt(n)
    if not keep.any():
        raise DataError("all instruments vanish after partialling out the controls")
    return IVDataset(y=resid(data.y), x=resid(data.x), Z=Z[:, keep], W=None)


@dataclass(frozen=True)
class ProjectionContext:
    """Orthonormal factor ``U`` of the instrument space, with ``P = U U'``.

    Immutable once built; safe to share between readers.
    """

    U: np.ndarray
    leverages: np.ndarray
    block_size: int = 256

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def K(self) -> int:
        return self.U.shape[1]

    @property
    def max_leverage(self) -> float:
        return float(self.leverages.max())

    def p_row(self, i: int) -> np.ndarray:
        if not 0 <= i < self.n:
            raise IndexError(f"row index {i} out of range for n={self.n}")
        return self.U @ self.U[i]

    def m_row(self, i: int) -> np.ndarray:
        row = -self.p_row(i)
        row[i] += 1.0
        return row

    def project(self, v: np.ndarray) -> np.ndarray:
        """``P v`` for a vector or an (n, m) matrix."""
        return self.U @ (self.U.T @ v)

    def quad_form(self, a: np.ndarray, b: np.ndarray) -> float:
        """Jackknife form ``sum_i sum_{j != i} a_i P_ij b_j / sqrt(K)``."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.shape != (self.n,) or b.shape != (self.n,):
            raise DataError(f"vectors must have length {self.n}, got {a.shape} and {b.shape}")
        full = (self.U.T @ a) @ (self.U.T @ b)
        return float((full - np.sum(self.leverages * a * b)) / np.sqrt(self.K))

    def blocks(self) -> Iterator[tuple[slice, np.ndarray]]:
        """Yield ``(rows, P[rows, :])`` over consecutive row blocks."""
        for start in range(0, self.n, self.block_size):
            rows = slice(start, min(start + self.block_size, self.n))
            yield rows, self.U[rows] @ self.U.T

    def dense_p(self) -> np.ndarray:
        if self.n > DENSE_P_MAX_N:
            raise MemoryError(f"refusing to materialize P for n={self.n} > {DENSE_P_MAX_N}")
        return self.U @ self.U.T


def build_projection(Z: np.ndarray, block_size: int = 256) -> ProjectionContext:
    """Factor ``Z`` by column-pivoted QR and return the projection context.

    Raises
    ------
    DataError
        If ``Z`` is rank deficient; the message lists the offending columns.
    DegenerateError
        If some leverage ``P_ii`` is numerically one.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if block_size < 1:
        raise ValueError("block_size must be positive")
    Q, R, piv = scipy.linalg.qr(Z, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag >= RANK_TOL * diag[0])) if diag[0] > 0 else 0
    if rank < Z.shape[1]:
        bad = sorted(int(c) for c in piv[rank:])
        raise DataError(f"instrument matrix is rank deficient; offending columns: {bad}")
    U = np.ascontiguousarray(Q)
    h = np.einsum("ij,ij->i", U, U)
    if np.any(h >= 1.0 - LEVERAGE_TOL):
        raise DegenerateError("leverage equals one, requirement P_ii < 1 violated")
    return ProjectionContext(U=U, leverages=h, block_size=int(block_size))


def quad_form(ctx: ProjectionContext, a, b) -> float:
    return ctx.quad_form(a, b)


def p_row(ctx: ProjectionContext, i: int) -> np.ndarray:
    return ctx.p_row(i)


def m_row(ctx: ProjectionContext, i: int) -> np.ndarray:
    return ctx.m_row(i)
