"""Simulation harnesses: the Gaussian limit experiment and calibrated Poisson designs.

All randomness is derived from ``numpy.random.SeedSequence(seed,
spawn_key=...)`` per replication, so results do not depend on the number of
worker processes or on scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy import special, stats

from .design import IVDataset, ProjectionContext, build_projection, partial_out
from .errors import DataError, DegenerateError
from .inference import (
    GammaPath,
    bundle_at,
    confidence_interval,
    decide_clc,
    decide_simple,
    jive_wald,
    make_decider,
    two_step_test,
)
from .limit import MCConfig, normal_draws
from .selection import SelectionConfig
from .stats import QTriplet, bundle_from_q
from .variance import GammaHat, _kernel_apply

LIMIT_TESTS = ("ar", "lm", "lm_star", "clc_pp", "clc_krs")
DGP_TESTS = ("ar", "lm", "lm_star", "clc_pp", "clc_krs", "two_step")
POWER_COLUMNS = ["test", "beta", "rejection_rate", "reps", "mc_se"]


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def _mc_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# limit experiment


def limit_base_gamma(rho: float) -> GammaHat:
    """``Phi1 = Psi = Upsilon = 1`` and ``Phi12 = Phi13 = tau = rho``."""
    return GammaHat(1.0, rho, rho, 1.0, rho, 1.0)


def gamma_at_null(base: GammaHat, delta: float) -> GammaHat:
    """Variance components at ``beta0`` given those at the true ``beta`` and ``delta = beta - beta0``."""
    d = float(delta)
    ups, tau, psi, p13, p12, p1 = base.upsilon, base.tau, base.psi, base.phi13, base.phi12, base.phi1
    out = GammaHat(
        phi1=d**4 * ups + 4 * d**3 * tau + d**2 * (4 * psi + 2 * p13) + 4 * d * p12 + p1,
        phi12=d**3 * ups + 3 * d**2 * tau + d * (2 * psi + p13) + p12,
        phi13=d**2 * ups + 2 * d * tau + p13,
        psi=d**2 * ups + 2 * d * tau + psi,
        tau=d * ups + tau,
        upsilon=ups,
    )
    if not (out.phi1 > 0 and out.psi > 0):
        raise DegenerateError(f"gamma_at_null: non-positive phi1/psi at delta={d}")
    return out


def lm_star_blind_spots(base: GammaHat) -> np.ndarray:
    """Real ``delta`` at which the LM* mean vanishes, i.e. ``delta = Delta*(beta0)``.

    Solves ``tau d^3 + (2 Psi + Phi13) d^2 + 3 Phi12 d + Phi1 = 0``, sorted by ``|d|``.
    """
    roots = np.roots([base.tau, 2 * base.psi + base.phi13, 3 * base.phi12, base.phi1])
    real = np.real(roots[np.abs(np.imag(roots)) < 1e-9])
    return real[np.argsort(np.abs(real))]


@dataclass(frozen=True)
class LimitSimConfig:
    rho: float
    conc: float
    reps: int = 2000
    alpha: float = 0.05
    seed: int = 0
    beta0: float = 0.0
    beta_grid: tuple | None = None
    grid_points: int = 31
    mc_draws: int = 2000
    p1: float = 0.01
    p2: float = 1.1
    t_grid: int = 16
    delta_grid_size: int = 31
    tests: tuple = LIMIT_TESTS
    threads: int = 1

    def __post_init__(self):
        if not abs(self.rho) < 1:
            raise ValueError(f"|rho| must be below 1, got {self.rho}")
        if not self.conc > 0:
            raise ValueError(f"concentration must be positive, got {self.conc}")
        if self.reps < 1:
            raise ValueError("reps must be positive")
        unknown = set(self.tests) - set(LIMIT_TESTS)
        if unknown:
            raise ValueError(f"unknown tests {sorted(unknown)}")
        lo, hi = self.B
        if not lo <= self.beta0 <= hi:
            raise ValueError("beta0 must lie in B")

    @property
    def B(self) -> tuple[float, float]:
        return (-6.0 / self.conc, 6.0 / self.conc)

    @property
    def betas(self) -> np.ndarray:
        if self.beta_grid is not None:
            return np.asarray(self.beta_grid, dtype=float)
        return np.linspace(*self.B, self.grid_points)

    def selection(self, seed: int) -> SelectionConfig:
        return SelectionConfig(
            p1=self.p1, p2=self.p2, t_grid=self.t_grid, delta_grid_size=self.delta_grid_size,
            mc=MCConfig(self.mc_draws, seed),
        )


def _limit_chol(rho: float) -> np.ndarray:
    g = limit_base_gamma(rho)
    cov = np.array([[g.phi1, g.phi12, g.phi13], [g.phi12, g.psi, g.tau], [g.phi13, g.tau, g.upsilon]])
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise DegenerateError("limit covariance is not positive definite") from None


def limit_q(cfg: LimitSimConfig, beta: float, beta0: float, eps: np.ndarray) -> np.ndarray:
    """``(Q_ee, Q_Xe, Q_XX)`` at ``beta0`` from standard normals ``eps`` of shape ``(..., 3)``."""
    q = eps @ _limit_chol(cfg.rho).T
    q[..., 2] += cfg.conc
    d = beta - beta0
    out = np.empty_like(q)
    out[..., 0] = q[..., 0] + 2 * d * q[..., 1] + d * d * q[..., 2]
    out[..., 1] = q[..., 1] + d * q[..., 2]
    out[..., 2] = q[..., 2]
    return out


def draw_limit_statistics(cfg: LimitSimConfig, beta: float, beta0: float, size: int = 10_000, rng=None):
    """``(AR, LM)`` samples of the limit experiment at truth ``beta`` and null ``beta0``."""
    rng = _stream(cfg.seed, 0) if rng is None else rng
    g = gamma_at_null(limit_base_gamma(cfg.rho), beta - beta0)
    q = limit_q(cfg, beta, beta0, rng.standard_normal((size, 3)))
    return q[:, 0] / math.sqrt(g.phi1), q[:, 1] / math.sqrt(g.psi)


def _limit_chunk(cfg: LimitSimConfig, reps: range) -> np.ndarray:
    betas = cfg.betas
    base = limit_base_gamma(cfg.rho)
    gammas = [gamma_at_null(base, b - cfg.beta0) for b in betas]
    counts = np.zeros((len(cfg.tests), len(betas)), dtype=np.int64)
    for rep in reps:
        eps = _stream(cfg.seed, rep, 0).standard_normal(3)
        sel = cfg.selection(_mc_seed(cfg.seed, rep, 1))
        z = normal_draws(sel.mc) if any(t.startswith("clc") for t in cfg.tests) else None
        for j, (beta, g) in enumerate(zip(betas, gammas)):
            b = bundle_from_q(QTriplet(*limit_q(cfg, beta, cfg.beta0, eps.copy())), g)
            for t, name in enumerate(cfg.tests):
                if name.startswith("clc"):
                    res = decide_clc(b, cfg.beta0, cfg.B, cfg.alpha, name[4:], sel, n_obs=None, draws=z)
                else:
                    res = decide_simple(name, b, cfg.alpha)
                counts[t, j] += res.reject
    return counts


def _split(reps: int, parts: int) -> list[range]:
    parts = max(1, min(parts, reps))
    edges = np.linspace(0, reps, parts + 1).astype(int)
    return [range(edges[i], edges[i + 1]) for i in range(parts)]


def _run_chunks(fn, cfg, reps: int, threads: int) -> np.ndarray:
    chunks = _split(reps, threads)
    if threads <= 1 or len(chunks) == 1:
        return sum(fn(cfg, c) for c in chunks)
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return sum(pool.map(fn, [cfg] * len(chunks), chunks))


def _power_frame(tests, betas, counts, reps) -> pd.DataFrame:
    rows = []
    for t, name in enumerate(tests):
        for j, beta in enumerate(betas):
            p = counts[t, j] / reps
            rows.append((name, float(beta), p, reps, math.sqrt(p * (1 - p) / reps)))
    return pd.DataFrame(rows, columns=POWER_COLUMNS)


def run_limit_power_study(cfg: LimitSimConfig) -> pd.DataFrame:
    """Rejection frequencies of each test over the ``beta`` grid, using the true ``gamma(beta0)``.

    Returns a frame with columns ``test, beta, rejection_rate, reps, mc_se``.
    Each replication uses one normal draw of ``(Q_ee, Q_Xe, Q_XX)`` shared
    across the ``beta`` grid and one Monte Carlo draw matrix for the CLC
    weights, both seeded from ``(seed, rep)``.
    """
    counts = _run_chunks(_limit_chunk, cfg, cfg.reps, cfg.threads)
    return _power_frame(cfg.tests, cfg.betas, counts, cfg.reps)


# ---------------------------------------------------------------------------
# calibrated Poisson designs


@dataclass(frozen=True)
class CalibratedDgpConfig:
    """Poisson first stage ``s ~ Poisson(max(1, gamma0 + Z gamma_Z + kappa1 nu))``.

    ``Z`` holds the raw instruments (typically dummies), ``omega`` the
    per-observation residual scale.  Variant 2 draws ``floor(Poisson(2 mu) / 2)``.
    """

    Z: np.ndarray
    gamma0: float
    gamma_z: np.ndarray
    omega: np.ndarray
    kappa1: float = 1.7
    kappa2: float = 0.1
    ybar: float = 0.0
    variant: int = 1
    beta0: float = 0.1
    B: tuple = (-0.5, 0.5)
    grid_points: int = 31
    reps: int = 1000
    seed: int = 0
    prune_threshold: float = 5.0
    alpha: float = 0.05
    mc_draws: int = 2000
    variance: str = "crossfit"
    tests: tuple = DGP_TESTS
    threads: int = 1
    base_mean: np.ndarray | None = None

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        if Z.ndim != 2:
            raise DataError("Z must be a matrix")
        gz = np.asarray(self.gamma_z, dtype=float).reshape(-1)
        om = np.asarray(self.omega, dtype=float).reshape(-1)
        if gz.shape[0] != Z.shape[1]:
            raise DataError(f"gamma_z has length {gz.shape[0]}, Z has {Z.shape[1]} columns")
        if om.shape[0] != Z.shape[0]:
            raise DataError(f"omega has length {om.shape[0]}, Z has {Z.shape[0]} rows")
        if self.kappa1 < 0 or self.kappa2 < 0:
            raise ValueError("kappa1 and kappa2 must be non-negative")
        if self.variant not in (1, 2):
            raise ValueError("variant must be 1 or 2")
        if self.reps < 1:
            raise ValueError("reps must be positive")
        unknown = set(self.tests) - set(DGP_TESTS) - {"jive_wald"}
        if unknown:
            raise ValueError(f"unknown tests {sorted(unknown)}")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "gamma_z", gz)
        object.__setattr__(self, "omega", om)
        if self.base_mean is not None:
            bm = np.asarray(self.base_mean, dtype=float).reshape(-1)
            if bm.shape[0] != Z.shape[0]:
                raise DataError(f"base_mean has length {bm.shape[0]}, Z has {Z.shape[0]} rows")
            object.__setattr__(self, "base_mean", bm)

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def keep(self) -> np.ndarray:
        """Instrument columns surviving the column-sum pruning rule."""
        return self.Z.sum(axis=0) >= self.prune_threshold

    @property
    def betas(self) -> np.ndarray:
        return np.linspace(self.B[0], self.B[1], self.grid_points)

    @property
    def mean_index(self) -> np.ndarray:
        """``gamma0 + Z gamma_Z``, or the calibrated ``base_mean`` when supplied."""
        if self.base_mean is not None:
            return self.base_mean
        return self.gamma0 + self.Z @ self.gamma_z


def synthetic_calibration(
    n: int = 2000, groups: int = 25, calibration_seed: int = 12345, variant: int = 1, strength: float = 0.25, **kw
) -> CalibratedDgpConfig:
    """A census-like calibration: quarter-of-birth x group dummies with heteroskedastic scale.

    Observations fall into ``4 * groups`` cells; the instruments are the
    cell dummies minus one baseline cell.  ``strength`` scales the
    first-stage cell effects around the base mean of 12 years.
    """
    rng = np.random.default_rng(calibration_seed)
    cells = 4 * groups
    cell = rng.integers(0, cells, size=n)
    Z = np.zeros((n, cells - 1))
    rows = np.flatnonzero(cell > 0)
    Z[rows, cell[rows] - 1] = 1.0
    gamma_z = strength * rng.standard_normal(cells - 1)
    omega_cell = 0.5 + rng.uniform(0.0, 1.0, size=cells)
    kappa1 = 1.7 if variant == 1 else 2.7
    return CalibratedDgpConfig(
        Z=Z, gamma0=12.0, gamma_z=gamma_z, omega=omega_cell[cell], kappa1=kappa1, variant=variant, **kw
    )


def load_calibration(path, **kw) -> CalibratedDgpConfig:
    """Read a calibration CSV with columns ``mean``, ``omega`` and instruments ``z1..zK``.

    ``mean`` is the first-stage index ``gamma0 + gamma_Z' z_i`` of each
    observation and ``omega`` its residual scale.
    """
    import re

    df = pd.read_csv(path)
    for col in ("mean", "omega"):
        if col not in df.columns:
            raise DataError(f"missing required column '{col}'")
    zcols = sorted((c for c in df.columns if re.fullmatch(r"z\d+", str(c))), key=lambda c: int(c[1:]))
    if not zcols:
        raise DataError("missing instrument columns 'z1'..'zK'")
    if df[["mean", "omega", *zcols]].isna().any().any():
        raise DataError("calibration file has missing values")
    Z = df[zcols].to_numpy(float)
    return CalibratedDgpConfig(
        Z=Z, gamma0=0.0, gamma_z=np.zeros(Z.shape[1]), omega=df["omega"].to_numpy(float),
        base_mean=df["mean"].to_numpy(float), **kw,
    )


def draw_calibrated_sample(cfg: CalibratedDgpConfig, beta: float, rng=None) -> IVDataset:
    """One dataset from the calibrated design, pruned and demeaned (intercept partialled out)."""
    rng = _stream(cfg.seed, 0) if rng is None else rng
    keep = cfg.keep
    if not keep.any():
        raise DataError("all instruments pruned")
    nu = rng.standard_normal(cfg.n)
    xi = rng.standard_normal(cfg.n)
    mu = np.maximum(1.0, cfg.mean_index + cfg.kappa1 * nu)
    if cfg.variant == 1:
        s = rng.poisson(mu).astype(float)
    else:
        s = np.floor(rng.poisson(2.0 * mu) / 2.0)
    y = cfg.ybar + beta * s + cfg.omega * (nu + cfg.kappa2 * xi)
    raw = IVDataset(y=y, x=s, Z=cfg.Z[:, keep], W=np.ones((cfg.n, 1)))
    return partial_out(raw)


@dataclass(frozen=True)
class SimTruth:
    """Per-observation moments: ``sigma2 = E e^2``, ``eta2 = E V^2``, ``gamma = E eV`` and ``Pi = E X``."""

    sigma2: np.ndarray
    eta2: np.ndarray
    gamma: np.ndarray
    Pi: np.ndarray

    def __post_init__(self):
        for name in ("sigma2", "eta2", "gamma", "Pi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))
        if np.any(self.sigma2 < 0) or np.any(self.eta2 < 0):
            raise ValueError("second moments must be non-negative")
        if np.any(self.gamma**2 > self.sigma2 * self.eta2 * (1 + 1e-12) + 1e-300):
            raise ValueError("gamma^2 must not exceed sigma2 * eta2")

    def omega(self, ctx: ProjectionContext) -> np.ndarray:
        """``omega_i = sum_{j != i} P_ij Pi_j``."""
        return ctx.project(self.Pi) - ctx.leverages * self.Pi


def oracle_variance_components(ctx: ProjectionContext, truth: SimTruth) -> GammaHat:
    """Population variance components for known moments and the given projection."""
    K = ctx.K
    w2 = truth.omega(ctx) ** 2
    s2, e2, g = truth.sigma2, truth.eta2, truth.gamma
    G = _kernel_apply(ctx, np.column_stack([s2, e2, g]), crossfit=False)
    Gs, Ge, Gg = G.T
    return GammaHat(
        phi1=2.0 * (s2 @ Gs) / K,
        phi12=(s2 @ Gg + g @ Gs) / K,
        phi13=2.0 * (g @ Gg) / K,
        psi=(e2 @ Gs + g @ Gg) / K + (w2 @ s2) / K,
        tau=2.0 * (e2 @ Gg) / K + 2.0 * (w2 @ g) / K,
        upsilon=2.0 * (e2 @ Ge) / K + 4.0 * (w2 @ e2) / K,
    )


def _first_stage_moments_v1(m: np.ndarray, kappa: float):
    """``E mu``, ``E mu^2`` and ``E[nu mu]`` for ``mu = max(1, m + kappa nu)``."""
    if kappa == 0:
        mu = np.maximum(1.0, m)
        return mu, mu * mu, np.zeros_like(mu)
    a = (1.0 - m) / kappa
    Phi, phi = special.ndtr(a), np.exp(-0.5 * a * a) / math.sqrt(2 * math.pi)
    tail = 1.0 - Phi
    e1 = Phi + m * tail + kappa * phi
    e2 = Phi + m * m * tail + 2 * m * kappa * phi + kappa**2 * (tail + a * phi)
    return e1, e2, kappa * tail


def _first_stage_moments_v2(m: np.ndarray, kappa: float, nodes: int = 80):
    """Moments of ``floor(Poisson(2 mu)/2)`` by Gauss-Hermite quadrature over ``nu``."""
    x, wts = np.polynomial.hermite_e.hermegauss(nodes)
    wts = wts / wts.sum()
    uniq, inv = np.unique(m, return_inverse=True)
    out = np.zeros((3, uniq.size))
    for k, mk in enumerate(uniq):
        mu = np.maximum(1.0, mk + kappa * x)
        top = int(np.ceil(2 * mu.max() + 12 * np.sqrt(2 * mu.max()) + 20))
        counts = np.arange(top + 1)
        pmf = stats.poisson.pmf(counts[None, :], 2 * mu[:, None])
        half = np.floor(counts / 2.0)
        c1 = pmf @ half
        c2 = pmf @ half**2
        out[:, k] = (wts @ c1, wts @ c2, wts @ (x * c1))
    return out[0][inv], out[1][inv], out[2][inv]


def calibrated_truth(cfg: CalibratedDgpConfig, ctx: ProjectionContext | None = None) -> SimTruth:
    """Known moments of the calibrated design at the true ``beta`` (residual ``e = omega (nu + kappa2 xi)``).

    Means are demeaned to match the intercept-partialled data; the O(1/n)
    dependence introduced by demeaning is ignored.
    """
    m = cfg.mean_index
    if cfg.variant == 1:
        e1, e2, cov_nu = _first_stage_moments_v1(m, cfg.kappa1)
        eta2 = e1 + (e2 - e1 * e1)  # Poisson noise plus variance of mu
    else:
        e1, e2, cov_nu = _first_stage_moments_v2(m, cfg.kappa1)
        eta2 = e2 - e1 * e1
    sigma2 = cfg.omega**2 * (1.0 + cfg.kappa2**2)
    gamma = cfg.omega * cov_nu
    return SimTruth(sigma2=sigma2, eta2=eta2, gamma=gamma, Pi=e1 - e1.mean())


def _dgp_chunk(cfg: CalibratedDgpConfig, reps: range) -> np.ndarray:
    betas = cfg.betas
    counts = np.zeros((len(cfg.tests), len(betas)), dtype=np.int64)
    ctx = None
    for rep in reps:
        sel = SelectionConfig(mc=MCConfig(cfg.mc_draws, _mc_seed(cfg.seed, rep, 1)))
        z = normal_draws(sel.mc)
        for j, beta in enumerate(betas):
            data = draw_calibrated_sample(cfg, beta, _stream(cfg.seed, rep, 0))
            if ctx is None:
                ctx = build_projection(data.Z)
            path = GammaPath(ctx, data, cfg.variance)
            try:
                b = bundle_at(path, cfg.beta0)
            except DegenerateError:
                continue  # counted as acceptance
            for t, name in enumerate(cfg.tests):
                try:
                    if name.startswith("clc"):
                        res = decide_clc(b, cfg.beta0, cfg.B, cfg.alpha, name[4:], sel, n_obs=data.n, draws=z)
                    elif name == "two_step":
                        res = two_step_test(ctx, data, cfg.beta0, cfg.alpha, cfg.variance, path=path)
                    elif name == "jive_wald":
                        res = jive_wald(ctx, data, cfg.beta0, cfg.alpha, cfg.variance, path=path)
                    else:
                        res = decide_simple(name, b, cfg.alpha)
                except ArithmeticError:
                    continue
                counts[t, j] += res.reject
    return counts


def run_dgp_power_study(cfg: CalibratedDgpConfig) -> pd.DataFrame:
    """Rejection frequencies of ``H0: beta = beta0`` over the true-``beta`` grid of the calibrated design."""
    counts = _run_chunks(_dgp_chunk, cfg, cfg.reps, cfg.threads)
    return _power_frame(cfg.tests, cfg.betas, counts, cfg.reps)


# ---------------------------------------------------------------------------
# a simple Gaussian design with controllable identification strength


@dataclass(frozen=True)
class GaussianDesign:
    """Fixed group-dummy instruments with bivariate normal, heteroskedastic errors.

    The first stage ``Pi = Z pi`` is scaled so that ``Q_{Pi,Pi} / sqrt(Upsilon)``
    equals ``strength`` (the population ``Upsilon`` of the design).
    """

    n: int = 400
    K: int = 20
    strength: float = 20.0
    corr: float = 0.5
    beta: float = 0.0
    seed: int = 2024
    Z: np.ndarray = field(init=False, repr=False)
    Pi: np.ndarray = field(init=False, repr=False)
    scale: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        group = np.arange(self.n) % self.K
        Z = np.zeros((self.n, self.K))
        Z[np.arange(self.n), group] = 1.0
        pi = rng.standard_normal(self.K)
        pi -= pi.mean()
        scale = 0.5 + rng.uniform(0.0, 1.0, size=self.K)[group]
        ctx = build_projection(Z)
        Pi0 = Z @ pi
        truth = SimTruth(sigma2=scale**2, eta2=np.ones(self.n), gamma=self.corr * scale, Pi=np.zeros(self.n))
        ups = oracle_variance_components(ctx, truth).upsilon
        q0 = ctx.quad_form(Pi0, Pi0)
        c = math.sqrt(self.strength * math.sqrt(ups) / q0)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "Pi", c * Pi0)
        object.__setattr__(self, "scale", scale)

    def draw(self, rng) -> IVDataset:
        v = rng.standard_normal(self.n)
        u = rng.standard_normal(self.n)
        e = self.scale * (self.corr * v + math.sqrt(1 - self.corr**2) * u)
        x = self.Pi + v
        return IVDataset(y=x * self.beta + e, x=x, Z=self.Z)


CI_COLUMNS = ["rep", "test", "lower", "upper", "length", "empty", "covered"]


def _ci_chunk(args, reps: range) -> list:
    design, B, grid_n, tests, alpha, mc_draws, seed = args
    ctx = build_projection(design.Z)
    rows = []
    for rep in reps:
        data = design.draw(_stream(seed, rep, 0))
        path = GammaPath(ctx, data, "crossfit")
        cfg = SelectionConfig(mc=MCConfig(mc_draws, _mc_seed(seed, rep, 1)))
        for name in tests:
            decide = make_decider(name, ctx, data, B, alpha, "crossfit", cfg, path=path)
            ci = confidence_interval(ctx, data, decide, B, grid_n, alpha)
            at_truth = int(np.argmin(np.abs(ci.grid - design.beta)))
            rows.append((rep, name, ci.lower, ci.upper, ci.length, ci.empty, bool(ci.accepted[at_truth])))
    return rows


def run_ci_coverage_study(
    design: GaussianDesign,
    reps: int,
    B=(-0.5, 0.5),
    grid_n: int = 51,
    tests=("ar", "lm", "clc_krs"),
    alpha: float = 0.05,
    mc_draws: int = 2000,
    seed: int = 0,
    threads: int = 1,
) -> pd.DataFrame:
    """Confidence intervals by grid inversion on repeated draws from ``design``.

    One row per replication and test.  ``covered`` records acceptance at the
    grid point nearest the true ``beta`` (exact when ``beta`` is on the grid).
    """
    if reps < 1:
        raise ValueError("reps must be positive")
    args = (design, tuple(B), grid_n, tuple(tests), alpha, mc_draws, seed)
    chunks = _split(reps, threads)
    if threads <= 1 or len(chunks) == 1:
        parts = [_ci_chunk(args, c) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_ci_chunk, [args] * len(chunks), chunks))
    return pd.DataFrame([row for part in parts for row in part], columns=CI_COLUMNS)
