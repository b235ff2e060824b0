"""Tests of ``H0: beta = beta0`` and confidence intervals by test inversion.

Every test accepts an optional precomputed :class:`~jkclc.variance.GammaPath`
so that repeated evaluation over a grid of null values reuses one O(n^2)
sweep of the data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import stats

from .design import IVDataset, ProjectionContext
from .errors import DegenerateError
from .limit import MCConfig, Weights, crit_value, normal_draws
from .selection import SelectionConfig, minimax_weights
from .stats import StatBundle, bundle_from_q, QTriplet
from .variance import GammaPath

F_THRESHOLD = 9.98
TWO_STEP_LEVEL = 0.02
JIVE_TOL = 1e-12

SIMPLE_KINDS = ("ar", "lm", "lm_star")


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    test_name: str
    statistic: float
    critical_value: float
    reject: bool
    alpha: float
    weights: Weights | None = None
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {
            "test": self.test_name,
            "statistic": self.statistic,
            "critical_value": self.critical_value,
            "reject": self.reject,
            "alpha": self.alpha,
            "weights": None if self.weights is None else [self.weights.a1, self.weights.a2],
            "diagnostics": self.diagnostics,
        }
        return out


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float | None
    upper: float | None
    empty: bool
    grid_size: int
    accepted_count: int
    disconnected: bool
    error_count: int = 0
    grid: np.ndarray | None = field(default=None, repr=False, compare=False)
    accepted: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def length(self) -> float:
        return 0.0 if self.empty else self.upper - self.lower

    def as_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "empty": self.empty,
            "grid_size": self.grid_size,
            "accepted_count": self.accepted_count,
            "disconnected": self.disconnected,
            "error_count": self.error_count,
        }


def _path(ctx, data, variance, path):
    if path is not None:
        if path.variance != variance:
            raise ValueError(f"path uses {path.variance!r} variance, requested {variance!r}")
        return path
    return GammaPath(ctx, data, variance)


def bundle_at(path: GammaPath, beta0: float) -> StatBundle:
    """Statistics at ``beta0`` from a precomputed gamma path."""
    gamma = path.at(beta0)
    return bundle_from_q(QTriplet(*path.q_at(beta0)), gamma)


def _base_diag(b: StatBundle) -> dict:
    return {"ar": b.ar, "lm": b.lm, "lm_star": b.lm_star, "d_hat": b.d_hat, "f_tilde": b.f_tilde, "rho": b.gamma.rho}


def chi2_crit(alpha: float) -> float:
    return float(stats.chi2.ppf(1.0 - alpha, 1))


def decide_simple(kind: str, b: StatBundle, alpha: float, two_sided_ar: bool = False) -> TestResult:
    """AR (one-sided by default), LM or LM* decision from a statistics bundle."""
    if not 0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 0.5), got {alpha}")
    if kind == "ar":
        if two_sided_ar:
            stat, crit = b.ar**2, chi2_crit(alpha)
        else:
            stat, crit = b.ar, float(stats.norm.ppf(1.0 - alpha))
    elif kind == "lm":
        stat, crit = b.lm**2, chi2_crit(alpha)
    elif kind == "lm_star":
        stat, crit = b.lm_star**2, chi2_crit(alpha)
    else:
        raise ValueError(f"kind must be one of {SIMPLE_KINDS}, got {kind!r}")
    return TestResult(kind, float(stat), crit, bool(stat >= crit), alpha, None, _base_diag(b))


def simple_test(
    kind: str, ctx: ProjectionContext, data: IVDataset, beta0: float, alpha: float = 0.05,
    variance: str = "crossfit", two_sided_ar: bool = False, path: GammaPath | None = None,
) -> TestResult:
    """Jackknife AR (``AR >= z_alpha``), LM (``LM^2 >= chi2_1``) or LM* (``LM*^2 >= chi2_1``) test."""
    b = bundle_at(_path(ctx, data, variance, path), beta0)
    return decide_simple(kind, b, alpha, two_sided_ar)


def decide_clc(
    b: StatBundle, beta0: float, B, alpha: float, method: str, cfg: SelectionConfig,
    n_obs: int | None = None, forced_weights: Weights | None = None, draws: np.ndarray | None = None,
) -> TestResult:
    """CLC decision from a statistics bundle (shared by data and limit-experiment code)."""
    z = normal_draws(cfg.mc) if draws is None else draws
    diag = _base_diag(b)
    if forced_weights is None:
        w, mdiag = minimax_weights(b, b.gamma, beta0, B, method, cfg, alpha=alpha, n_obs=n_obs, draws=z)
        diag.update(mdiag.as_dict())
    else:
        w = forced_weights
        diag["forced_weights"] = True
    crit = crit_value(w, b.gamma.rho, alpha, cfg.mc, draws=z)
    stat = w.a1 * b.ar**2 + w.a2 * b.lm**2 + (1.0 - w.a1 - w.a2) * b.lm_star**2
    return TestResult(f"clc_{method}", float(stat), crit, bool(stat >= crit), alpha, w, diag)


def clc_test(
    ctx: ProjectionContext, data: IVDataset, beta0: float, B, alpha: float = 0.05,
    method: str = "krs", variance: str = "crossfit", cfg: SelectionConfig | None = None,
    forced_weights: Weights | None = None, path: GammaPath | None = None,
) -> TestResult:
    """Jackknife CLC test with minimax-regret weights.

    The statistic ``a1 AR^2 + a2 LM^2 + (1 - a1 - a2) LM*^2`` is compared
    with ``C_alpha(a1, a2; rho)`` simulated from ``cfg.mc``.  Weights are
    chosen by :func:`~jkclc.selection.minimax_weights` over the parameter
    space ``B`` unless ``forced_weights`` is given.
    """
    cfg = SelectionConfig() if cfg is None else cfg
    b = bundle_at(_path(ctx, data, variance, path), beta0)
    return decide_clc(b, beta0, B, alpha, method, cfg, n_obs=data.n, forced_weights=forced_weights)


def jive_wald(
    ctx: ProjectionContext, data: IVDataset, beta0: float, alpha: float = 0.05,
    variance: str = "crossfit", path: GammaPath | None = None,
) -> TestResult:
    """Wald test centred at the JIVE estimate ``Q_XY / Q_XX`` with variance ``Psi(beta_hat) / Q_XX^2``."""
    p = _path(ctx, data, variance, path)
    if abs(p.q_xx) < JIVE_TOL:
        raise DegenerateError("unidentified JIVE (Q_XX is numerically zero)")
    beta_hat = p.q_xy / p.q_xx
    psi = p.at(beta_hat).psi
    wald = (beta_hat - beta0) ** 2 * p.q_xx**2 / psi
    crit = chi2_crit(alpha)
    diag = {"beta_hat": beta_hat, "se": math.sqrt(psi) / abs(p.q_xx), "variance": variance}
    return TestResult("jive_wald", float(wald), crit, bool(wald >= crit), alpha, None, diag)


def two_step_branch(f_tilde: float) -> str:
    """``"wald"`` when ``F > 9.98`` (strict), otherwise ``"ar"``."""
    return "wald" if f_tilde > F_THRESHOLD else "ar"


def two_step_test(
    ctx: ProjectionContext, data: IVDataset, beta0: float, alpha_total: float = 0.05,
    variance: str = "crossfit", path: GammaPath | None = None, sub_level: float = TWO_STEP_LEVEL,
) -> TestResult:
    """Pre-test on ``F = Q_XX / Upsilon``: Wald if ``F > 9.98``, else one-sided AR, each at ``sub_level``."""
    p = _path(ctx, data, variance, path)
    b = bundle_at(p, beta0)
    branch = two_step_branch(b.f_tilde)
    if branch == "wald":
        inner = jive_wald(ctx, data, beta0, sub_level, variance, path=p)
    else:
        inner = decide_simple("ar", b, sub_level)
    diag = {**inner.diagnostics, "branch": branch, "f_tilde": b.f_tilde, "alpha_total": alpha_total}
    return replace(inner, test_name="two_step", alpha=sub_level, diagnostics=diag)


def grid_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for grid point ``index`` derived from a master seed."""
    return int(np.random.SeedSequence(int(seed), spawn_key=(int(index),)).generate_state(1, np.uint64)[0])


def make_decider(
    kind: str, ctx: ProjectionContext, data: IVDataset, B, alpha: float = 0.05,
    variance: str = "crossfit", cfg: SelectionConfig | None = None, path: GammaPath | None = None,
) -> Callable[[float, int], TestResult]:
    """Return ``decide(beta0, index) -> TestResult`` for a named test kind.

    Kinds: ``ar``, ``ar2`` (two-sided AR), ``lm``, ``lm_star``, ``clc_pp``,
    ``clc_krs``, ``two_step``, ``jive_wald``.  CLC tests draw their Monte
    Carlo stream from ``(cfg.mc.seed, index)``.  A precomputed ``path`` must
    use the same ``variance`` family.
    """
    cfg = SelectionConfig() if cfg is None else cfg
    if path is None:
        path = GammaPath(ctx, data, variance)
    elif path.variance != variance:
        raise ValueError("path was built with a different variance family")
    if kind in SIMPLE_KINDS:
        return lambda b0, i: decide_simple(kind, bundle_at(path, b0), alpha)
    if kind == "ar2":
        return lambda b0, i: decide_simple("ar", bundle_at(path, b0), alpha, two_sided_ar=True)
    if kind in ("clc_pp", "clc_krs"):
        method = kind[4:]

        def decide(b0, i):
            sub = replace(cfg, mc=replace(cfg.mc, seed=grid_seed(cfg.mc.seed, i)))
            return decide_clc(bundle_at(path, b0), b0, B, alpha, method, sub, n_obs=data.n)

        return decide
    if kind == "two_step":
        return lambda b0, i: two_step_test(ctx, data, b0, alpha, variance, path=path)
    if kind == "jive_wald":
        return lambda b0, i: jive_wald(ctx, data, b0, alpha, variance, path=path)
    raise ValueError(f"unknown test kind {kind!r}")


def confidence_interval(
    ctx: ProjectionContext, data: IVDataset, test, B, grid_n: int = 10_000, alpha: float = 0.05,
    variance: str = "crossfit", cfg: SelectionConfig | None = None,
) -> ConfidenceInterval:
    """Invert a test over ``grid_n`` equispaced null values in ``B``.

    Parameters
    ----------
    test : str or callable
        A kind accepted by :func:`make_decider`, or ``f(beta0, index)``
        returning a :class:`TestResult` or a bool (``True`` = reject).

    Notes
    -----
    Grid points where the test raises a numerical error count as rejected
    and are tallied in ``error_count``.
    """
    if grid_n < 2:
        raise ValueError("grid_n must be at least 2")
    lo, hi = float(B[0]), float(B[1])
    if not lo <= hi:
        raise ValueError(f"B must satisfy lower <= upper, got [{lo}, {hi}]")
    decide = make_decider(test, ctx, data, B, alpha, variance, cfg) if isinstance(test, str) else test
    grid = np.linspace(lo, hi, grid_n)
    accepted = np.zeros(grid_n, dtype=bool)
    errors = 0
    for i, b0 in enumerate(grid):
        try:
            res = decide(float(b0), i)
        except ArithmeticError:
            errors += 1
            continue
        reject = res.reject if isinstance(res, TestResult) else bool(res)
        accepted[i] = not reject
    return interval_from_grid(grid, accepted, errors)


def interval_from_grid(grid: np.ndarray, accepted: np.ndarray, errors: int = 0) -> ConfidenceInterval:
    idx = np.flatnonzero(accepted)
    if idx.size == 0:
        return ConfidenceInterval(None, None, True, len(grid), 0, False, errors, grid, accepted)
    disconnected = bool(idx[-1] - idx[0] + 1 != idx.size)
    return ConfidenceInterval(
        float(grid[idx[0]]), float(grid[idx[-1]]), False, len(grid), int(idx.size), disconnected,
        errors, grid, accepted,
    )
