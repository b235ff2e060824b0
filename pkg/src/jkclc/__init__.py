"""Jackknife conditional linear combination (CLC) tests for IV models with many instruments.

Weak-identification-robust inference on the scalar coefficient of a linear
IV model: jackknife AR, LM and orthogonalized LM tests, the CLC test that
combines them with minimax-regret weights, the two-step pre-test rule, and
confidence intervals by test inversion.
"""

from .design import IVDataset, ProjectionContext, build_projection, m_row, p_row, partial_out, quad_form, read_csv
from .errors import DataError, DegenerateError
from .inference import (
    ConfidenceInterval,
    TestResult,
    clc_test,
    confidence_interval,
    jive_wald,
    simple_test,
    two_step_test,
)
from .limit import MCConfig, Weights, c_b_sup, coeff_c, crit_value, crit_value_max, eig2, power_estimate
from .selection import (
    SelectionConfig,
    lower_bound_a,
    minimax_weights,
    mu_proxy_krs,
    mu_proxy_pp,
    weight_grid,
)
from .stats import QTriplet, StatBundle, q_triplet, stat_bundle
from .variance import GammaHat, GammaPath, crossfit_gamma, sigma_d, standard_gamma

__version__ = "0.1.0"

__all__ = [
    "IVDataset", "ProjectionContext", "build_projection", "m_row", "p_row", "partial_out", "quad_form",
    "read_csv", "DataError", "DegenerateError", "ConfidenceInterval", "TestResult", "clc_test",
    "confidence_interval", "jive_wald", "simple_test", "two_step_test", "MCConfig", "Weights", "c_b_sup",
    "coeff_c", "crit_value", "crit_value_max", "eig2", "power_estimate", "SelectionConfig",
    "lower_bound_a", "minimax_weights", "mu_proxy_krs", "mu_proxy_pp", "weight_grid", "QTriplet",
    "StatBundle", "q_triplet", "stat_bundle", "GammaHat", "GammaPath", "crossfit_gamma", "sigma_d",
    "standard_gamma",
]
