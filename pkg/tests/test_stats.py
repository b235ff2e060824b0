import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jkclc import DegenerateError, GammaHat, IVDataset, build_projection, q_triplet, stat_bundle, standard_gamma
from jkclc.stats import QTriplet, bundle_from_q, synthetic_bundle

from oracles import dense_hat, quad_form_loop, random_instance

GAMMA = GammaHat(2.0, 0.6, 0.3, 1.5, -0.2, 1.2)


def test_lm_star_formula():
    g = GammaHat(1.0, 0.5, 0.0, 1.0, 0.0, 1.0)
    b = synthetic_bundle(1.0, 2.0, 1.0, g)
    assert b.lm_star == pytest.approx(1.7320508, abs=1e-7)


def test_uncorrelated_gamma():
    g = GammaHat(1.3, 0.0, 0.0, 0.7, 0.0, 2.0)
    b = bundle_from_q(QTriplet(0.4, -1.1, 5.0), g)
    assert b.d_hat == 5.0
    assert b.lm_star == b.lm
    assert b.f_tilde == 2.5


def test_d_hat_matches_explicit_solve():
    q = QTriplet(0.7, -0.4, 3.0)
    S = np.array([[GAMMA.phi1, GAMMA.phi12], [GAMMA.phi12, GAMMA.psi]])
    coef = np.linalg.solve(S, [GAMMA.phi13, GAMMA.tau])
    b = bundle_from_q(q, GAMMA)
    assert b.d_hat == pytest.approx(3.0 - np.dot([0.7, -0.4], coef), abs=1e-12)
    assert b.ar == pytest.approx(0.7 / math.sqrt(2.0))
    assert b.lm == pytest.approx(-0.4 / math.sqrt(1.5))
    rho = 0.6 / math.sqrt(3.0)
    assert b.lm_star == (b.lm - b.gamma.rho * b.ar) / math.sqrt(1 - b.gamma.rho**2)
    assert b.gamma.rho == pytest.approx(rho)


def test_non_pd_block():
    with pytest.raises(DegenerateError, match="not PD"):
        bundle_from_q(QTriplet(1, 1, 1), GammaHat(1.0, 1.5, 0.0, 1.0, 0.0, 1.0))


def test_degenerate_orthogonalization():
    g = GammaHat(1.0, 1.0 - 1e-10, 0.0, 1.0, 0.0, 1.0)
    with pytest.raises(DegenerateError):
        bundle_from_q(QTriplet(1, 1, 1), g)


def test_q_triplet_double_sum_and_zero_residual():
    rng = np.random.default_rng(4)
    n, K = 20, 3
    Z, y, x = random_instance(rng, n, K)
    ctx = build_projection(Z)
    P = dense_hat(Z)
    b0 = 0.4
    e = y - x * b0
    q = q_triplet(ctx, IVDataset(y, x, Z), b0)
    assert q.q_ee == pytest.approx(quad_form_loop(P, e, e, K), abs=1e-10)
    assert q.q_xe == pytest.approx(quad_form_loop(P, x, e, K), abs=1e-10)
    assert q.q_xx == pytest.approx(quad_form_loop(P, x, x, K), abs=1e-10)
    exact = q_triplet(ctx, IVDataset(1.5 * x, x, Z), 1.5)
    assert exact.q_ee == pytest.approx(0.0, abs=1e-12) and exact.q_xe == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_q_triplet_shift_identity(beta, beta0):
    rng = np.random.default_rng(7)
    Z, y, x = random_instance(rng, 25, 4)
    ctx = build_projection(Z)
    d = IVDataset(y, x, Z)
    qb, q0 = q_triplet(ctx, d, beta), q_triplet(ctx, d, beta0)
    delta = beta - beta0
    assert q0.q_ee == pytest.approx(qb.q_ee + 2 * delta * qb.q_xe + delta**2 * qb.q_xx, abs=1e-9)
    assert q0.q_xe == pytest.approx(qb.q_xe + delta * qb.q_xx, abs=1e-9)
    assert q0.q_xx == qb.q_xx


def test_d_hat_quadratic_in_beta0_with_fixed_gamma():
    rng = np.random.default_rng(12)
    Z, y, x = random_instance(rng, 30, 4)
    ctx = build_projection(Z)
    d = IVDataset(y, x, Z)
    pts = np.array([-1.0, 0.0, 0.8])
    vals = [stat_bundle(ctx, d, b, GAMMA).d_hat for b in pts]
    coef = np.polyfit(pts, vals, 2)
    for b in (-2.5, 0.3, 4.0):
        assert stat_bundle(ctx, d, b, GAMMA).d_hat == pytest.approx(np.polyval(coef, b), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("c", [0.1, 2.0, 37.0])
def test_scale_equivariance(c):
    rng = np.random.default_rng(13)
    Z, y, x = random_instance(rng, 40, 5)
    ctx = build_projection(Z)
    b0 = 0.1
    base = stat_bundle(ctx, IVDataset(y, x, Z), b0, standard_gamma(ctx, IVDataset(y, x, Z), b0))
    scaled_data = IVDataset(c * y, c * x, Z)
    g = standard_gamma(ctx, scaled_data, b0)
    for k in ("phi1", "phi12", "phi13", "psi", "tau", "upsilon"):
        assert getattr(g, k) == pytest.approx(c**4 * getattr(base.gamma, k), rel=1e-10)
    b = stat_bundle(ctx, scaled_data, b0, g)
    assert b.ar == pytest.approx(base.ar, abs=1e-10)
    assert b.lm == pytest.approx(base.lm, abs=1e-10)
    assert b.lm_star == pytest.approx(base.lm_star, abs=1e-10)


def test_statistics_require_partialled_data():
    rng = np.random.default_rng(1)
    Z, y, x = random_instance(rng, 10, 2)
    with pytest.raises(ValueError):
        q_triplet(build_projection(Z), IVDataset(y, x, Z, W=np.ones(10)), 0.0)
