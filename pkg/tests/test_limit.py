import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize, stats

from jkclc import GammaHat, MCConfig, Weights, c_b_sup, coeff_c, crit_value, crit_value_max, eig2, power_estimate
from jkclc.limit import (
    bracket,
    combination_statistic,
    crit_values,
    normal_draws,
    power_table,
    trig_weight_grid,
    weights_matrix,
)
from jkclc.simulation import limit_base_gamma

BIG = MCConfig(200_000, 11)
CHI2_95 = stats.chi2.ppf(0.95, 1)


def exact_mixture_quantile(nu1, alpha=0.05):
    """Upper quantile of ``nu1 W1 + (1 - nu1) W2`` for independent chi2(1) by quadrature."""
    nu2 = 1.0 - nu1
    if nu2 < 1e-12:
        return stats.chi2.ppf(1 - alpha, 1)

    def sf(c):
        # P(nu1 W1 + nu2 W2 > c), conditioning on W1 = w
        inner = lambda w: stats.chi2.sf((c - nu1 * w) / nu2, 1) * stats.chi2.pdf(w, 1)
        head, _ = integrate.quad(inner, 0, c / nu1, limit=200, points=[1e-6])
        return head + stats.chi2.sf(c / nu1, 1)

    return optimize.brentq(lambda c: sf(c) - alpha, 0.5, 20, xtol=1e-10)


class TestWeightsAndConfig:
    def test_negative_weight(self):
        with pytest.raises(ValueError):
            Weights(-0.1, 0.2)

    def test_sum_at_one(self):
        with pytest.raises(ValueError):
            Weights(0.5, 0.5)

    def test_too_few_draws(self):
        with pytest.raises(ValueError):
            MCConfig(999)

    def test_antithetic_needs_even(self):
        with pytest.raises(ValueError):
            MCConfig(1001, antithetic=True)

    def test_draws_are_reproducible_and_read_only(self):
        z = normal_draws(MCConfig(2000, 5))
        np.testing.assert_array_equal(z, normal_draws(MCConfig(2000, 5)))
        with pytest.raises(ValueError):
            z[0, 0] = 1.0


class TestCritValue:
    @pytest.mark.parametrize("rho", [0.0, 0.5, 0.9])
    def test_lm_star_weight_is_chi2_1(self, rho):
        c = crit_value(Weights(0, 0), rho, 0.05, BIG, exact_central=False)
        assert abs(c - 3.8415) <= 0.06

    def test_half_ar_is_scaled_chi2_2(self):
        c = crit_value(Weights(0.5, 0), 0.0, 0.05, BIG, exact_central=False)
        assert abs(c - 2.9957) <= 0.05

    def test_exact_central_shortcut(self):
        assert crit_value(Weights(0, 0), 0.3, 0.05, MCConfig()) == pytest.approx(CHI2_95)
        assert crit_value(Weights(0, 0.4), 0.0, 0.05, MCConfig()) == pytest.approx(CHI2_95)

    @pytest.mark.parametrize("w", [Weights(0.2, 0.3), Weights(0, 0.6), Weights(0.9, 0)])
    def test_sign_symmetry_under_antithetic_pairing(self, w):
        mc = MCConfig(4000, 3, antithetic=True)
        assert crit_value(w, 0.6, 0.05, mc) == crit_value(w, -0.6, 0.05, mc)

    def test_quantile_is_order_statistic(self):
        z = normal_draws(MCConfig(2000, 1))
        stat = np.sort(combination_statistic(z, 0.3, 0.2, 0.4))
        # ceil(0.95 * 2000) = 1900th smallest
        assert crit_values(0.3, 0.2, 0.4, 0.05, z)[0] == stat[1899]

    def test_batch_matches_sort_for_many_weights(self):
        z = normal_draws(MCConfig(3000, 2))
        grid = trig_weight_grid(0.0, 16)
        got = crit_values(grid[:, 0], grid[:, 1], 0.7, 0.05, z, exact_central=False)
        want = [np.sort(combination_statistic(z, a1, a2, 0.7))[2849] for a1, a2 in grid]
        np.testing.assert_array_equal(got, want)

    def test_base_statistic_is_z2_squared(self):
        z = normal_draws(MCConfig(1000, 4))
        np.testing.assert_array_equal(combination_statistic(z, 0.0, 0.0, 0.3), z[:, 1] ** 2)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            crit_value(Weights(0, 0), 1.0, 0.05, MCConfig())
        with pytest.raises(ValueError):
            crit_value(Weights(0, 0), 0.0, 0.6, MCConfig())


class TestCritValueMax:
    def test_rho_zero_bounded_below(self):
        c = crit_value_max(0.0, 0.05, MCConfig())
        assert math.isfinite(c) and c >= CHI2_95

    def test_single_point(self):
        mc = MCConfig(5000, 9)
        assert crit_value_max(0.4, 0.05, mc, a_grid=[(0.0, 0.0)]) == crit_value(Weights(0, 0), 0.4, 0.05, mc)

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            crit_value_max(0.4, 0.05, MCConfig(), a_grid=np.empty((0, 2)))

    def test_matches_finer_grid_oracle(self):
        # The law of the statistic depends on the weights only through the
        # largest eigenvalue nu1, and the upper quantile grows with nu1.
        rho = 0.7
        t = np.linspace(0, np.pi / 2, 160)
        t1, t2 = np.meshgrid(t, t, indexing="ij")
        a1 = np.sin(t1).ravel() ** 2
        a2 = np.minimum(np.cos(t1).ravel() ** 2 * np.sin(t2).ravel() ** 2, 0.999 - np.minimum(a1, 0.999))
        a1 = np.minimum(a1, 0.999)
        m11 = a1 + a2 * rho**2
        m12 = a2 * rho * math.sqrt(1 - rho**2)
        nu1 = 0.5 + np.hypot(m11 - 0.5, m12)
        oracle = exact_mixture_quantile(float(nu1.max()))
        got = crit_value_max(rho, 0.05, MCConfig(200_000, 12))
        assert abs(got - oracle) < 0.05

    def test_mixture_quantile_oracle_endpoints(self):
        assert exact_mixture_quantile(0.5) == pytest.approx(0.5 * stats.chi2.ppf(0.95, 2), abs=1e-6)
        assert exact_mixture_quantile(1.0) == pytest.approx(CHI2_95)


class TestCoefficients:
    def test_zero_delta(self):
        assert coeff_c(0.0, limit_base_gamma(0.4)) == (0.0, 0.0)

    def test_uncorrelated_root_of_c2(self):
        g = GammaHat(2.0, 0.6, 0.0, 1.5, 0.0, 1.0)
        d_star = math.sqrt(g.phi1 / g.psi) / g.rho
        assert bracket(d_star, g) == 1.0
        assert coeff_c(d_star, g)[1] == pytest.approx(0.0, abs=1e-12)

    def test_limit_design_hand_solved(self):
        # rho = 0.4: S^{-1}(rho, rho)' = rho/(1+rho) (1, 1)', bracket(1) = 1 - 2 rho/(1+rho) = 3/7
        c1, c2 = coeff_c(1.0, limit_base_gamma(0.4))
        assert c1 == pytest.approx(7 / 3, abs=1e-12)
        assert c2 == pytest.approx((1 - 0.4) / math.sqrt(1 - 0.16) * 7 / 3, abs=1e-12)

    def test_vectorized(self):
        g = limit_base_gamma(0.3)
        d = np.array([-1.0, 0.2, 0.7])
        c1, c2 = coeff_c(d, g)
        for i, di in enumerate(d):
            assert (c1[i], c2[i]) == pytest.approx(coeff_c(float(di), g))

    def test_singular_bracket(self):
        g = limit_base_gamma(0.5)
        # bracket(d) = 1 - (d^2 + d)/3 vanishes at d = (-1 + sqrt(13))/2
        root = (-1 + math.sqrt(13)) / 2
        with pytest.raises(ZeroDivisionError, match="singular"):
            coeff_c(root, g)


class TestCB:
    def test_uncorrelated_is_one(self):
        g = GammaHat(1.0, 0.2, 0.0, 1.0, 0.0, 1.0)
        assert c_b_sup(g, np.linspace(-3, 3, 7)) == 1.0

    def test_zero_grid(self):
        assert c_b_sup(limit_base_gamma(0.7), [0.0]) == 1.0

    def test_direct_scan(self):
        g = limit_base_gamma(0.7)
        grid = np.linspace(-2, 2, 31)
        k = 0.7 / 1.7
        assert c_b_sup(g, grid) == pytest.approx(max((1 - k * (d * d + d)) ** 2 for d in grid), abs=1e-12)


class TestPower:
    def test_size_at_null(self):
        g = limit_base_gamma(0.5)
        R = 2000
        for w in (Weights(0, 0), Weights(0.3, 0.3), Weights(0.8, 0.1)):
            p = power_estimate(w, 0.0, 5.0, g, 0.05, MCConfig(R, 8))
            assert abs(p - 0.05) <= 3 * math.sqrt(0.05 * 0.95 / R)

    def test_noncentral_chi2(self):
        g = GammaHat(1.0, 0.0, 0.0, 1.0, 0.0, 1.0)
        # C2(1) = 1, so the mean shift of Z2 is mu = 2 -> ncx2(1, 4)
        p = power_estimate(Weights(0, 0), 1.0, 2.0, g, 0.05, MCConfig(10_000, 1))
        assert stats.ncx2.sf(CHI2_95, 1, 4.0) == pytest.approx(0.516, abs=1e-3)
        assert abs(p - 0.516) <= 0.02

    def test_large_noncentrality(self):
        g = GammaHat(1.0, 0.0, 0.0, 1.0, 0.0, 1.0)
        assert power_estimate(Weights(0, 0), 1.0, 5.0, g, 0.05, MCConfig()) >= 0.99

    def test_power_dip_at_blind_spot(self):
        g = limit_base_gamma(0.7)
        d_star = 1 / 0.7  # root of C2 for this gamma
        mc = MCConfig(20_000, 4)
        assert power_estimate(Weights(0, 0), d_star, 6.0, g, 0.05, mc) <= 0.07
        assert power_estimate(Weights(0.5, 0.25), d_star, 6.0, g, 0.05, mc) >= 0.5

    def test_table_matches_direct_count(self):
        z = normal_draws(MCConfig(2000, 3))
        w = np.array([[0.0, 0.0], [0.3, 0.2]])
        crit = crit_values(w[:, 0], w[:, 1], 0.4, 0.05, z)
        m1, m2 = np.array([0.0, 1.0]), np.array([0.5, -2.0])
        tab = power_table(w, crit, m1, m2, 0.4, z)
        for d in range(2):
            zz = np.column_stack([z[:, 0] + m1[d], z[:, 1] + m2[d]])
            for k in range(2):
                want = np.mean(combination_statistic(zz, w[k, 0], w[k, 1], 0.4) >= crit[k])
                assert tab[d, k] == pytest.approx(want, abs=1e-12)


class TestEig2:
    def test_lm_star_weight(self):
        nu1, nu2, U = eig2(Weights(0, 0), 0.3)
        assert (nu1, nu2) == (1.0, 0.0)
        assert np.allclose(np.abs(U), [[0, 1], [1, 0]])

    def test_diagonal(self):
        nu1, nu2, _ = eig2(Weights(0.3, 0), 0.6)
        assert (nu1, nu2) == pytest.approx((0.7, 0.3))

    def test_closed_form(self):
        nu1, nu2, _ = eig2(Weights(0, 0.5), 1 / math.sqrt(2))
        assert nu1 == pytest.approx(0.8535534, abs=1e-7)
        assert nu2 == pytest.approx(0.1464466, abs=1e-7)

    def test_equal_diagonal_gives_identity(self):
        _, _, U = eig2(Weights(0.5, 0), 0.0)
        np.testing.assert_array_equal(U, np.eye(2))

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0, 0.99), st.floats(0, 1), st.floats(-0.99, 0.99))
    def test_reconstruction_and_rotated_statistic(self, a1, frac, rho):
        w = Weights(a1, frac * (0.999 - a1))
        nu1, nu2, U = eig2(w, rho)
        assert nu1 >= nu2 >= 0
        assert abs(nu1 + nu2 - 1) <= 1e-12
        np.testing.assert_allclose(U.T @ U, np.eye(2), atol=1e-12)
        np.testing.assert_allclose(U @ np.diag([nu1, nu2]) @ U.T, weights_matrix(w, rho), atol=1e-12)
        z = normal_draws(MCConfig(1000, 0))[:50]
        rot = z @ U
        np.testing.assert_allclose(
            nu1 * rot[:, 0] ** 2 + nu2 * rot[:, 1] ** 2, combination_statistic(z, w.a1, w.a2, rho), atol=1e-10
        )
