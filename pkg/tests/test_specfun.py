import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_genlaguerre, eval_hermitenorm, gammaln, ive

from eblab.specfun import (
    QuadDomain,
    QuadratureRule,
    bessel_i_scaled,
    hermite_eval,
    hermite_psi,
    hermite_psi_table,
    laguerre_eval,
    quadrature,
)


class TestHermite:
    def test_h0_is_one(self):
        assert hermite_eval(0, 3.7) == 1.0

    def test_h2_at_zero(self):
        # H_2(x) = x^2 - 1 from the recursion
        assert hermite_eval(2, 0.0) == -1.0

    def test_squared_norm_against_weight(self):
        # int phi H_2^2 = 2! = 2
        rule = quadrature(QuadDomain.REAL_LINE_GAUSSIAN, 40)
        assert rule.integrate(lambda x: hermite_eval(2, x) ** 2) == pytest.approx(2.0, abs=1e-12)

    def test_against_scipy(self):
        x = np.linspace(-5, 5, 41)
        for k in range(16):
            np.testing.assert_allclose(hermite_eval(k, x), eval_hermitenorm(k, x),
                                       rtol=1e-12, atol=1e-9)

    def test_derivative_identity(self):
        # d/dx H_k = k H_{k-1}, via central finite differences
        x = np.linspace(-5, 5, 21)
        h = 1e-6
        for k in range(1, 16):
            fd = (hermite_eval(k, x + h) - hermite_eval(k, x - h)) / (2 * h)
            expected = k * hermite_eval(k - 1, x)
            np.testing.assert_allclose(fd, expected, rtol=1e-6,
                                       atol=1e-6 * np.abs(expected).max())

    def test_cramer_bound(self):
        x = np.linspace(-6, 6, 101)
        for k in range(20):
            bound = 1.086 * math.exp(0.5 * gammaln(k + 1)) * np.exp(x**2 / 4)
            assert np.all(np.abs(hermite_eval(k, x)) <= bound)


class TestHermitePsi:
    def test_value_at_zero(self):
        # psi_0(0) = sqrt(phi(0)) for alpha1 = 1
        assert hermite_psi(0, 1.0, 0.0) == pytest.approx((2 * math.pi) ** -0.25, rel=1e-12)

    def test_orthonormal(self):
        alpha1 = 1.52
        rule = quadrature(QuadDomain.TRUNCATED_INTERVAL, 24, lo=-30, hi=30, panels=60)
        tab = hermite_psi_table(12, alpha1, rule.nodes)
        gram = (tab * rule.weights) @ tab.T
        np.testing.assert_allclose(gram, np.eye(13), atol=1e-10)

    def test_sup_norm_bound(self):
        for alpha1 in (0.3, 1.0, 2.7):
            x = np.linspace(-40, 40, 4001)
            tab = hermite_psi_table(25, alpha1, x)
            assert np.max(np.abs(tab)) <= math.sqrt(alpha1)

    def test_high_order_no_overflow(self):
        vals = hermite_psi_table(250, 1.3, np.linspace(-10, 10, 7))
        assert np.all(np.isfinite(vals))
        assert np.max(np.abs(vals)) <= math.sqrt(1.3)


class TestLaguerre:
    def test_l1_at_zero(self):
        # L_1^0(x) = 1 - x
        assert laguerre_eval(1, 0.0, 0.0) == 1.0

    def test_against_scipy(self):
        x = np.linspace(0, 30, 31)
        for n in range(12):
            for nu in (0.0, 0.5, 3.0, 7.0):
                np.testing.assert_allclose(laguerre_eval(n, nu, x),
                                           eval_genlaguerre(n, nu, x),
                                           rtol=1e-10, atol=1e-8)

    def test_exponential_growth_bound(self):
        for n in range(10):
            for nu in (0.0, 1.0, 4.0):
                x = np.linspace(0, 25, 51)
                bound = np.exp(x / 2) * math.exp(gammaln(n + nu + 1) - gammaln(n + 1)
                                                 - gammaln(nu + 1))
                assert np.all(np.abs(laguerre_eval(n, nu, x)) <= bound * (1 + 1e-12))

    def test_differential_recurrence(self):
        # x (L_n^nu)' = n L_n^nu - (n+nu) L_{n-1}^nu
        x = np.linspace(0.1, 20, 40)
        h = 1e-6
        for n in range(1, 10):
            for nu in (0.0, 2.5):
                fd = (laguerre_eval(n, nu, x + h) - laguerre_eval(n, nu, x - h)) / (2 * h)
                rhs = n * laguerre_eval(n, nu, x) - (n + nu) * laguerre_eval(n - 1, nu, x)
                np.testing.assert_allclose(x * fd, rhs, rtol=2e-6,
                                           atol=1e-5 * np.abs(rhs).max())

    def test_orthogonality_norm(self):
        # int x^nu e^-x (L_2^nu)^2 = Gamma(nu+3)/2; nu = 3 gives Gamma(6)/2 = 60
        rule = quadrature(QuadDomain.HALF_LINE_GAMMA, 30, shape=4.0)
        val = rule.integrate(lambda x: laguerre_eval(2, 3.0, x) ** 2)
        assert val == pytest.approx(60.0, rel=1e-12)


class TestBessel:
    def test_at_origin(self):
        assert bessel_i_scaled(0, 0.0) == 1.0
        assert bessel_i_scaled(1, 0.0) == 0.0

    def test_series_oracle(self):
        # 50-term truncated series at (0, 2)
        oracle = sum(math.exp((2 * y) * math.log(1.0) - 2.0 - gammaln(y + 1)
                              - gammaln(y + 1)) for y in range(50))
        assert bessel_i_scaled(0, 2.0) == pytest.approx(oracle, rel=1e-14)
        assert bessel_i_scaled(0, 2.0) == pytest.approx(0.3085083, rel=1e-6)

    def test_against_scipy(self):
        for nu in (0.0, 0.5, 1.0, 3.0, 7.5):
            for x in (0.1, 1.0, 10.0, 29.0, 40.0, 123.0, 1e4):
                assert bessel_i_scaled(nu, x) == pytest.approx(float(ive(nu, x)),
                                                               rel=1e-12)

    def test_branch_agreement_at_switch(self):
        from eblab.specfun import _bessel_asymptotic, _bessel_series

        for nu in (0.0, 1.0, 2.0, 3.5):
            x = 30.0 + nu * nu
            assert _bessel_series(nu, x) == pytest.approx(_bessel_asymptotic(nu, x),
                                                          rel=1e-8)

    def test_no_overflow_huge_argument(self):
        val = bessel_i_scaled(0, 1e6)
        assert math.isfinite(val)
        assert val == pytest.approx(1.0 / math.sqrt(2 * math.pi * 1e6), rel=1e-6)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            bessel_i_scaled(-1.0, 1.0)
        with pytest.raises(ValueError):
            bessel_i_scaled(0.0, -1.0)


class TestQuadrature:
    def test_gaussian_fourth_moment(self):
        rule = quadrature(QuadDomain.REAL_LINE_GAUSSIAN, 5)
        assert rule.integrate(lambda x: x**4) == pytest.approx(3.0, abs=1e-12)

    def test_exponential_mean(self):
        rule = quadrature(QuadDomain.HALF_LINE_GAMMA, 10, shape=1.0)
        assert rule.integrate(lambda x: x) == pytest.approx(1.0, abs=1e-12)

    def test_hermite_norm_order_40(self):
        rule = quadrature(QuadDomain.REAL_LINE_GAUSSIAN, 40)
        val = rule.integrate(lambda x: hermite_eval(6, x) ** 2)
        assert val == pytest.approx(720.0, abs=1e-9)

    def test_interval_is_composite(self):
        rule = quadrature(QuadDomain.TRUNCATED_INTERVAL, 8, lo=0.0, hi=1.0, panels=5)
        assert rule.nodes.size == 40
        assert rule.integrate(lambda x: x**3) == pytest.approx(0.25, abs=1e-14)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            quadrature(QuadDomain.REAL_LINE_GAUSSIAN, 1)
        with pytest.raises(ValueError):
            quadrature(QuadDomain.HALF_LINE_GAMMA, 5, shape=0.0)
        with pytest.raises(ValueError):
            quadrature(QuadDomain.TRUNCATED_INTERVAL, 5, lo=1.0, hi=0.0)
        with pytest.raises(ValueError):
            quadrature("nonsense", 5)

    def test_invariants_positive_increasing(self):
        for kind, kwargs in ((QuadDomain.REAL_LINE_GAUSSIAN, {}),
                             (QuadDomain.HALF_LINE_GAMMA, {"shape": 2.5}),
                             (QuadDomain.TRUNCATED_INTERVAL,
                              {"lo": -1.0, "hi": 3.0, "panels": 4})):
            rule = quadrature(kind, 16, **kwargs)
            assert np.all(rule.weights > 0)
            assert np.all(np.diff(rule.nodes) > 0)

    @given(order=st.integers(min_value=2, max_value=20),
           degree=st.integers(min_value=0, max_value=39))
    @settings(max_examples=40, deadline=None)
    def test_polynomial_exactness(self, order, degree):
        # exact for monomials up to degree 2*order - 1 against phi
        if degree > 2 * order - 1:
            return
        rule = quadrature(QuadDomain.REAL_LINE_GAUSSIAN, order)
        got = rule.integrate(lambda x: x**degree)
        expected = 0.0 if degree % 2 else math.exp(
            gammaln(degree + 1) - (degree // 2) * math.log(2.0) - gammaln(degree // 2 + 1))
        # odd moments cancel summands of size ~ integral of |x|^degree; judge
        # the error relative to that scale
        scale = rule.integrate(lambda x: np.abs(x) ** degree)
        assert got == pytest.approx(expected, abs=1e-12 * max(1.0, scale))

    def test_rule_validation(self):
        with pytest.raises(ValueError):
            QuadratureRule(np.array([0.0, 1.0]), np.array([1.0, -1.0]),
                           QuadDomain.TRUNCATED_INTERVAL)
        with pytest.raises(ValueError):
            QuadratureRule(np.array([1.0, 0.0]), np.array([1.0, 1.0]),
                           QuadDomain.TRUNCATED_INTERVAL)
