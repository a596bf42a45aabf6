import math

import numpy as np
import pytest
from scipy.special import gammaln

from eblab.lowerbound import gaussian_constants, poisson_constants
from eblab.models import GaussianPrior, TiltedPrior, bayes_estimate
from eblab.operators import (
    GramMatrices,
    apply_K,
    apply_K1,
    apply_K1_smooth,
    gamma_context,
    gaussian_context,
    gram,
    k_theta,
    s_apply,
    s_kernel,
    s_scale,
)
from eblab.specfun import bessel_i_scaled, hermite_psi_table, laguerre_eval


def psi_func(k, alpha1):
    return lambda x: hermite_psi_table(k, alpha1, np.asarray(x, dtype=float))[k]


def psi_prime_func(k, alpha1):
    def rp(x):
        tab = hermite_psi_table(k + 1, alpha1, np.asarray(x, dtype=float))
        lower = math.sqrt(k) * tab[k - 1] if k >= 1 else 0.0
        return alpha1 / 2.0 * (lower - math.sqrt(k + 1) * tab[k + 1])

    return rp


def gamma_func(k, alpha, beta):
    c = poisson_constants(alpha, beta, k)
    return lambda x: np.exp(-c.gamma1 * np.asarray(x, dtype=float)) * laguerre_eval(
        k, alpha - 1.0, c.gamma2 * np.asarray(x, dtype=float))


class TestApplyK:
    def test_constant_maps_to_one(self):
        ctx = gaussian_context(1.0)
        ys = np.array([-3.0, 0.0, 2.5])
        np.testing.assert_allclose(apply_K(ctx, lambda t: np.ones_like(t), ys), 1.0,
                                   atol=1e-14)
        ctxp = gamma_context(2.0, 1.0)
        np.testing.assert_allclose(apply_K(ctxp, lambda t: np.ones_like(t),
                                           np.arange(5.0)), 1.0, atol=1e-14)

    def test_identity_function_gaussian(self):
        # (K x)(y) = eta^2 y
        ctx = gaussian_context(0.7)
        ys = np.linspace(-4, 4, 9)
        np.testing.assert_allclose(apply_K(ctx, lambda t: t, ys),
                                   k_theta(ctx, ys), rtol=1e-12, atol=1e-13)

    def test_gamma_posterior_mean(self):
        ctx = gamma_context(2.0, 1.0)
        assert apply_K(ctx, lambda t: t, 3.0) == pytest.approx(2.5, rel=1e-12)
        np.testing.assert_allclose(apply_K(ctx, lambda t: t, np.arange(6.0)),
                                   k_theta(ctx, np.arange(6.0)), rtol=1e-12)


class TestApplyK1:
    def test_annihilates_constants(self):
        for ctx in (gaussian_context(1.0), gamma_context(3.0, 2.0)):
            vals = apply_K1(ctx, lambda t: np.ones_like(t), np.arange(4.0))
            np.testing.assert_allclose(vals, 0.0, atol=1e-13)

    def test_two_paths_agree_gaussian(self):
        # definition K(theta r) - Ktheta Kr against eta^2 K(r') for r = psi_4
        c = gaussian_constants(1.0)
        ctx = gaussian_context(1.0)
        ys = np.arange(-3.0, 4.0)
        d = apply_K1(ctx, psi_func(4, c.alpha1), ys)
        sm = apply_K1_smooth(ctx, psi_prime_func(4, c.alpha1), ys)
        np.testing.assert_allclose(d, sm, atol=1e-8)

    def test_two_paths_agree_poisson(self):
        # K1 r = K(x r')/(1+beta) for a smooth bounded r
        ctx = gamma_context(2.0, 1.0)
        r = lambda t: np.exp(-t)
        rp = lambda t: -np.exp(-t)
        ys = np.arange(8.0)
        np.testing.assert_allclose(apply_K1(ctx, r, ys),
                                   apply_K1_smooth(ctx, rp, ys), atol=1e-11)

    def test_shift_identity_poisson(self):
        # K1 r(y) = ((y+1) f0(y+1)/f0(y)) (Kr(y+1) - Kr(y)), any mixture
        ctx = gamma_context(1.5, 2.0)
        r = gamma_func(3, 1.5, 2.0)
        ys = np.arange(6.0)
        kr = apply_K(ctx, r, np.arange(7.0))
        shift = k_theta(ctx, ys) * (kr[1:] - kr[:-1])
        np.testing.assert_allclose(apply_K1(ctx, r, ys), shift, rtol=1e-10, atol=1e-13)

    def test_derivative_in_delta_characterization(self):
        # K1 r(y) = d/d delta at 0 of the tilted-prior Bayes rule
        s = 1.0
        ctx = gaussian_context(s)
        base = GaussianPrior(0.0, s)
        r = lambda t: np.tanh(t)
        ys = np.array([-2.0, 0.5, 1.5])
        h = 1e-5
        up = TiltedPrior(base, r, h, 1.0)
        dn = TiltedPrior(base, r, -h, 1.0)
        fd = (bayes_estimate(ctx.model, up, ys) - bayes_estimate(ctx.model, dn, ys)) / (2 * h)
        np.testing.assert_allclose(apply_K1(ctx, r, ys), fd, atol=1e-7)


class TestSKernel:
    def test_gaussian_closed_form_vs_definition(self):
        # sum/integral definition int f0(y) k(x|y) k(x2|y) dy
        s = 1.0
        ctx = gaussian_context(s)
        eta = ctx.eta
        yq, wq = ctx.y_rule.nodes, ctx.y_rule.weights
        f0 = ctx.f0_y

        def posterior_density(x, y):
            return np.exp(-0.5 * (x / eta - eta * y) ** 2) / (eta * math.sqrt(2 * math.pi))

        for x, x2 in ((0.0, 0.0), (0.5, -0.3), (1.2, 0.8)):
            direct = float(np.sum(wq * f0 * posterior_density(x, yq)
                                  * posterior_density(x2, yq)))
            assert s_kernel(ctx, x, x2) == pytest.approx(direct, rel=1e-7)

    def test_poisson_at_origin(self):
        # C(1,1) e^0 I_0(0) = (1+beta)^3 beta^alpha / Gamma(alpha) = 8
        ctx = gamma_context(1.0, 1.0)
        assert s_kernel(ctx, 0.0, 0.0) == pytest.approx(8.0, rel=1e-12)

    def test_poisson_closed_form_vs_definition(self):
        alpha, beta = 2.0, 1.0
        ctx = gamma_context(alpha, beta)
        ys = np.arange(80.0)
        from eblab.models import GammaPrior, mixture_density

        f0 = mixture_density(ctx.model, GammaPrior(alpha, beta), ys)

        def kernel_fn(x, y):
            # the closed form's kernel normalization: (1+beta) times the
            # posterior density
            return np.exp((y + alpha) * math.log(1 + beta) + (y + alpha - 1) * np.log(x)
                          - (1 + beta) * x - gammaln(y + alpha) + math.log1p(beta))

        for x, x2 in ((0.5, 0.5), (1.0, 2.0), (0.2, 3.0)):
            direct = float(np.sum(f0 * kernel_fn(x, ys) * kernel_fn(x2, ys)))
            assert s_kernel(ctx, x, x2) == pytest.approx(direct, rel=1e-7)

    def test_symmetry(self):
        for ctx in (gaussian_context(0.5), gamma_context(3.0, 2.0)):
            for x, x2 in ((0.1, 2.0), (1.5, 0.7)):
                assert s_kernel(ctx, x, x2) == pytest.approx(s_kernel(ctx, x2, x), rel=1e-14)

    def test_scale_factor(self):
        assert s_scale(gaussian_context(1.0)) == 1.0
        assert s_scale(gamma_context(2.0, 3.0)) == 16.0


class TestGram:
    def test_constant_family(self):
        ctx = gaussian_context(1.0)
        g = gram(ctx, [lambda t: np.ones_like(t)])
        assert g.k_gram[0, 0] == pytest.approx(1.0, rel=1e-12)
        assert abs(g.k1_gram[0, 0]) < 1e-14

    def test_gaussian_diagonal(self):
        c = gaussian_constants(1.0)
        ctx = gaussian_context(1.0)
        funcs = [psi_func(k, c.alpha1) for k in range(7)]
        g = gram(ctx, funcs)
        np.testing.assert_allclose(np.diag(g.k_gram),
                                   c.lambda0 * c.mu ** np.arange(7), rtol=1e-10)
        off = g.k_gram - np.diag(np.diag(g.k_gram))
        assert np.max(np.abs(off)) < 1e-12

    def test_k1_vanishes_beyond_band(self):
        c = gaussian_constants(0.25)
        ctx = gaussian_context(0.25)
        funcs = [psi_func(k, c.alpha1) for k in range(8)]
        g = gram(ctx, funcs)
        for k in range(8):
            for j in range(8):
                if abs(k - j) >= 3:
                    scale = math.sqrt(g.k1_gram[k, k] * g.k1_gram[j, j])
                    assert abs(g.k1_gram[k, j]) < 1e-9 * scale

    def test_gamma_requires_sup_bounds(self):
        ctx = gamma_context(2.0, 1.0)
        with pytest.raises(ValueError):
            gram(ctx, [lambda t: np.ones_like(t)])

    def test_gram_validation(self):
        with pytest.raises(ValueError):
            GramMatrices(np.array([[1.0, 0.5], [0.4, 1.0]]), np.eye(2))
        with pytest.raises(ValueError):
            GramMatrices(np.array([[1.0, 2.0], [2.0, 1.0]]), np.eye(2))


class TestEigenRelations:
    def test_poisson_alpha1_pointwise_eigenfunction(self):
        # for alpha = 1 the Laguerre system is a true eigenbasis:
        # S Gamma_k = (a_k / gamma2) Gamma_k with a_k = C(1, beta) z^k (1-z).
        # (Consistency check: (S Gamma_k, Gamma_k) = a_k/gamma2^2 = b_k and
        # ||Gamma_k||^2 = 1/gamma2 pin the eigenvalue to a_k/gamma2.)
        alpha, beta = 1.0, 1.0
        ctx = gamma_context(alpha, beta)
        pc = poisson_constants(alpha, beta, 4)
        c_const = (1 + beta) ** 3 * beta ** alpha
        xs = np.linspace(0.05, 2.5, 7)
        for k in (0, 1, 3):
            f = gamma_func(k, alpha, beta)
            eig = c_const * pc.z**k * (1 - pc.z) / pc.gamma2
            got = s_apply(ctx, f, xs, hi=30.0, panels=96, order=24)
            np.testing.assert_allclose(got, eig * f(xs), rtol=1e-8, atol=1e-12)
            # and the eigenvalue equals b_k / ||Gamma_k||^2 = b_k * gamma2
            assert eig == pytest.approx(math.exp(pc.log_b[k]) * pc.gamma2, rel=1e-12)

    def test_mehler_partial_sums(self):
        # sum_k mu^k/k! H_k(u) H_k(v) phi(u) phi(v) against the closed form,
        # summed through normalized Hermite functions so no term overflows
        for mu in (0.05, 0.15, 0.3):
            for u, v in ((0.0, 0.0), (1.0, -0.5), (2.0, 2.5)):
                tab_u = hermite_psi_table(100, 1.0, np.array([u]))[:, 0]
                tab_v = hermite_psi_table(100, 1.0, np.array([v]))[:, 0]
                # psi_k(with alpha1=1) = H_k sqrt(phi)/sqrt(k!), so the product
                # psi_k(u) psi_k(v) sqrt(phi(u) phi(v)) = mu-term without mu^k
                sphi = math.sqrt(math.exp(-0.5 * u * u - 0.5 * v * v) / (2 * math.pi))
                partial = float(np.sum(mu ** np.arange(101) * tab_u * tab_v) * sphi)
                rhs = math.exp(-(u * u + v * v - 2 * mu * u * v) / (2 * (1 - mu * mu))) \
                    / (2 * math.pi * math.sqrt(1 - mu * mu))
                assert partial == pytest.approx(rhs, rel=1e-8)

    def test_hardy_hille_partial_sums(self):
        # sum_n n! L_n(x) L_n(y) z^n / Gamma(n+nu+1) against the Bessel form
        for nu in (0.0, 1.5):
            for z in (0.05, 0.1, 0.2):
                for x, y in ((0.5, 1.0), (2.0, 3.0)):
                    total = 0.0
                    for n in range(101):
                        coef = math.exp(gammaln(n + 1) - gammaln(n + nu + 1))
                        total += (coef * laguerre_eval(n, nu, x)
                                  * laguerre_eval(n, nu, y) * z**n)
                    w = 2.0 * math.sqrt(x * y * z) / (1 - z)
                    rhs = ((x * y * z) ** (-nu / 2) / (1 - z)
                           * math.exp(-(x + y) * z / (1 - z) + w)
                           * bessel_i_scaled(nu, w))
                    assert total == pytest.approx(rhs, rel=1e-8)
