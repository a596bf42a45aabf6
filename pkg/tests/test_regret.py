import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from eblab.estimators import (
    BayesOracleEstimator,
    IdentityEstimator,
    RobbinsEstimator,
)
from eblab.models import (
    Discrete,
    GaussianPrior,
    MixtureModel,
    UniformPrior,
    empirical_distribution,
    mmse,
    prior_fourth_moment,
    sample_prior,
)
from eblab.regret import (
    CompactClass,
    SubexpClass,
    compound_regret_mc,
    individual_regret_mc,
    rate_function,
    robbins_certificate,
    scaling_experiment,
    tail_cutoff,
    total_regret_mc,
    v1,
    v2,
)

POI = MixtureModel.POISSON
GAU = MixtureModel.GAUSSIAN_LOCATION


def joint_se(*reports_and_scales):
    return math.sqrt(sum((scale * rep.std_error) ** 2
                         for rep, scale in reports_and_scales))


class TestV1V2:
    def test_brute_force_small_n(self):
        # independent oracle: direct enumeration over the binomial pmf
        for n in (1, 2, 5, 17):
            for p in (0.0, 0.05, 0.3, 0.5, 0.97, 1.0):
                pmf = stats.binom.pmf(np.arange(n + 1), n, p)
                ks = np.arange(1, n + 1)
                expect_v1 = float(np.sum(pmf[1:] / ks))
                expect_v2 = float(np.sum(pmf[1:] * (ks - n * p) ** 2 / ks))
                assert v1(n, p) == pytest.approx(expect_v1, abs=1e-13)
                assert v2(n, p) == pytest.approx(expect_v2, abs=1e-12)

    def test_worked_example(self):
        assert v1(2, 0.5) == pytest.approx(0.625)

    def test_degenerate_p(self):
        assert v2(10, 0.0) == 0.0
        assert v1(10, 0.0) == 0.0
        assert v1(10, 1.0) == pytest.approx(0.1)

    @given(n=st.integers(min_value=1, max_value=120),
           p=st.floats(min_value=0.0, max_value=1.0))
    @settings(max_examples=80, deadline=None)
    def test_candidate_constants(self, n, p):
        # c1 = c2 = 2 satisfy v1 <= c1 min(np, 1/np), v2 <= c2 min(1, np)
        np_ = n * p
        if np_ > 0:
            assert v1(n, p) <= 2.0 * min(np_, 1.0 / np_) + 1e-12
        assert v2(n, p) <= 2.0 * min(1.0, np_) + 1e-12


class TestTailCutoff:
    def test_worked_example(self):
        # minimal y >= 4 with 2 * 2^y e^-2 / y! <= 1e-4
        assert tail_cutoff(CompactClass(2.0), 10**4) == 10

    def test_degenerate_support(self):
        assert tail_cutoff(CompactClass(0.0), 100) == 1

    def test_monotone_in_n(self):
        cuts = [tail_cutoff(CompactClass(2.0), n) for n in (10, 10**2, 10**4, 10**6)]
        assert cuts == sorted(cuts)

    def test_subexponential(self):
        y1 = tail_cutoff(SubexpClass(1.0, 1.0), 1000)
        # tail a (1+b)^{-y}(1+b)/b = 2^{1-y} <= 1e-3 -> y = 11
        assert y1 == 11
        assert tail_cutoff(SubexpClass(1.0, 1.0), 10**6) > y1

    def test_rejects_bad_class(self):
        with pytest.raises(TypeError):
            tail_cutoff(object(), 10)


class TestCertificate:
    def test_point_mass_at_zero(self):
        cert = robbins_certificate(Discrete([0.0], [1.0]), 1000)
        assert cert.total == 0.0
        assert cert.i0 == 0.0 and cert.sum_i1 == 0.0 and cert.sum_i2 == 0.0

    def test_structure(self):
        cert = robbins_certificate(UniformPrior(0, 2), 10**4)
        assert cert.y0 >= 2 * cert.h
        assert cert.total == pytest.approx(
            cert.bookkeeping_constant * (cert.i0 + cert.sum_i1 + cert.sum_i2))
        assert cert.total > 0

    def test_dominates_monte_carlo(self):
        n = 1000
        rep = total_regret_mc(POI, UniformPrior(0, 2), RobbinsEstimator(), n,
                              replicates=120, seed=3)
        cert = robbins_certificate(UniformPrior(0, 2), n)
        assert cert.total >= rep.estimate + 3 * rep.std_error

    def test_bayes_ratio_bounded_by_support(self):
        from eblab.models import mixture_density

        prior = UniformPrior(0, 2)
        cert = robbins_certificate(prior, 10**4)
        ys = np.arange(cert.y_stop + 1.0)
        f = mixture_density(POI, prior, np.arange(cert.y_stop + 2.0))
        ratio = (ys + 1.0) * f[1:] / f[:-1]
        assert np.all(ratio <= cert.h * (1 + 1e-9))

    def test_rejects_unbounded_prior(self):
        with pytest.raises(ValueError):
            robbins_certificate(GaussianPrior(0, 1), 100)

    def test_rate_stability_over_n(self):
        # total / (log n / log log n)^2 bounded over a wide n range
        rate = rate_function("poisson-compact")
        ratios = [robbins_certificate(UniformPrior(0, 2), n).total / rate(n)
                  for n in (10**3, 10**4, 10**5, 10**6)]
        assert max(ratios) / min(ratios) < 3.0


class TestEngines:
    def test_oracle_zero_direct(self):
        prior = GaussianPrior(0, 1)
        oracle = BayesOracleEstimator(GAU, prior)
        rep = total_regret_mc(GAU, prior, oracle, 400, replicates=150, seed=1,
                              mode="direct")
        assert abs(rep.estimate) <= 3 * rep.std_error
        assert rep.estimate >= -3 * rep.std_error  # report invariant

    def test_identity_gaussian_closed_form(self):
        # E(Y - theta)^2 = 1 per coordinate, so regret = n (1 - mmse); for
        # N(0,1) prior that's n/2
        n = 3000
        rep = total_regret_mc(GAU, GaussianPrior(0, 1), IdentityEstimator(), n,
                              replicates=120, seed=2, mode="direct")
        assert rep.estimate == pytest.approx(n / 2, abs=3 * rep.std_error)

    def test_modes_agree(self):
        prior = UniformPrior(0, 2)
        a = total_regret_mc(POI, prior, RobbinsEstimator(), 400, replicates=150,
                            seed=4, mode="oracle-gap")
        b = total_regret_mc(POI, prior, RobbinsEstimator(), 400, replicates=150,
                            seed=4, mode="direct")
        assert abs(a.estimate - b.estimate) <= 3 * joint_se((a, 1.0), (b, 1.0))

    def test_individual_times_n_matches_total(self):
        prior = UniformPrior(0, 2)
        n = 150
        tot = total_regret_mc(POI, prior, RobbinsEstimator(), n, replicates=300,
                              seed=5)
        ind = individual_regret_mc(POI, prior, RobbinsEstimator(), n,
                                   replicates=3000, seed=6)
        assert abs(tot.estimate - n * ind.estimate) <= \
            3 * joint_se((tot, 1.0), (ind, float(n)))

    def test_individual_oracle_zero(self):
        prior = UniformPrior(0, 2)
        oracle = BayesOracleEstimator(POI, prior)
        rep = individual_regret_mc(POI, prior, oracle, 50, replicates=200, seed=7)
        assert rep.estimate == pytest.approx(0.0, abs=1e-12)

    def test_individual_n_equal_one(self):
        rep = individual_regret_mc(POI, UniformPrior(0, 2), RobbinsEstimator(), 1,
                                   replicates=50, seed=8)
        assert math.isfinite(rep.estimate)

    def test_determinism_and_replay(self):
        prior = UniformPrior(0, 2)
        a = total_regret_mc(POI, prior, RobbinsEstimator(), 200, replicates=30, seed=9)
        b = total_regret_mc(POI, prior, RobbinsEstimator(), 200, replicates=30, seed=9)
        np.testing.assert_array_equal(a.values, b.values)
        assert a.seed == 9

    def test_threads_match_serial(self):
        prior = UniformPrior(0, 2)
        a = total_regret_mc(POI, prior, RobbinsEstimator(), 300, replicates=24,
                            seed=10, threads=1)
        b = total_regret_mc(POI, prior, RobbinsEstimator(), 300, replicates=24,
                            seed=10, threads=3)
        np.testing.assert_array_equal(a.values, b.values)


class TestCompound:
    def test_oracle_given_theta_is_zero(self):
        rng = np.random.default_rng(0)
        theta = sample_prior(UniformPrior(0, 2), rng, 300)
        oracle = BayesOracleEstimator(POI, empirical_distribution(theta))
        rep = compound_regret_mc(POI, theta, oracle, 300, replicates=100, seed=11)
        assert abs(rep.estimate) <= 3 * rep.std_error + 1e-9

    def test_eb_at_most_compound(self):
        # EB regret <= compound regret (+ MC error) on shared seeds
        prior = UniformPrior(0, 2)
        n = 400
        eb = total_regret_mc(POI, prior, RobbinsEstimator(), n, replicates=150,
                             seed=12, mode="direct")
        comp = compound_regret_mc(POI, lambda rng, k: sample_prior(prior, rng, k),
                                  RobbinsEstimator(), n, replicates=150, seed=12)
        assert eb.estimate <= comp.estimate + 3 * joint_se((eb, 1.0), (comp, 1.0))

    def test_mmse_of_empirical_below_mmse(self):
        prior = UniformPrior(0, 2)
        target = mmse(POI, prior)
        rng = np.random.default_rng(13)
        vals = []
        for _ in range(60):
            theta = sample_prior(prior, rng, 250)
            vals.append(mmse(POI, empirical_distribution(theta)))
        vals = np.asarray(vals)
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        assert vals.mean() <= target + 3 * se

    def test_perm_inv_proxy_label(self):
        theta = np.zeros(20)
        rep = compound_regret_mc(POI, theta, IdentityEstimator(), 20,
                                 replicates=10, seed=1, proxy_for_perm_inv=True)
        assert rep.functional == "CompoundPermInv-proxy"
        assert "proxy" in rep.note


class TestTruncationLedger:
    def test_regret_difference_within_correction(self):
        # a bounded fixed rule under G vs its truncation G_a: the individual
        # regrets differ by at most 6 sqrt((M + a^4) n eps) (plus MC noise)
        from eblab.models import prior_nodes

        g = GaussianPrior(0.0, 1.0)
        a = 2.0
        nodes, w = prior_nodes(g, 400)
        keep = np.abs(nodes) <= a
        mass = float(w[keep].sum())
        g_a = Discrete(nodes[keep], w[keep] / mass)
        eps = 1.0 - mass
        m4 = prior_fourth_moment(g)
        n = 50

        fixed_prior = Discrete(np.array([-1.0, 0.0, 1.0]), np.ones(3) / 3)
        est = BayesOracleEstimator(GAU, fixed_prior)  # bounded in [-a, a]
        r_full = total_regret_mc(GAU, g, est, n, replicates=400, seed=3,
                                 mode="direct")
        r_trunc = total_regret_mc(GAU, g_a, est, n, replicates=400, seed=3,
                                  mode="direct")
        correction = 6.0 * math.sqrt((m4 + a**4) * n * eps)
        noise = 3 * joint_se((r_full, 1.0 / n), (r_trunc, 1.0 / n))
        assert r_trunc.estimate / n >= r_full.estimate / n - correction - noise


class TestScaling:
    def test_oracle_rows_are_zero(self):
        prior = UniformPrior(0, 2)
        oracle = BayesOracleEstimator(POI, prior)
        rows = scaling_experiment(POI, prior, oracle, [100, 300], replicates=20,
                                  seed=14)
        for row in rows:
            assert abs(row.estimate) < 1e-12
            assert row.ratio == pytest.approx(0.0, abs=1e-12)
            assert row.rate > 0

    def test_requires_increasing_grid(self):
        with pytest.raises(ValueError):
            scaling_experiment(POI, UniformPrior(0, 2), RobbinsEstimator(),
                               [100, 100], replicates=2, seed=0)

    def test_rate_functions(self):
        n = 10**4
        assert rate_function("poisson-compact")(n) == pytest.approx(
            (math.log(n) / math.log(math.log(n))) ** 2)
        assert rate_function("poisson-subexp")(n) == pytest.approx(math.log(n) ** 3)
        assert rate_function("gaussian-subgaussian")(n) == pytest.approx(
            math.log(n) ** 2)
        with pytest.raises(KeyError):
            rate_function("bogus")
