"""Priors, forward channels, mixture densities, Bayes estimators and samplers.

Two observation channels are supported: Gaussian location with unit noise
variance (Y = theta + Z, Z ~ N(0,1)) and Poisson (Y ~ Poi(theta), theta >= 0).
A prior (mixing distribution) G induces the mixture density
f_G(y) = int f_theta(y) G(dtheta); the Bayes estimator is the posterior mean

    Gaussian:  y + f_G'(y) / f_G(y)          (Tweedie correction)
    Poisson:   (y + 1) f_G(y+1) / f_G(y)

Closed forms are used wherever the prior admits them (Gaussian prior gives a
N(mean, 1+variance) mixture, Gamma prior gives a negative binomial, uniform
priors reduce to incomplete-Gamma / normal-cdf differences); everything else
falls back to quadrature against the prior.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammainc, gammaln, logsumexp, ndtr

from .specfun import QuadDomain, laguerre_rule_normalized, quadrature

__all__ = [
    "DegenerateDensityWarning",
    "Discrete",
    "ExponentialPrior",
    "GammaPrior",
    "GaussianPrior",
    "MixtureModel",
    "Prior",
    "TiltedPrior",
    "UniformPrior",
    "bayes_estimate",
    "bayes_rule",
    "empirical_distribution",
    "mixture_density",
    "mixture_density_derivative",
    "mmse",
    "poisson_support_cutoff",
    "prior_from_dict",
    "prior_fourth_moment",
    "prior_mean",
    "prior_nodes",
    "prior_second_moment",
    "prior_support",
    "prior_to_dict",
    "sample",
    "sample_prior",
]

_WEIGHT_TOL = 1e-12
_SQRT_2PI = math.sqrt(2.0 * math.pi)


class DegenerateDensityWarning(UserWarning):
    """The mixture density vanished (or underflowed) at a query point."""


class MixtureModel(enum.Enum):
    """Forward channel of the mixture experiment."""

    GAUSSIAN_LOCATION = "gaussian-location"
    POISSON = "poisson"


# Prior variants -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Discrete:
    """Finite mixing distribution: atoms with probability weights."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.atleast_1d(np.asarray(self.atoms, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if atoms.shape != weights.shape or atoms.size == 0:
            raise ValueError("atoms and weights must be nonempty and congruent")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1 within {_WEIGHT_TOL}")
        order = np.argsort(atoms)
        object.__setattr__(self, "atoms", atoms[order])
        object.__setattr__(self, "weights", weights[order])


@dataclass(frozen=True)
class GaussianPrior:
    mean: float
    variance: float

    def __post_init__(self):
        if self.variance <= 0:
            raise ValueError("variance must be positive")


@dataclass(frozen=True)
class GammaPrior:
    shape: float
    rate: float

    def __post_init__(self):
        if self.shape <= 0 or self.rate <= 0:
            raise ValueError("shape and rate must be positive")


@dataclass(frozen=True)
class ExponentialPrior:
    rate: float

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("rate must be positive")


@dataclass(frozen=True)
class UniformPrior:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("uniform prior requires hi > lo")


@dataclass(frozen=True, eq=False)
class TiltedPrior:
    """Multiplicative perturbation of a base prior.

    dG = (1 + delta * r) dG0 / normalizer with normalizer = 1 + delta * int r dG0,
    which keeps the density exactly normalized.  `r_bound` is a declared
    sup-norm bound on r (an input, not inferred); for perturbation families it
    certifies the density ratio dG/dG0 within [1/2, 3/2].
    """

    base: "Prior"
    r: Callable[[np.ndarray], np.ndarray]
    delta: float
    r_bound: float
    normalizer: float = field(default=math.nan)

    def __post_init__(self):
        if isinstance(self.base, TiltedPrior):
            raise ValueError("nested tilted priors are not supported")
        if self.r_bound < 0:
            raise ValueError("r_bound must be nonnegative")
        if abs(self.delta) * self.r_bound >= 1.0:
            raise ValueError("|delta| * r_bound must stay below 1 (positive density)")
        if math.isnan(self.normalizer):
            theta, w = prior_nodes(self.base)
            object.__setattr__(
                self, "normalizer", 1.0 + self.delta * float(np.sum(w * self.r(theta)))
            )
        if self.normalizer <= 0:
            raise ValueError("tilt normalizer must be positive")


Prior = Discrete | GaussianPrior | GammaPrior | ExponentialPrior | UniformPrior | TiltedPrior


# Generic prior helpers ------------------------------------------------------


def prior_support(prior: Prior) -> tuple[float, float]:
    """Smallest interval carrying the prior's mass ([lo, hi], may be infinite)."""
    if isinstance(prior, Discrete):
        return float(prior.atoms[0]), float(prior.atoms[-1])
    if isinstance(prior, GaussianPrior):
        return -math.inf, math.inf
    if isinstance(prior, (GammaPrior, ExponentialPrior)):
        return 0.0, math.inf
    if isinstance(prior, UniformPrior):
        return prior.lo, prior.hi
    if isinstance(prior, TiltedPrior):
        return prior_support(prior.base)
    raise TypeError(f"unknown prior: {prior!r}")


def prior_nodes(prior: Prior, order: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes/weights approximating integration against the prior.

    Exact for Discrete; Gauss rules matched to the density otherwise.  Tilted
    priors reuse the base rule with reweighted weights (the ratio is bounded,
    so the rule's accuracy carries over).
    """
    if isinstance(prior, Discrete):
        return prior.atoms.copy(), prior.weights.copy()
    if isinstance(prior, GaussianPrior):
        rule = quadrature(QuadDomain.REAL_LINE_GAUSSIAN, order)
        return prior.mean + math.sqrt(prior.variance) * rule.nodes, rule.weights
    if isinstance(prior, GammaPrior):
        nodes, w = laguerre_rule_normalized(order, prior.shape - 1.0)
        return nodes / prior.rate, w
    if isinstance(prior, ExponentialPrior):
        nodes, w = laguerre_rule_normalized(order, 0.0)
        return nodes / prior.rate, w
    if isinstance(prior, UniformPrior):
        panels = max(1, order // 32)
        rule = quadrature(QuadDomain.TRUNCATED_INTERVAL, min(order, 32),
                          lo=prior.lo, hi=prior.hi, panels=panels)
        return rule.nodes, rule.weights / (prior.hi - prior.lo)
    if isinstance(prior, TiltedPrior):
        theta, w = prior_nodes(prior.base, order)
        return theta, w * (1.0 + prior.delta * prior.r(theta)) / prior.normalizer
    raise TypeError(f"unknown prior: {prior!r}")


def _moment(prior: Prior, k: int) -> float:
    if isinstance(prior, Discrete):
        return float(np.sum(prior.weights * prior.atoms**k))
    if isinstance(prior, GaussianPrior):
        m, v = prior.mean, prior.variance
        if k == 1:
            return m
        if k == 2:
            return m * m + v
        if k == 4:
            return m**4 + 6 * m * m * v + 3 * v * v
    if isinstance(prior, GammaPrior):
        a, b = prior.shape, prior.rate
        return math.exp(gammaln(a + k) - gammaln(a)) / b**k
    if isinstance(prior, ExponentialPrior):
        return math.factorial(k) / prior.rate**k
    if isinstance(prior, UniformPrior):
        lo, hi = prior.lo, prior.hi
        return (hi ** (k + 1) - lo ** (k + 1)) / ((k + 1) * (hi - lo))
    theta, w = prior_nodes(prior)
    return float(np.sum(w * theta**k))


def prior_mean(prior: Prior) -> float:
    return _moment(prior, 1)


def prior_second_moment(prior: Prior) -> float:
    return _moment(prior, 2)


def prior_fourth_moment(prior: Prior) -> float:
    return _moment(prior, 4)


def _require_poisson_support(prior: Prior):
    lo, _ = prior_support(prior)
    if lo < 0:
        raise ValueError("Poisson model requires a prior supported on [0, inf)")


# Channel primitives ---------------------------------------------------------


def _phi(x):
    return np.exp(-0.5 * np.square(x)) / _SQRT_2PI


def _poisson_logpmf(y, theta):
    """log P(Poi(theta) = y), broadcasting; theta = 0 handled exactly."""
    y = np.asarray(y, dtype=float)
    theta = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = y * np.log(theta) - theta - gammaln(y + 1.0)
    # Poi(0) is a point mass at 0.
    zero = theta == 0.0
    if np.any(zero):
        out = np.where(zero, np.where(y == 0.0, 0.0, -np.inf), out)
    return out


def poisson_support_cutoff(prior: Prior, tol: float = 1e-10) -> int:
    """Smallest Y with certified Poisson-mixture tail mass sum_{y>Y} f(y) <= tol.

    Compactly supported priors use the majorant h^y e^{-h} / y! (whose tail
    beyond 2h is at most twice its leading term); Gamma-type priors use the
    eventual geometric decay of the negative binomial; tilted priors inherit
    the base cutoff through the bounded density ratio.
    """
    _require_poisson_support(prior)
    if isinstance(prior, TiltedPrior):
        return poisson_support_cutoff(prior.base, tol * 2.0 / 3.0)
    lo, hi = prior_support(prior)
    if math.isfinite(hi):
        h = max(hi, 1e-12)
        y = max(math.ceil(2.0 * h), 1)
        while 2.0 * math.exp(y * math.log(h) - h - gammaln(y + 1)) > tol:
            y += 1
        return y
    if isinstance(prior, (GammaPrior, ExponentialPrior)):
        a = prior.shape if isinstance(prior, GammaPrior) else 1.0
        b = prior.rate
        # f0(y+1)/f0(y) = (y+a)/((y+1)(1+b)) <= q0 := (2+b)/(2(1+b)) < 1 eventually
        q0 = (2.0 + b) / (2.0 * (1.0 + b))
        y_star = max(0, math.ceil((a - q0 * (1.0 + b)) / (q0 * (1.0 + b) - 1.0)))
        y = max(y_star, 1)
        while _negbin_pmf(y, a, b) * q0 / (1.0 - q0) > tol:
            y += 1
        return y
    raise ValueError("cannot certify a Poisson tail cutoff for this prior")


def _negbin_pmf(y, shape: float, rate: float):
    y = np.asarray(y, dtype=float)
    out = np.exp(
        gammaln(y + shape) - gammaln(y + 1.0) - gammaln(shape)
        + shape * math.log(rate / (1.0 + rate)) - y * math.log1p(rate)
    )
    return out if out.ndim else float(out)


# Mixture density ------------------------------------------------------------


def mixture_density(model: MixtureModel, prior: Prior, y):
    """f_G(y); strictly positive on the interior of the observation support.

    Accepts scalar or array y (reals for the Gaussian channel, nonnegative
    integers for Poisson).
    """
    scalar = np.isscalar(y)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if model is MixtureModel.POISSON:
        _require_poisson_support(prior)
        if np.any(y < 0) or np.any(y != np.round(y)):
            raise ValueError("Poisson observations are nonnegative integers")
        out = _poisson_mixture_pmf(prior, y)
    else:
        out = _gaussian_mixture_pdf(prior, y)
    return float(out[0]) if scalar else out


def _gaussian_mixture_pdf(prior: Prior, y: np.ndarray) -> np.ndarray:
    if isinstance(prior, Discrete):
        return _phi(y[:, None] - prior.atoms[None, :]) @ prior.weights
    if isinstance(prior, GaussianPrior):
        s2 = 1.0 + prior.variance
        return np.exp(-0.5 * (y - prior.mean) ** 2 / s2) / math.sqrt(2 * math.pi * s2)
    if isinstance(prior, UniformPrior):
        # Phi(y-lo) - Phi(y-hi), written through the nearer tail so the
        # difference stays accurate far outside the support
        mid = 0.5 * (prior.lo + prior.hi)
        upper = y > mid
        diff = np.where(upper,
                        ndtr(prior.hi - y) - ndtr(prior.lo - y),
                        ndtr(y - prior.lo) - ndtr(y - prior.hi))
        return diff / (prior.hi - prior.lo)
    if isinstance(prior, TiltedPrior):
        base = _gaussian_mixture_pdf(prior.base, y)
        theta, w0 = prior_nodes(prior.base)
        tilt = _phi(y[:, None] - theta[None, :]) @ (w0 * prior.r(theta))
        return (base + prior.delta * tilt) / prior.normalizer
    theta, w = prior_nodes(prior)
    return _phi(y[:, None] - theta[None, :]) @ w


def _poisson_mixture_pmf(prior: Prior, y: np.ndarray) -> np.ndarray:
    if isinstance(prior, Discrete):
        logp = _poisson_logpmf(y[:, None], prior.atoms[None, :])
        return np.exp(logsumexp(logp, axis=1, b=prior.weights[None, :]))
    if isinstance(prior, GammaPrior):
        return np.asarray(_negbin_pmf(y, prior.shape, prior.rate))
    if isinstance(prior, ExponentialPrior):
        return np.asarray(_negbin_pmf(y, 1.0, prior.rate))
    if isinstance(prior, UniformPrior):
        # int_lo^hi theta^y e^-theta dtheta / y! = gammainc-difference
        return (gammainc(y + 1.0, prior.hi) - gammainc(y + 1.0, prior.lo)) / (
            prior.hi - prior.lo
        )
    if isinstance(prior, TiltedPrior):
        base = _poisson_mixture_pmf(prior.base, y)
        theta, w0 = prior_nodes(prior.base)
        logp = _poisson_logpmf(y[:, None], theta[None, :])
        tilt = np.exp(logp) @ (w0 * prior.r(theta))
        return (base + prior.delta * tilt) / prior.normalizer
    theta, w = prior_nodes(prior)
    logp = _poisson_logpmf(y[:, None], theta[None, :])
    return np.exp(logp) @ w


def mixture_density_derivative(model: MixtureModel, prior: Prior, y):
    """d/dy f_G(y) for the Gaussian channel, computed analytically.

    Each variant differentiates its closed form (mixtures of shifted
    Gaussians); no finite differences are involved, so the Tweedie
    correction stays noiseless.
    """
    if model is not MixtureModel.GAUSSIAN_LOCATION:
        raise ValueError("density derivative is defined for the Gaussian channel")
    scalar = np.isscalar(y)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = _gaussian_mixture_pdf_prime(prior, y)
    return float(out[0]) if scalar else out


def _gaussian_mixture_pdf_prime(prior: Prior, y: np.ndarray) -> np.ndarray:
    if isinstance(prior, Discrete):
        d = y[:, None] - prior.atoms[None, :]
        return (-d * _phi(d)) @ prior.weights
    if isinstance(prior, GaussianPrior):
        s2 = 1.0 + prior.variance
        return -(y - prior.mean) / s2 * _gaussian_mixture_pdf(prior, y)
    if isinstance(prior, UniformPrior):
        return (_phi(y - prior.lo) - _phi(y - prior.hi)) / (prior.hi - prior.lo)
    if isinstance(prior, TiltedPrior):
        base = _gaussian_mixture_pdf_prime(prior.base, y)
        theta, w0 = prior_nodes(prior.base)
        d = y[:, None] - theta[None, :]
        tilt = (-d * _phi(d)) @ (w0 * prior.r(theta))
        return (base + prior.delta * tilt) / prior.normalizer
    theta, w = prior_nodes(prior)
    d = y[:, None] - theta[None, :]
    return (-d * _phi(d)) @ w


# Bayes estimator ------------------------------------------------------------


def bayes_estimate(model: MixtureModel, prior: Prior, y):
    """Posterior mean E_G[theta | Y = y].

    Degenerate points (f_G(y) = 0, e.g. a Poisson prior concentrated at 0
    queried at y >= 1) return the continuity value 0 and emit a
    DegenerateDensityWarning.
    """
    return bayes_rule(model, prior)(y)


def bayes_rule(model: MixtureModel, prior: Prior) -> Callable:
    """Vectorized posterior-mean rule y -> E_G[theta | Y = y]."""
    if model is MixtureModel.POISSON:
        _require_poisson_support(prior)
        if isinstance(prior, GammaPrior):
            return lambda y: (np.asarray(y, dtype=float) + prior.shape) / (1.0 + prior.rate)
        if isinstance(prior, ExponentialPrior):
            return lambda y: (np.asarray(y, dtype=float) + 1.0) / (1.0 + prior.rate)
        if isinstance(prior, Discrete):
            return lambda y: _discrete_posterior_mean_poisson(prior, y)
        return _CachedPoissonRule(prior)
    if isinstance(prior, GaussianPrior):
        v, m = prior.variance, prior.mean
        return lambda y: (v * np.asarray(y, dtype=float) + m) / (1.0 + v)
    if isinstance(prior, Discrete):
        return lambda y: _discrete_posterior_mean_gaussian(prior, y)
    return lambda y: _gaussian_tweedie_rule(prior, y)


def _finish(out, scalar):
    return float(out[0]) if scalar else out


def _discrete_posterior_mean_gaussian(prior: Discrete, y):
    scalar = np.isscalar(y)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    logw = np.log(np.maximum(prior.weights, 1e-300))[None, :] \
        - 0.5 * (y[:, None] - prior.atoms[None, :]) ** 2
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    return _finish((w @ prior.atoms) / w.sum(axis=1), scalar)


def _discrete_posterior_mean_poisson(prior: Discrete, y):
    scalar = np.isscalar(y)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    logp = _poisson_logpmf(y[:, None], prior.atoms[None, :]) \
        + np.log(np.maximum(prior.weights, 1e-300))[None, :]
    finite = np.isfinite(logp).any(axis=1)
    out = np.zeros_like(y)
    if np.any(~finite):
        warnings.warn("mixture pmf vanished at a query point; returning 0 by continuity",
                      DegenerateDensityWarning, stacklevel=3)
    if np.any(finite):
        lp = logp[finite]
        lp -= lp.max(axis=1, keepdims=True)
        w = np.exp(lp)
        out[finite] = (w @ prior.atoms) / w.sum(axis=1)
    return _finish(out, scalar)


class _CachedPoissonRule:
    """Posterior-mean rule (y+1) f(y+1)/f(y) with a growing per-y pmf table.

    Monte Carlo loops query the same small set of counts millions of times;
    the table is filled lazily in blocks and only ever grows.
    """

    def __init__(self, prior: Prior):
        self.prior = prior
        self._table = np.empty(0)

    def _ensure(self, ymax: int):
        if self._table.size <= ymax:
            top = max(ymax + 1, 2 * self._table.size, 16)
            self._table = np.asarray(
                _poisson_mixture_pmf(self.prior, np.arange(top + 1, dtype=float)))

    def __call__(self, y):
        scalar = np.isscalar(y)
        y = np.atleast_1d(np.asarray(y))
        yi = y.astype(np.int64)
        self._ensure(int(yi.max()) + 1)
        num = self._table[yi + 1]
        den = self._table[yi]
        out = np.zeros(y.shape, dtype=float)
        ok = den > 0
        if not ok.all():
            warnings.warn("mixture pmf vanished at a query point; returning 0 "
                          "by continuity", DegenerateDensityWarning, stacklevel=3)
        out[ok] = (yi[ok] + 1.0) * num[ok] / den[ok]
        return _finish(out, scalar)


def _gaussian_tweedie_rule(prior: Prior, y):
    scalar = np.isscalar(y)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    den = _gaussian_mixture_pdf(prior, y)
    out = np.empty_like(y)
    ok = den > 0
    if np.any(~ok):
        lo, hi = prior_support(prior)
        warnings.warn("mixture density underflowed; clamping to the support hull",
                      DegenerateDensityWarning, stacklevel=3)
        out[~ok] = np.clip(y[~ok], lo, hi)
    if np.any(ok):
        out[ok] = y[ok] + _gaussian_mixture_pdf_prime(prior, y[ok]) / den[ok]
    return _finish(out, scalar)


# MMSE -----------------------------------------------------------------------


def mmse(model: MixtureModel, prior: Prior, *, tail_tol: float = 1e-8) -> float:
    """Bayes risk E[(theta - E[theta|Y])^2] of one observation.

    Closed forms for the conjugate pairs; otherwise E[theta^2] - E[thetahat^2]
    with the outer expectation over y by quadrature (Gaussian channel) or
    summation to a certified cutoff (Poisson).  Raises if the Poisson cutoff
    would leave more than `tail_tol` mass.
    """
    if isinstance(prior, Discrete) and prior.atoms.size == 1:
        return 0.0
    if model is MixtureModel.GAUSSIAN_LOCATION and isinstance(prior, GaussianPrior):
        return prior.variance / (1.0 + prior.variance)
    if model is MixtureModel.POISSON:
        _require_poisson_support(prior)
        if isinstance(prior, GammaPrior):
            return prior.shape / (prior.rate * (1.0 + prior.rate))
        if isinstance(prior, ExponentialPrior):
            return 1.0 / (prior.rate * (1.0 + prior.rate))
        cutoff = poisson_support_cutoff(prior, min(1e-13, tail_tol))
        tail = 1.0 - float(np.sum(_poisson_mixture_pmf(prior, np.arange(cutoff + 1.0))))
        if tail > tail_tol:
            raise ArithmeticError(
                f"Poisson tail truncation failed: {tail:.3e} mass beyond y={cutoff}")
        ys = np.arange(cutoff + 1.0)
        f = _poisson_mixture_pmf(prior, ys)
        that = bayes_rule(MixtureModel.POISSON, prior)(ys)
        return prior_second_moment(prior) - float(np.sum(f * that**2))
    # Gaussian channel, generic prior: integrate y over the prior's effective
    # support (all but ~1e-14 of the node mass) padded by 9 noise sd's.
    theta, w = prior_nodes(prior)
    cum = np.cumsum(w) / np.sum(w)
    keep = (cum > 1e-14) & (cum < 1.0 - 1e-14)
    core = theta[keep] if keep.any() else theta
    lo, hi = float(core.min()) - 9.0, float(core.max()) + 9.0
    rule = quadrature(QuadDomain.TRUNCATED_INTERVAL, 32, lo=lo, hi=hi,
                      panels=max(16, int(hi - lo)))
    f = _gaussian_mixture_pdf(prior, rule.nodes)
    that = bayes_rule(model, prior)(rule.nodes)
    return prior_second_moment(prior) - float(np.sum(rule.weights * f * that**2))


# Sampling -------------------------------------------------------------------


def sample_prior(prior: Prior, rng: np.random.Generator, size: int) -> np.ndarray:
    if isinstance(prior, Discrete):
        return rng.choice(prior.atoms, size=size, p=prior.weights)
    if isinstance(prior, GaussianPrior):
        return rng.normal(prior.mean, math.sqrt(prior.variance), size)
    if isinstance(prior, GammaPrior):
        return rng.gamma(prior.shape, 1.0 / prior.rate, size)
    if isinstance(prior, ExponentialPrior):
        return rng.exponential(1.0 / prior.rate, size)
    if isinstance(prior, UniformPrior):
        return rng.uniform(prior.lo, prior.hi, size)
    if isinstance(prior, TiltedPrior):
        return _sample_tilted(prior, rng, size)
    raise TypeError(f"unknown prior: {prior!r}")


def _sample_tilted(prior: TiltedPrior, rng: np.random.Generator, size: int) -> np.ndarray:
    # Rejection against the base prior; envelope (1 + |delta| r_bound) / normalizer.
    envelope = (1.0 + abs(prior.delta) * prior.r_bound) / prior.normalizer
    out = np.empty(size)
    got = 0
    while got < size:
        block = max(64, int(1.5 * (size - got)))
        x = sample_prior(prior.base, rng, block)
        ratio = (1.0 + prior.delta * prior.r(x)) / prior.normalizer
        keep = x[rng.uniform(0.0, envelope, block) < ratio]
        take = min(keep.size, size - got)
        out[got:got + take] = keep[:take]
        got += take
    return out


def sample(model: MixtureModel, prior: Prior, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """n iid draws theta_i ~ G and Y_i ~ P_{theta_i}; deterministic given seed.

    `seed` may be anything np.random.default_rng accepts (int, SeedSequence,
    Generator); parallel callers should pass independent spawned streams.
    """
    if n < 1:
        raise ValueError("sample size must be at least 1")
    if model is MixtureModel.POISSON:
        _require_poisson_support(prior)
    rng = np.random.default_rng(seed)
    theta = sample_prior(prior, rng, n)
    if model is MixtureModel.POISSON:
        y = rng.poisson(theta).astype(float)
    else:
        y = theta + rng.standard_normal(n)
    return theta, y


def empirical_distribution(theta) -> Discrete:
    """Empirical distribution of a parameter vector, duplicates merged."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.size == 0:
        raise ValueError("empty parameter vector")
    atoms, counts = np.unique(theta, return_counts=True)
    return Discrete(atoms, counts / theta.size)


# Serialization ---------------------------------------------------------------

_VARIANT_NAMES = {
    Discrete: "discrete",
    GaussianPrior: "gaussian",
    GammaPrior: "gamma",
    ExponentialPrior: "exponential",
    UniformPrior: "uniform",
}


def prior_to_dict(prior: Prior) -> dict:
    """Config-schema form of a prior (tilted priors are runtime-only)."""
    if isinstance(prior, Discrete):
        return {"variant": "discrete",
                "atoms": [[float(a), float(w)] for a, w in zip(prior.atoms, prior.weights)]}
    if isinstance(prior, GaussianPrior):
        return {"variant": "gaussian", "mean": prior.mean, "variance": prior.variance}
    if isinstance(prior, GammaPrior):
        return {"variant": "gamma", "shape": prior.shape, "rate": prior.rate}
    if isinstance(prior, ExponentialPrior):
        return {"variant": "exponential", "rate": prior.rate}
    if isinstance(prior, UniformPrior):
        return {"variant": "uniform", "lo": prior.lo, "hi": prior.hi}
    raise ValueError(f"prior variant {type(prior).__name__} has no config form")


def prior_from_dict(spec: dict) -> Prior:
    spec = dict(spec)
    variant = spec.pop("variant", None)
    try:
        if variant == "discrete":
            pairs = spec.pop("atoms")
            atoms = [p[0] for p in pairs]
            weights = [p[1] for p in pairs]
            out = Discrete(np.asarray(atoms), np.asarray(weights))
        elif variant == "gaussian":
            out = GaussianPrior(**spec)
        elif variant == "gamma":
            out = GammaPrior(**spec)
        elif variant == "exponential":
            out = ExponentialPrior(**spec)
        elif variant == "uniform":
            out = UniformPrior(**spec)
        else:
            raise KeyError(f"unknown prior variant: {variant!r}")
        return out
    except TypeError as exc:
        raise KeyError(f"bad prior parameters for variant {variant!r}: {exc}") from exc
