"""Data-driven estimators: Robbins, NPMLE/GMLEB, and reference baselines.

The Robbins rule for Poisson counts plugs empirical frequencies into the
Bayes formula: theta_j = (Y_j + 1) N(Y_j + 1) / N(Y_j) with N(y) the number
of occurrences of y in the sample (so the denominator never vanishes at an
observed point).  The predictive (train on n-1, predict a fresh point)
variant adds one to the denominator, which keeps it finite at unseen y.

GMLEB estimates the mixing distribution by nonparametric maximum likelihood
over a fixed grid (EM ascent) and then applies the plug-in Bayes rule.
"""

from __future__ import annotations

import warnings
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .models import (
    Discrete,
    MixtureModel,
    Prior,
    bayes_rule,
)

__all__ = [
    "BayesOracleEstimator",
    "GMLEBEstimator",
    "IdentityEstimator",
    "NPMLEConvergenceWarning",
    "RobbinsEstimator",
    "default_npmle_grid",
    "gmleb_predict",
    "make_estimator",
    "npmle_fit",
    "robbins_predict",
    "robbins_total",
]


class NPMLEConvergenceWarning(UserWarning):
    """EM stopped at max_iter with the reported first-order gradient gap."""


def _as_counts(y, allow_empty: bool = False) -> np.ndarray:
    y = np.atleast_1d(np.asarray(y))
    if y.size == 0:
        if allow_empty:
            return y.astype(np.int64)
        raise ValueError("empty observation vector")
    if np.any(y < 0) or np.any(y != np.round(y)):
        raise ValueError("Poisson observations are nonnegative integers")
    return y.astype(np.int64)


def robbins_total(y) -> np.ndarray:
    """Robbins estimates for every coordinate of a Poisson count vector."""
    y = _as_counts(y)
    counts = np.bincount(y, minlength=int(y.max()) + 2)
    return (y + 1.0) * counts[y + 1] / counts[y]


def robbins_predict(train, y: int) -> float:
    """Add-one Robbins prediction at y from a training sample.

    (y+1) N(y+1) / (N(y) + 1); the extra one in the denominator keeps the
    rule finite at points never seen in training (empty training included).
    """
    train = _as_counts(train, allow_empty=True)
    y = int(y)
    if y < 0:
        raise ValueError("y must be a nonnegative integer")
    n_y = int(np.count_nonzero(train == y))
    n_y1 = int(np.count_nonzero(train == y + 1))
    return (y + 1.0) * n_y1 / (n_y + 1.0)


def default_npmle_grid(model: MixtureModel, y: np.ndarray, size: int = 400) -> np.ndarray:
    """Default support grid: [0, max(Y) + 3 sqrt(max(Y)+1)] for Poisson,
    [min(Y)-1, max(Y)+1] for the Gaussian channel."""
    y = np.asarray(y, dtype=float)
    if model is MixtureModel.POISSON:
        top = float(y.max())
        return np.linspace(0.0, top + 3.0 * np.sqrt(top + 1.0), size)
    return np.linspace(float(y.min()) - 1.0, float(y.max()) + 1.0, size)


def _log_component_matrix(model: MixtureModel, y: np.ndarray,
                          grid: np.ndarray) -> np.ndarray:
    """log f_theta_k(y_i) for observations (rows) against grid atoms (cols)."""
    if model is MixtureModel.POISSON:
        from .models import _poisson_logpmf

        return _poisson_logpmf(y[:, None], grid[None, :])
    d = y[:, None] - grid[None, :]
    return -0.5 * d * d - 0.5 * np.log(2.0 * np.pi)


def npmle_fit(model: MixtureModel, y, grid=None, tol: float = 1e-4,
              max_iter: int = 2000, loglik_trace: list | None = None) -> Discrete:
    """Nonparametric MLE of the mixing distribution over a fixed grid, by EM.

    Maximizes sum_j log sum_k w_k f_{theta_k}(Y_j) over weights w on `grid`.
    The log-likelihood is nondecreasing across iterations (appended to
    `loglik_trace` when a list is passed); convergence is declared at the
    first-order condition max_k (1/n) sum_j f_k / f_mix <= 1 + tol.
    Non-convergence after max_iter emits NPMLEConvergenceWarning with the
    final gradient gap.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if grid is None:
        grid = default_npmle_grid(model, y)
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty NPMLE grid")
    if model is MixtureModel.POISSON:
        uniq, counts = np.unique(y, return_counts=True)
    else:
        uniq, counts = y, np.ones(y.size)
    n = float(counts.sum())
    L = _log_component_matrix(model, uniq, grid)
    logw = np.full(grid.size, -np.log(grid.size))
    for _ in range(max_iter):
        ll_obs = logsumexp(L + logw[None, :], axis=1)
        if loglik_trace is not None:
            loglik_trace.append(float(counts @ ll_obs))
        # gradient of the mixture likelihood in the direction of each atom
        grad = counts @ np.exp(L - ll_obs[:, None]) / n
        if grad.max() <= 1.0 + tol:
            break
        logw = logw + np.log(np.maximum(grad, 1e-300))
        logw -= logsumexp(logw)
    else:
        warnings.warn(
            f"NPMLE EM hit max_iter={max_iter}; first-order gap "
            f"{grad.max() - 1.0:.3e}", NPMLEConvergenceWarning, stacklevel=2)
    w = np.exp(logw)
    keep = w > 1e-12
    w = w[keep] / w[keep].sum()
    return Discrete(grid[keep], w)


def npmle_loglik(model: MixtureModel, prior: Discrete, y) -> float:
    """Mixture log-likelihood of data under a discrete prior."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    L = _log_component_matrix(model, y, prior.atoms)
    return float(np.sum(logsumexp(L, axis=1, b=prior.weights[None, :])))


def gmleb_predict(fitted: Prior, model: MixtureModel, y):
    """Bayes rule under an estimated prior (the plug-in EB estimate)."""
    return bayes_rule(model, fitted)(y)


# Estimator objects for the Monte Carlo engines -------------------------------
#
# interface: kind (str); estimate_all(y) -> vector of estimates for a full
# sample; fit(train) -> predictor callable for a single fresh observation.


class BayesOracleEstimator:
    """The oracle: Bayes rule of a known prior (zero regret by definition)."""

    def __init__(self, model: MixtureModel, prior: Prior):
        self.kind = "bayes-oracle"
        self.model = model
        self.prior = prior
        self._rule = bayes_rule(model, prior)

    def estimate_all(self, y) -> np.ndarray:
        return np.asarray(self._rule(np.asarray(y, dtype=float)))

    def fit(self, train) -> Callable:
        return self._rule


class IdentityEstimator:
    """thetahat = Y, the maximum-likelihood baseline."""

    kind = "identity"

    def estimate_all(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float).copy()

    def fit(self, train) -> Callable:
        return lambda y: float(y)


class RobbinsEstimator:
    """Robbins frequency-ratio rule (Poisson only)."""

    kind = "robbins"

    def estimate_all(self, y) -> np.ndarray:
        return robbins_total(y)

    def fit(self, train) -> Callable:
        train = _as_counts(train, allow_empty=True)
        counts = np.bincount(train, minlength=int(train.max()) + 2 if train.size else 1)

        def predict(y):
            y = int(y)
            n_y = counts[y] if y < counts.size else 0
            n_y1 = counts[y + 1] if y + 1 < counts.size else 0
            return (y + 1.0) * n_y1 / (n_y + 1.0)

        return predict


class GMLEBEstimator:
    """NPMLE-then-Bayes: fit the mixing distribution, apply its Bayes rule."""

    def __init__(self, model: MixtureModel, grid_size: int = 400,
                 tol: float = 1e-4, max_iter: int = 1000):
        self.kind = "gmleb"
        self.model = model
        self.grid_size = grid_size
        self.tol = tol
        self.max_iter = max_iter

    def _fit_prior(self, y) -> Discrete:
        y = np.asarray(y, dtype=float)
        grid = default_npmle_grid(self.model, y, self.grid_size)
        return npmle_fit(self.model, y, grid, tol=self.tol, max_iter=self.max_iter)

    def estimate_all(self, y) -> np.ndarray:
        fitted = self._fit_prior(y)
        return np.asarray(bayes_rule(self.model, fitted)(np.asarray(y, dtype=float)))

    def fit(self, train) -> Callable:
        rule = bayes_rule(self.model, self._fit_prior(train))
        return lambda y: float(rule(float(y)))


def make_estimator(kind: str, model: MixtureModel, prior: Prior | None = None,
                   **params):
    """Estimator registry used by the CLI: robbins | robbins-add-one |
    gmleb | bayes-oracle | identity."""
    if kind in ("robbins", "robbins-add-one"):
        return RobbinsEstimator()
    if kind == "gmleb":
        return GMLEBEstimator(model, **params)
    if kind == "identity":
        return IdentityEstimator()
    if kind == "bayes-oracle":
        if prior is None:
            raise KeyError("bayes-oracle requires a prior")
        return BayesOracleEstimator(model, prior)
    raise KeyError(f"unknown estimator: {kind!r}")
