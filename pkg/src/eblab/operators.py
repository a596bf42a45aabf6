"""Posterior-expectation operators K, K1 and the self-adjoint kernels they induce.

For a base prior G0 with mixture density f0, K maps a bounded function r to
the posterior mean Kr(y) = E_{G0}[r(theta) | Y = y], and

    K1 r = K(theta r) - (K theta)(K r),

the first-order response of the Bayes rule to a multiplicative tilt of G0.
Two base families admit closed forms:

* Gaussian base N(0, s):  Kr(y) = (r(eta .) * phi)(eta y) with
  eta = sqrt(s/(s+1)), K theta = eta^2 y, and K1 r = eta^2 K(r') for
  differentiable r.  K*K is a Mehler kernel.
* Gamma base Gamma(alpha, beta) under the Poisson channel: the posterior of
  theta given Y=y is Gamma(y+alpha, beta+1), K theta = (y+alpha)/(1+beta),
  and K1 r = K(x r') / (1+beta).  K*K has a scaled-Bessel kernel.

Kernel-normalization note: the closed-form Poisson kernel S carries the
constant C(alpha,beta) = (1+beta)^3 beta^alpha / Gamma(alpha), i.e. it is
(1+beta)^2 times the Gram of the conditional-expectation operator.  The
factor is exposed as `s_scale(ctx)` so S-inner products and K-Gram entries
convert exactly into each other; debug-mode double-path checks exercise both
routes on the same functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .models import (
    GammaPrior,
    GaussianPrior,
    MixtureModel,
    Prior,
    mixture_density,
)
from .specfun import QuadDomain, bessel_i_scaled, laguerre_rule_normalized, quadrature

__all__ = [
    "BasePriorContext",
    "GramMatrices",
    "TailCertificationError",
    "apply_K",
    "apply_K1",
    "apply_K1_smooth",
    "gamma_context",
    "gaussian_context",
    "gram",
    "k_theta",
    "s_apply",
    "s_kernel",
    "s_scale",
]


class TailCertificationError(ArithmeticError):
    """The y-summation cutoff could not be certified within the configured cap."""


@dataclass
class GramMatrices:
    """Gram matrices of a function family under K and K1, in L2(f0)."""

    k_gram: np.ndarray
    k1_gram: np.ndarray

    def __post_init__(self):
        for name, g in (("k_gram", self.k_gram), ("k1_gram", self.k1_gram)):
            g = np.asarray(g, dtype=float)
            if not np.allclose(g, g.T, atol=1e-12 * max(1.0, np.abs(g).max())):
                raise ValueError(f"{name} is not symmetric")
            w = np.linalg.eigvalsh(0.5 * (g + g.T))
            if w.min() < -1e-10 * max(1.0, w.max()):
                raise ValueError(f"{name} is not positive semidefinite")


class BasePriorContext:
    """Immutable evaluation context for (model, G0): cached f0 and quadrature.

    Build through `gaussian_context` or `gamma_context`.
    """

    def __init__(self, model: MixtureModel, g0: Prior):
        self.model = model
        self.g0 = g0

    # subclasses fill in channel-specific machinery


class _GaussianContext(BasePriorContext):
    def __init__(self, s: float, x_order: int, y_halfwidth_factor: float,
                 y_panels: int, y_order: int):
        if s <= 0:
            raise ValueError("prior variance s must be positive")
        super().__init__(MixtureModel.GAUSSIAN_LOCATION, GaussianPrior(0.0, s))
        self.s = s
        self.eta = math.sqrt(s / (s + 1.0))
        self.x_rule = quadrature(QuadDomain.REAL_LINE_GAUSSIAN, x_order)
        half = y_halfwidth_factor * math.sqrt(1.0 + s)
        self.y_rule = quadrature(QuadDomain.TRUNCATED_INTERVAL, y_order,
                                 lo=-half, hi=half, panels=y_panels)
        self.f0_y = mixture_density(self.model, self.g0, self.y_rule.nodes)
        if np.any(self.f0_y <= 0):
            raise ValueError("f0 must be strictly positive on the y-domain")


class _GammaContext(BasePriorContext):
    def __init__(self, alpha: float, beta: float, x_order: int, y_cap: int):
        if alpha <= 0 or beta <= 0:
            raise ValueError("Gamma base requires alpha, beta > 0")
        super().__init__(MixtureModel.POISSON, GammaPrior(alpha, beta))
        self.alpha = alpha
        self.beta = beta
        self.x_order = x_order
        self.y_cap = y_cap
        self._post_rules: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def posterior_rule(self, y: int) -> tuple[np.ndarray, np.ndarray]:
        """Nodes/probability-weights of the Gamma(y+alpha, beta+1) posterior."""
        y = int(y)
        got = self._post_rules.get(y)
        if got is None:
            t, w = laguerre_rule_normalized(self.x_order, y + self.alpha - 1.0)
            got = (t / (1.0 + self.beta), w)
            self._post_rules[y] = got
        return got

    def f0(self, y) -> np.ndarray:
        return np.asarray(mixture_density(self.model, self.g0, y))


def gaussian_context(s: float, *, x_order: int = 200, y_halfwidth_factor: float = 8.0,
                     y_panels: int = 40, y_order: int = 24) -> BasePriorContext:
    """Context for the Gaussian-location channel with base prior N(0, s).

    The y-integration domain is [-L, L], L = y_halfwidth_factor * sqrt(1+s),
    covered by a composite Gauss-Legendre rule.
    """
    return _GaussianContext(s, x_order, y_halfwidth_factor, y_panels, y_order)


def gamma_context(alpha: float, beta: float, *, x_order: int = 128,
                  y_cap: int = 100_000) -> BasePriorContext:
    """Context for the Poisson channel with base prior Gamma(alpha, beta).

    Posterior expectations use generalized Gauss-Laguerre rules matched to
    shape y+alpha and rate beta+1, of order `x_order`.
    """
    return _GammaContext(alpha, beta, x_order, y_cap)


# K and K1 -------------------------------------------------------------------


def k_theta(ctx: BasePriorContext, y):
    """K applied to the identity: the base Bayes rule E_{G0}[theta | Y=y]."""
    y = np.asarray(y, dtype=float)
    if isinstance(ctx, _GaussianContext):
        return ctx.eta**2 * y
    if isinstance(ctx, _GammaContext):
        return (y + ctx.alpha) / (1.0 + ctx.beta)
    raise TypeError("unsupported context")


def apply_K(ctx: BasePriorContext, r: Callable, y):
    """Posterior expectation Kr(y) = E_{G0}[r(theta) | Y = y].

    y may be a scalar or an array (integers for the Poisson channel).
    """
    scalar = np.isscalar(y)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if isinstance(ctx, _GaussianContext):
        x, w = ctx.x_rule.nodes, ctx.x_rule.weights
        theta = ctx.eta * (x[None, :] + ctx.eta * y[:, None])
        out = r(theta) @ w
    elif isinstance(ctx, _GammaContext):
        out = np.empty_like(y)
        for i, yi in enumerate(y):
            nodes, w = ctx.posterior_rule(int(yi))
            out[i] = float(np.dot(w, r(nodes)))
    else:
        raise TypeError("unsupported context")
    return float(out[0]) if scalar else out


def apply_K1(ctx: BasePriorContext, r: Callable, y):
    """K1 r(y) = K(theta r)(y) - K(theta)(y) K(r)(y), by the definition."""
    scalar = np.isscalar(y)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    ktr = apply_K(ctx, lambda t: t * r(t), y)
    out = ktr - k_theta(ctx, y) * apply_K(ctx, r, y)
    return float(out[0]) if scalar else out


def apply_K1_smooth(ctx: BasePriorContext, r_prime: Callable, y):
    """Differential route for K1 when r has a (bounded) derivative r'.

    Gaussian base: K1 r = eta^2 K(r'); Gamma base: K1 r = K(x r'(x)) / (1+beta).
    Agrees with `apply_K1` within quadrature tolerance.
    """
    if isinstance(ctx, _GaussianContext):
        return ctx.eta**2 * apply_K(ctx, r_prime, y)
    if isinstance(ctx, _GammaContext):
        return apply_K(ctx, lambda t: t * r_prime(t), y) / (1.0 + ctx.beta)
    raise TypeError("unsupported context")


# S kernels ------------------------------------------------------------------


def s_scale(ctx: BasePriorContext) -> float:
    """Conversion factor: (S f, g)_Leb = s_scale * (K f, K g)_{L2(f0)}.

    1 for the Gaussian base; (1+beta)^2 for the Gamma base, where the
    closed-form kernel's constant C(alpha,beta) = (1+beta)^3 beta^alpha /
    Gamma(alpha) absorbs two powers of (1+beta) beyond the
    conditional-expectation normalization.
    """
    if isinstance(ctx, _GaussianContext):
        return 1.0
    if isinstance(ctx, _GammaContext):
        return (1.0 + ctx.beta) ** 2
    raise TypeError("unsupported context")


def s_kernel(ctx: BasePriorContext, x: float, x2: float) -> float:
    """Closed-form kernel of S: Mehler (Gaussian) or scaled-Bessel (Poisson).

    Gaussian: lambda1 exp(-lambda2/2 (x^2 + x2^2 - 2 rho x x2)).
    Poisson:  C(a,b) e^{-(x+x2)(1+b)} ((1+b) x x2)^{(a-1)/2}
              I_{a-1}(2 sqrt((1+b) x x2)), evaluated through the scaled
              Bessel function so the exponentials never overflow.
    """
    if isinstance(ctx, _GaussianContext):
        s = ctx.s
        lam1 = (1.0 + s) / (2.0 * math.pi * s * math.sqrt(1.0 + 2.0 * s))
        lam2 = (1.0 + s) ** 2 / (s * (1.0 + 2.0 * s))
        rho = s / (1.0 + s)
        return lam1 * math.exp(-0.5 * lam2 * (x * x + x2 * x2 - 2.0 * rho * x * x2))
    if isinstance(ctx, _GammaContext):
        if x < 0 or x2 < 0:
            raise ValueError("Poisson kernel arguments must be nonnegative")
        a, b = ctx.alpha, ctx.beta
        log_c = 3.0 * math.log1p(b) + a * math.log(b) - gammaln(a)
        prod = (1.0 + b) * x * x2
        nu = a - 1.0
        if prod == 0.0:
            if nu > 0.0:
                return 0.0
            if nu == 0.0:
                return math.exp(log_c - (x + x2) * (1.0 + b))
            raise ValueError("kernel is singular on the boundary for alpha < 1")
        w = 2.0 * math.sqrt(prod)
        # e^{-(x+x2)(1+b) + w} = e^{-(sqrt((1+b)x) - sqrt((1+b)x2))^2} <= 1
        log_val = (log_c - (x + x2) * (1.0 + b) + 0.5 * nu * math.log(prod) + w
                   + math.log(bessel_i_scaled(nu, w)))
        return math.exp(log_val)
    raise TypeError("unsupported context")


def s_apply(ctx: BasePriorContext, f: Callable, x, *, hi: float,
            panels: int = 64, order: int = 24):
    """(S f)(x) = int S(x, x') f(x') dx' by composite quadrature on [lo, hi].

    The Gaussian kernel integrates over [-hi, hi]; the Poisson one over
    [0, hi].  `hi` must be chosen large enough for the integrand's decay.
    """
    lo = -hi if isinstance(ctx, _GaussianContext) else 0.0
    rule = quadrature(QuadDomain.TRUNCATED_INTERVAL, order, lo=lo, hi=hi, panels=panels)
    fx = f(rule.nodes)
    scalar = np.isscalar(x)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    for i, xi in enumerate(x):
        kern = np.array([s_kernel(ctx, xi, t) for t in rule.nodes])
        out[i] = float(np.sum(rule.weights * kern * fx))
    return float(out[0]) if scalar else out


# Gram assembly --------------------------------------------------------------


def _gamma_y_cutoff(ctx: _GammaContext, sup_bounds: Sequence[float],
                    atol: float) -> int:
    """Smallest Y so that |tail of any Gram entry| <= atol, certified by
    sum_{y>Y} f0(y) * a_i * a_j <= atol with the negative-binomial tail bound."""
    a, b = ctx.alpha, ctx.beta
    amax = max(float(v) for v in sup_bounds)
    q0 = (2.0 + b) / (2.0 * (1.0 + b))
    y_star = max(1, math.ceil((a - q0 * (1.0 + b)) / (q0 * (1.0 + b) - 1.0)))
    y = y_star
    log_amax2 = 2.0 * math.log(max(amax, 1e-300))
    log_target = math.log(atol)
    while True:
        log_tail = (gammaln(y + a) - gammaln(y + 1.0) - gammaln(a)
                    + a * math.log(b / (1.0 + b)) - y * math.log1p(b)
                    + math.log(q0 / (1.0 - q0)))
        if log_tail + log_amax2 <= log_target:
            return y
        y += 1
        if y > ctx.y_cap:
            raise TailCertificationError(
                f"could not certify Gram tail below {atol:g} within y <= {ctx.y_cap}")


def gram(ctx: BasePriorContext, funcs: Sequence[Callable],
         sup_bounds: Sequence[float] | None = None, *,
         tail_atol: float = 1e-16) -> GramMatrices:
    """Gram matrices (K r_i, K r_j) and (K1 r_i, K1 r_j) in L2(f0).

    Gaussian base: integrals over the context's fixed y-domain.  Gamma base:
    sums over y up to a certified cutoff; `sup_bounds` (declared sup-norm
    bounds of the funcs, not inferred) are required there to certify the
    truncated tail below `tail_atol`.
    """
    m = len(funcs)
    if m == 0:
        raise ValueError("empty function family")
    if isinstance(ctx, _GaussianContext):
        yq, wq, f0 = ctx.y_rule.nodes, ctx.y_rule.weights, ctx.f0_y
        B = np.stack([apply_K(ctx, r, yq) for r in funcs])
        A = np.stack([apply_K(ctx, (lambda rr: lambda t: t * rr(t))(r), yq)
                      for r in funcs])
        K1 = A - k_theta(ctx, yq)[None, :] * B
        wf = wq * f0
        return GramMatrices(_symmetrize((B * wf) @ B.T), _symmetrize((K1 * wf) @ K1.T))
    if isinstance(ctx, _GammaContext):
        if sup_bounds is None:
            raise ValueError("Gamma-base gram requires declared sup-norm bounds")
        if len(sup_bounds) != m:
            raise ValueError("one sup bound per function is required")
        ycut = _gamma_y_cutoff(ctx, sup_bounds, tail_atol)
        ys = np.arange(ycut + 2, dtype=float)  # +1 extra for the K1 shift
        f0 = ctx.f0(ys)
        B = np.stack([apply_K(ctx, r, ys) for r in funcs])
        kth = k_theta(ctx, ys[:-1])
        # K(theta r)(y) = K(theta)(y) * Kr(y+1)  (shift identity, exact)
        K1 = kth[None, :] * (B[:, 1:] - B[:, :-1])
        wf = f0[:-1]
        Bmain = B[:, :-1]
        return GramMatrices(_symmetrize((Bmain * wf) @ Bmain.T),
                            _symmetrize((K1 * wf) @ K1.T))
    raise TypeError("unsupported context")


def _symmetrize(g: np.ndarray) -> np.ndarray:
    return 0.5 * (g + g.T)
