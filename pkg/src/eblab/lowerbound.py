"""Adversarial perturbation families and the Assouad-program auditor.

The lower-bound program perturbs a base prior G0 by bounded functions
r_1..r_m, forming 2^m tilted priors dG_u = (1 + delta r_u) dG0 / (1 + delta
mu_u), r_u = sum u_i r_i.  When the r_i are orthonormalized under K1 and
near-orthogonal under K, the program certifies an individual-regret lower
bound C delta^2 (m (4 tau - tau1^2) - tau2) with
delta = min(1/max(sqrt(n gamma), m a), 1/(16 m a)).

Two constructions are provided:

* Gaussian-Hermite: base N(0, s), r_j proportional to the dilated Hermite
  functions psi_{m+3j}; index spacing 3 makes the K1 Gram exactly diagonal.
* Poisson-Laguerre: base Gamma(alpha, beta), r_j proportional to
  Gamma_k(x) = e^{-gamma1 x} L_k^{alpha-1}(gamma2 x) for k in
  {m, m+3, ...}; the same spacing kills all S1 cross terms.

Normalizers are computed in log-domain.  Families whose Gram cannot be
resolved in double precision (the inner products cancel tens of digits at
large shape parameters) carry closed-form Grams and evaluate the audit's
posterior-mean tables in 50-digit arithmetic before converting to floats;
the audit verdict is scale-invariant either way.  The Hellinger variant
(density-estimation risk) uses centered perturbations orthonormal under K
instead of K1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath as mp
import numpy as np
from scipy.special import gammaln

from . import models, operators
from .models import MixtureModel, TiltedPrior, mixture_density, prior_nodes
from .operators import BasePriorContext, GramMatrices, gamma_context, gaussian_context
from .specfun import hermite_psi_table, laguerre_table, log_binomial

__all__ = [
    "AssouadFamily",
    "AuditEntry",
    "AuditReport",
    "GaussianConstants",
    "NormalizationError",
    "PerturbationFamily",
    "PoissonConstants",
    "assouad_build",
    "audit",
    "gaussian_constants",
    "gaussian_family",
    "hellinger_audit",
    "hellinger_gaussian_family",
    "poisson_constants",
    "poisson_family",
    "regression_gap",
]


class NormalizationError(ArithmeticError):
    """A family normalizer under- or overflowed beyond what log-domain fixes."""


# Derived constants ------------------------------------------------------------


@dataclass(frozen=True)
class GaussianConstants:
    """Spectral constants of the Gaussian-base construction at variance s.

    rho = s/(1+s), rho1 = sqrt(1-rho^2), mu = rho/(1+rho1) in (0,1),
    alpha1 = sqrt(2 lambda2 rho1) with lambda2 = (1+s)^2/(s(1+2s)),
    lambda0 = 1/sqrt(2 pi s (1+rho1)), lambda3 = lambda0 alpha1^2 eta^4 / 4.
    """

    s: float
    rho: float
    rho1: float
    mu: float
    alpha1: float
    lambda0: float
    lambda3: float
    eta: float
    lambda2: float


def gaussian_constants(s: float) -> GaussianConstants:
    if s <= 0:
        raise ValueError("s must be positive")
    rho = s / (1.0 + s)
    rho1 = math.sqrt(1.0 - rho * rho)
    mu = rho / (1.0 + rho1)
    lambda2 = (1.0 + s) ** 2 / (s * (1.0 + 2.0 * s))
    alpha1 = math.sqrt(2.0 * lambda2 * rho1)
    lambda0 = 1.0 / math.sqrt(2.0 * math.pi * s * (1.0 + rho1))
    eta = math.sqrt(s / (1.0 + s))
    lambda3 = lambda0 * alpha1**2 * eta**4 / 4.0
    return GaussianConstants(s, rho, rho1, mu, alpha1, lambda0, lambda3, eta, lambda2)


@dataclass(frozen=True)
class PoissonConstants:
    """Laguerre-system constants for the Gamma(alpha, beta) base.

    z = (sqrt(1+beta) - sqrt(beta))^2, gamma1 = gamma3 = sqrt(beta(1+beta)),
    gamma2 = 2 gamma1, and b_k = C2 z^k Gamma(k+alpha)/k! with
    C2 = C(alpha,beta) (1-z) ((1+beta) z)^{(alpha-1)/2} gamma2^{-alpha-1},
    C(alpha,beta) = (1+beta)^3 beta^alpha / Gamma(alpha).  b may underflow
    for large parameters; log_b is authoritative.
    """

    alpha: float
    beta: float
    z: float
    gamma1: float
    gamma2: float
    gamma3: float
    log_b: np.ndarray
    b: np.ndarray = field(init=False)

    def __post_init__(self):
        with np.errstate(under="ignore"):
            object.__setattr__(self, "b", np.exp(self.log_b))

    def s1_bracket(self, k) -> np.ndarray:
        """alpha^2 + (k+1)(k+alpha) z + (k+alpha-1) k / z."""
        k = np.asarray(k, dtype=float)
        a, z = self.alpha, self.z
        return a * a + (k + 1.0) * (k + a) * z + (k + a - 1.0) * k / z

    def log_s1_diag(self, k) -> np.ndarray:
        """log (S1 Gamma_k, Gamma_k), in the closed-form kernel convention."""
        k = np.asarray(k)
        return (self.log_b[k] + np.log(self.s1_bracket(k))
                - math.log(4.0) - 2.0 * math.log1p(self.beta))

    def log_k1_norm_sq(self, k) -> np.ndarray:
        """log ||K1 Gamma_k||^2_{L2(f0)} under the conditional-expectation K."""
        return self.log_s1_diag(k) - 2.0 * math.log1p(self.beta)

    def k_norm_ratio(self, k) -> np.ndarray:
        """||K r_k||^2 for r_k = Gamma_k / ||K1 Gamma_k||: 4(1+beta)^2 / bracket."""
        return 4.0 * (1.0 + self.beta) ** 2 / self.s1_bracket(k)


def poisson_constants(alpha: float, beta: float, kmax: int) -> PoissonConstants:
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    z = (math.sqrt(1.0 + beta) - math.sqrt(beta)) ** 2
    gamma1 = math.sqrt(beta * (1.0 + beta))
    gamma2 = 2.0 * gamma1
    log_c = 3.0 * math.log1p(beta) + alpha * math.log(beta) - gammaln(alpha)
    log_c2 = (log_c + math.log1p(-z) + 0.5 * (alpha - 1.0) * math.log((1.0 + beta) * z)
              - (alpha + 1.0) * math.log(gamma2))
    ks = np.arange(kmax + 1, dtype=float)
    log_b = log_c2 + ks * math.log(z) + gammaln(ks + alpha) - gammaln(ks + 1.0)
    return PoissonConstants(alpha, beta, z, gamma1, gamma2, gamma1, log_b)


# Perturbation families ---------------------------------------------------------


class PerturbationFamily:
    """Base prior context plus m bounded perturbations with their Gram data.

    Attributes: ctx, r (list of callables), sup_bounds (per-function certified
    sup-norm bounds), a = max bound, gamma, gram (K and K1 Gram matrices of
    the r_i), tau, tau1, tau2, mu (vector of int r_i dG0), indices, kind,
    gram_path ("quadrature" for measured Grams, "analytic" for closed-form).
    """

    def __init__(self, ctx: BasePriorContext, funcs: Sequence[Callable],
                 sup_bounds: Sequence[float], gram: GramMatrices, mu: np.ndarray,
                 *, indices: Sequence[int] | None = None, kind: str = "custom",
                 gram_path: str = "quadrature", constants=None,
                 orthonormal_in: str = "k1"):
        self.ctx = ctx
        self.r = list(funcs)
        self.sup_bounds = np.asarray(sup_bounds, dtype=float)
        self.a = float(self.sup_bounds.max())
        self.gram = gram
        self.mu = np.asarray(mu, dtype=float)
        self.indices = list(indices) if indices is not None else list(range(len(funcs)))
        self.kind = kind
        self.gram_path = gram_path
        self.constants = constants
        self.orthonormal_in = orthonormal_in
        contrast = gram.k1_gram if orthonormal_in == "k1" else gram.k_gram
        self.tau, self.tau1, self.tau2 = contrast_stats(contrast)
        self.gamma = float(np.max(np.diag(gram.k_gram)))
        if not (self.a > 0 and np.isfinite(self.a)):
            raise NormalizationError("sup-norm bound must be positive and finite")

    @property
    def m(self) -> int:
        return len(self.r)

    def r_sum(self, u: np.ndarray) -> Callable:
        """x -> sum_i u_i r_i(x)."""
        u = np.asarray(u, dtype=float)
        funcs = self.r

        def combo(x):
            total = u[0] * np.asarray(funcs[0](x), dtype=float)
            for c, f in zip(u[1:], funcs[1:]):
                if c != 0.0:
                    total = total + c * f(x)
            return total

        return combo


def contrast_stats(g: np.ndarray) -> tuple[float, float, float]:
    """(tau, tau1, tau2) measured from a Gram matrix.

    tau is the minimum of v' G v / ||v||^2 over nonzero v in {0,+-1}^m
    (enumerated exactly for m <= 8, lower-bounded by the smallest eigenvalue
    otherwise); tau1^2 is the maximum of v' G v / m over v in {0,1}^m.  With
    tau defined as that minimum, the contrast lower bound holds with
    tau2 = 0 exactly.
    """
    g = np.asarray(g, dtype=float)
    m = g.shape[0]
    if m == 0:
        return 0.0, 0.0, 0.0
    if m <= 8:
        # all {0,+-1}^m contrasts, skipping 0
        digits = (np.arange(3**m)[:, None] // 3 ** np.arange(m)[None, :]) % 3
        V = np.where(digits == 2, -1.0, digits.astype(float))[1:]
        quad = np.einsum("vi,ij,vj->v", V, g, V)
        nrm = np.einsum("vi,vi->v", V, V)
        tau = float(np.min(quad / nrm))
        binary = (V >= 0).all(axis=1)
        tau1 = math.sqrt(max(0.0, float(np.max(quad[binary]))) / m)
    else:
        w = np.linalg.eigvalsh(0.5 * (g + g.T))
        tau = float(w.min())
        tau1 = math.sqrt(max(0.0, float(w.max())))
    return tau, tau1, 0.0


def _guarded_exp(log_value: float, what: str) -> float:
    if log_value > 700.0:
        raise NormalizationError(f"{what} overflows double precision "
                                 f"(log value {log_value:.1f})")
    return math.exp(log_value)


# quadrature can resolve a Gram entry only while the norms stay well above
# the cancellation floor; below this the closed forms take over
_GRAM_QUADRATURE_FLOOR = math.log(1e-16)


def gaussian_family(s: float, m: int, *, ctx: BasePriorContext | None = None,
                    measure_gram: str | bool = "auto") -> PerturbationFamily:
    """Hermite perturbation family r_j = xi_{m+3j} psi_{m+3j}, j = 1..m.

    xi_i = 1/sqrt((K1 psi_i, K1 psi_i)) makes the K1 Gram the identity; the
    index spacing of 3 removes every tridiagonal cross term.  Sup-norm
    bounds are xi_i sqrt(alpha1) (certified, not estimated).

    measure_gram: "quadrature" | "analytic" | "auto" (booleans accepted for
    the first two).  "auto" measures by quadrature while the smallest K1
    norm stays resolvable in doubles (>= 1e-8); beyond that the defining
    integrals cancel more digits than doubles carry and the exact diagonal
    closed forms take over.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if isinstance(measure_gram, bool):
        measure_gram = "quadrature" if measure_gram else "analytic"
    c = gaussian_constants(s)
    indices = [m + 3 * j for j in range(1, m + 1)]
    if ctx is None:
        ctx = _widened_gaussian_context(s, indices[-1])
    log_mu = math.log(c.mu)
    funcs, bounds, log_xi = [], [], []
    for i in indices:
        # log xi_i in log-domain: K1 diagonal = lambda3 (i mu^{i-1} + (i+1) mu^{i+1})
        log_diag = (math.log(c.lambda3) + (i - 1) * log_mu
                    + math.log(i + (i + 1) * c.mu * c.mu))
        if not math.isfinite(log_diag):
            raise NormalizationError(f"K1 normalizer underflowed at index {i}")
        lxi = -0.5 * log_diag
        xi = _guarded_exp(lxi, f"normalizer xi_{i}")
        log_xi.append(lxi)
        funcs.append(_hermite_func(i, c.alpha1, xi))
        bounds.append(_guarded_exp(lxi + 0.5 * math.log(c.alpha1), f"sup bound {i}"))
    if measure_gram == "auto":
        min_log_diag = -2.0 * max(log_xi)
        measure_gram = ("quadrature" if min_log_diag > _GRAM_QUADRATURE_FLOOR
                        else "analytic")
    if measure_gram == "quadrature":
        g = operators.gram(ctx, funcs)
    else:
        g = _gaussian_analytic_gram(c, indices, np.array(log_xi))
    mu_vec = np.array([_centered_moment_gaussian(c, i, xi)
                       for i, xi in zip(indices, np.exp(log_xi))])
    return PerturbationFamily(ctx, funcs, bounds, g, mu_vec, indices=indices,
                              kind="gaussian-hermite", gram_path=measure_gram,
                              constants=c)


def _widened_gaussian_context(s: float, kmax: int) -> BasePriorContext:
    # f0 (K psi_k)^2 decays like exp(-c y^2) y^{2k} with c < 1/(2(1+s)); the
    # default halfwidth 8 sqrt(1+s) truncates a visible tail once k exceeds
    # ~15, so Gram-quality contexts widen with the top index
    factor = 8.0 + 2.0 * math.sqrt(kmax)
    panels = max(40, int(5.0 * factor))
    return gaussian_context(s, y_halfwidth_factor=factor, y_panels=panels)


def _hermite_func(i: int, alpha1: float, scale: float) -> Callable:
    def r(x, _i=i, _a=alpha1, _s=scale):
        return _s * hermite_psi_table(_i, _a, np.asarray(x, dtype=float))[_i]

    return r


def _gaussian_analytic_gram(c: GaussianConstants, indices: Sequence[int],
                            log_xi: np.ndarray) -> GramMatrices:
    # spacing 3 leaves the normalized K1 Gram exactly the identity and the
    # K Gram exactly diagonal lambda0 mu^i xi_i^2
    m = len(indices)
    k_diag = np.exp(2.0 * log_xi + math.log(c.lambda0)
                    + np.asarray(indices) * math.log(c.mu))
    return GramMatrices(np.diag(k_diag), np.eye(m))


def _centered_moment_gaussian(c: GaussianConstants, i: int, xi: float) -> float:
    """int xi psi_i dG0, by quadrature against the N(0, s) base."""
    theta, w = prior_nodes(models.GaussianPrior(0.0, c.s), 200)
    return float(np.sum(w * xi * hermite_psi_table(i, c.alpha1, theta)[i]))


def hellinger_gaussian_family(s: float, m: int, *, ctx: BasePriorContext | None = None,
                              measure_gram: str | bool = "auto") -> PerturbationFamily:
    """Centered family for the density-estimation (Hellinger) program.

    r_k = psi_k / ||K psi_k|| over the odd indices k = 1, 3, ..., 2m-1: odd
    Hermite functions integrate to zero against the even base prior (the
    even-index ones do not), and the K Gram is exactly the identity after
    normalization.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if isinstance(measure_gram, bool):
        measure_gram = "quadrature" if measure_gram else "analytic"
    c = gaussian_constants(s)
    indices = [2 * j - 1 for j in range(1, m + 1)]
    if ctx is None:
        ctx = _widened_gaussian_context(s, indices[-1])
    funcs, bounds, log_norms = [], [], []
    for i in indices:
        log_norm = -0.5 * (math.log(c.lambda0) + i * math.log(c.mu))
        scale = _guarded_exp(log_norm, f"K normalizer {i}")
        log_norms.append(log_norm)
        funcs.append(_hermite_func(i, c.alpha1, scale))
        bounds.append(scale * math.sqrt(c.alpha1))
    if measure_gram == "auto":
        measure_gram = ("quadrature"
                        if -2.0 * max(log_norms) > _GRAM_QUADRATURE_FLOOR
                        else "analytic")
    if measure_gram == "quadrature":
        g = operators.gram(ctx, funcs)
    else:
        # normalized K Gram is exactly the identity; the K1 Gram is not used
        # by the Hellinger program but its diagonal follows the tridiagonal
        # closed form scaled by the K normalizers
        k1_diag = [math.exp(2.0 * ln + math.log(c.lambda3) + (i - 1) * math.log(c.mu)
                            + math.log(i + (i + 1) * c.mu**2))
                   for i, ln in zip(indices, log_norms)]
        g = GramMatrices(np.eye(m), np.diag(k1_diag))
    mu_vec = np.zeros(m)  # odd functions against an even base prior
    fam = PerturbationFamily(ctx, funcs, bounds, g, mu_vec, indices=indices,
                             kind="gaussian-hermite-centered",
                             gram_path=measure_gram, constants=c,
                             orthonormal_in="k")
    return fam


def poisson_family(alpha: float, beta: float, m: int, *,
                   measure_gram: str = "auto") -> PerturbationFamily:
    """Laguerre perturbation family for the Gamma(alpha, beta) base.

    r_k = Gamma_k / ||K1 Gamma_k|| over k in {m, m+3, ..., 4m-3} (the first m
    indices of the arithmetic progression starting at m with step 3; the
    spacing removes all S1 cross terms, so the K1 Gram is the identity).
    Compact-regime preset: beta >= 2 and alpha >= 4m; the subexponential
    preset uses alpha = 1.

    measure_gram: "quadrature" | "analytic" | "auto".  "auto" measures by
    quadrature when the K1 norms stay within double-precision reach and
    falls back to the closed forms otherwise.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    indices = [m + 3 * j for j in range(m)]
    kmax = indices[-1]
    pc = poisson_constants(alpha, beta, kmax + 1)
    ctx = gamma_context(alpha, beta)
    log_k1 = pc.log_k1_norm_sq(np.asarray(indices))
    if measure_gram == "auto":
        measure_gram = ("quadrature" if float(log_k1.min()) > _GRAM_QUADRATURE_FLOOR
                        else "analytic")
    funcs, bounds = [], []
    for i, lk1 in zip(indices, log_k1):
        log_scale = -0.5 * float(lk1)
        scale = _guarded_exp(log_scale, f"normalizer for index {i}")
        funcs.append(_laguerre_func(i, alpha - 1.0, pc.gamma1, pc.gamma2, log_scale))
        bounds.append(_guarded_exp(log_binomial(i + alpha, i) + log_scale,
                                   f"sup bound {i}"))
    if measure_gram == "quadrature":
        g = operators.gram(ctx, funcs, bounds)
        path = "quadrature"
    else:
        g = GramMatrices(np.diag(pc.k_norm_ratio(np.asarray(indices))),
                         np.eye(m))
        path = "analytic"
    mu_vec = np.array([_laguerre_base_moment(pc, i, float(ls))
                       for i, ls in zip(indices, -0.5 * log_k1)])
    return PerturbationFamily(ctx, funcs, bounds, g, mu_vec, indices=indices,
                              kind="poisson-laguerre", gram_path=path, constants=pc)


def _laguerre_func(k: int, nu: float, gamma1: float, gamma2: float,
                   log_scale: float) -> Callable:
    def r(x, _k=k, _nu=nu, _g1=gamma1, _g2=gamma2, _ls=log_scale):
        x = np.asarray(x, dtype=float)
        lag = laguerre_table(_k, _nu, _g2 * x)[_k]
        out = np.zeros_like(lag)
        nz = lag != 0.0
        # sign * exp(log scale - gamma1 x + log |L|): robust when either the
        # exponential or the polynomial factor alone would under/overflow
        with np.errstate(under="ignore"):
            out[nz] = np.sign(lag[nz]) * np.exp(_ls - _g1 * x[nz] + np.log(np.abs(lag[nz])))
        return out

    return r


def _laguerre_base_moment(pc: PoissonConstants, k: int, log_scale: float) -> float:
    """int r_k dG0 in closed form:
    scale * binom(k+alpha-1, k) (beta/(beta+gamma1))^alpha ((beta-gamma1)/(beta+gamma1))^k."""
    a, b, g1 = pc.alpha, pc.beta, pc.gamma1
    ratio = (b - g1) / (b + g1)  # negative, |ratio| < 1
    log_abs = (log_scale + log_binomial(k + a - 1.0, k)
               + a * math.log(b / (b + g1)) + k * math.log(abs(ratio)))
    sign = 1.0 if (k % 2 == 0 or ratio >= 0) else -1.0
    with np.errstate(under="ignore"):
        return sign * math.exp(log_abs) if log_abs > -745 else 0.0


# Assouad family -----------------------------------------------------------------


@dataclass
class AssouadFamily:
    """2^m tilted priors G_u indexed lazily by u in {0,1}^m.

    delta = min(1/max(sqrt(n gamma), m a), 1/(16 m a)), the largest value
    meeting both the density-ratio condition delta m a <= 1/16 and the
    chi-squared product condition n delta^2 gamma <= 1.
    """

    family: PerturbationFamily
    n: int
    delta: float

    def mu_u(self, u) -> float:
        return float(np.asarray(u, dtype=float) @ self.family.mu)

    def prior(self, u) -> TiltedPrior:
        u = np.asarray(u, dtype=float)
        bound = float(np.abs(u) @ self.family.sup_bounds)
        return TiltedPrior(self.family.ctx.g0, self.family.r_sum(u), self.delta,
                           bound, normalizer=1.0 + self.delta * self.mu_u(u))


def assouad_build(family: PerturbationFamily, n: int) -> AssouadFamily:
    if n < 1:
        raise ValueError("n must be at least 1")
    m, a, gamma = family.m, family.a, family.gamma
    delta = min(1.0 / max(math.sqrt(n * gamma), m * a), 1.0 / (16.0 * m * a))
    if not delta > 0:
        raise ValueError("selected delta is not positive")
    return AssouadFamily(family, n, delta)


# Operator tables (shared by both audit paths) -----------------------------------


@dataclass
class _OpTables:
    """Per-y values needed by the audit: posterior means of the r_i.

    weights: positive measure on the y-grid approximating L2(f0) integrals
    (quadrature weights times f0, or the pmf itself); B[i] = K r_i,
    A[i] = K(theta r_i), K1[i] = A[i] - Ktheta * B[i]; f0 on the grid.
    """

    weights: np.ndarray
    f0: np.ndarray
    k_theta: np.ndarray
    B: np.ndarray
    A: np.ndarray
    K1: np.ndarray


def _tables_gaussian(fam: PerturbationFamily) -> _OpTables:
    ctx = fam.ctx
    yq = ctx.y_rule.nodes
    f0 = ctx.f0_y
    kth = operators.k_theta(ctx, yq)
    if fam.gram_path == "analytic":
        B, A = _gaussian_closed_form_BA(fam, yq)
    else:
        B = np.stack([operators.apply_K(ctx, r, yq) for r in fam.r])
        A = np.stack([operators.apply_K(ctx, (lambda rr: lambda t: t * rr(t))(r), yq)
                      for r in fam.r])
    return _OpTables(ctx.y_rule.weights * f0, f0, kth, B, A, A - kth[None, :] * B)


def _k_psi_closed(c: GaussianConstants, kmax: int, y: np.ndarray) -> np.ndarray:
    """Exact (K psi_k)(y) for k = 0..kmax, shape (kmax+1, len(y)).

    Convolving the dilated Hermite function with the Gaussian kernel gives
    K psi_k(y) = sqrt(alpha1) (2 pi)^{-1/4} A^{-1/2} e^{-b^2 (1-1/A)/2}
                 q^k H_k(w) / sqrt(k!),
    with cc = alpha1 eta, A = 1 + cc^2/2, q = sqrt((1 - cc^2/2)/A) (so that
    q^2 = mu), b = eta y, w = cc b / (A q).  The scaled values
    q^k H_k(w)/sqrt(k!) follow a bounded-growth recurrence, so the table is
    accurate at any order where doubles represent the result at all.
    """
    cc = c.alpha1 * c.eta
    A = 1.0 + 0.5 * cc * cc
    q = math.sqrt((1.0 - 0.5 * cc * cc) / A)
    b = c.eta * np.asarray(y, dtype=float)
    w = cc * b / (A * q)
    pref = (math.sqrt(c.alpha1) * (2.0 * math.pi) ** -0.25 / math.sqrt(A)
            * np.exp(-0.5 * b * b * (1.0 - 1.0 / A)))
    out = np.empty((kmax + 1,) + b.shape)
    p_prev = np.zeros_like(w)
    p = np.ones_like(w)
    out[0] = pref * p
    for k in range(kmax):
        p_prev, p = p, (q * w * p - q * q * math.sqrt(k) * p_prev) / math.sqrt(k + 1)
        out[k + 1] = pref * p
    return out


def _gaussian_closed_form_BA(fam: PerturbationFamily,
                             y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """B = K r_i and A = K(theta r_i) via the exact K psi table.

    theta psi_i = (sqrt(i+1) psi_{i+1} + sqrt(i) psi_{i-1}) / alpha1 turns A
    into a two-term combination of neighboring table rows, so neither B nor
    A suffers the quadrature cancellation of high indices.
    """
    c: GaussianConstants = fam.constants
    kmax = max(fam.indices) + 1
    table = _k_psi_closed(c, kmax, y)
    scales = fam.sup_bounds / math.sqrt(c.alpha1)  # the per-index normalizers
    B = np.stack([sc * table[i] for i, sc in zip(fam.indices, scales)])
    A = np.stack([sc / c.alpha1 * (math.sqrt(i + 1) * table[i + 1]
                                   + math.sqrt(i) * table[i - 1])
                  for i, sc in zip(fam.indices, scales)])
    return B, A


def _tables_poisson_mp(fam: PerturbationFamily, *, dps: int = 50,
                       tail_log10: float = -40.0) -> _OpTables:
    """Poisson tables through the hypergeometric closed form in mp arithmetic.

    K Gamma_k(y) = ((1+b)/s)^(y+a) binom(k+a-1, k) 2F1(-k, y+a; a; g2/s)
    with s = 1 + b + gamma1; the finite 2F1 sum cancels far more digits than
    doubles carry at large alpha, so it is evaluated at `dps` digits and the
    (representable) result converted back to float.
    """
    pc: PoissonConstants = fam.constants
    a, b = pc.alpha, pc.beta
    # grid: f0 tail below 10^tail_log10 relative to the leading mass
    ymax = 4
    while True:
        log_f0 = (gammaln(ymax + a) - gammaln(ymax + 1.0) - gammaln(a)
                  + a * math.log(b / (1.0 + b)) - ymax * math.log1p(b))
        if log_f0 < tail_log10 * math.log(10.0):
            break
        ymax += 1
    ys = np.arange(ymax + 1, dtype=float)
    f0 = np.asarray(mixture_density(MixtureModel.POISSON, fam.ctx.g0, ys))
    kth = (ys + a) / (1.0 + b)
    with mp.workdps(dps):
        s = mp.mpf(1) + b + mp.sqrt(mp.mpf(b) * (1 + b))
        x = 2 * mp.sqrt(mp.mpf(b) * (1 + b)) / s
        pref_base = (1 + mp.mpf(b)) / s
        B = np.empty((fam.m, ymax + 2))
        for row, k in enumerate(fam.indices):
            scale = mp.e ** (-mp.mpf(0.5) * _mp_log_k1_norm_sq(pc, k, dps))
            lbin = mp.loggamma(k + a) - mp.loggamma(k + 1) - mp.loggamma(a)
            for y in range(ymax + 2):
                f21 = _hyp2f1_neg_int(k, mp.mpf(y) + a, mp.mpf(a), x)
                val = scale * mp.e**lbin * pref_base ** (mp.mpf(y) + a) * f21
                B[row, y] = float(val)
    A = kth[None, :] * B[:, 1:]  # K(theta r)(y) = Ktheta(y) Kr(y+1), exact shift
    Bm = B[:, :-1]
    return _OpTables(f0, f0, kth, Bm, A, A - kth[None, :] * Bm)


def _mp_log_k1_norm_sq(pc: PoissonConstants, k: int, dps: int):
    a, b = mp.mpf(pc.alpha), mp.mpf(pc.beta)
    z = (mp.sqrt(1 + b) - mp.sqrt(b)) ** 2
    g2 = 2 * mp.sqrt(b * (1 + b))
    log_c = 3 * mp.log(1 + b) + a * mp.log(b) - mp.loggamma(a)
    log_c2 = (log_c + mp.log(1 - z) + (a - 1) / 2 * mp.log((1 + b) * z)
              - (a + 1) * mp.log(g2))
    log_b = log_c2 + k * mp.log(z) + mp.loggamma(k + a) - mp.loggamma(k + 1)
    bracket = a * a + (k + 1) * (k + a) * z + (k + a - 1) * k / z
    return log_b + mp.log(bracket) - mp.log(4) - 4 * mp.log(1 + b)


def _hyp2f1_neg_int(k: int, b, c, x):
    """2F1(-k, b; c; x) as its finite sum (k+1 terms), in mp arithmetic."""
    term = mp.mpf(1)
    total = term
    for j in range(1, k + 1):
        term *= mp.mpf(-(k - j + 1)) * (b + j - 1) / ((c + j - 1) * j) * x
        total += term
    return total


def _op_tables(fam: PerturbationFamily) -> _OpTables:
    cached = getattr(fam, "_tables", None)
    if cached is None:
        if (isinstance(fam.ctx, operators._GaussianContext)
                and fam.kind.startswith("gaussian-hermite")):
            cached = _tables_gaussian(fam)
        elif fam.kind == "poisson-laguerre":
            cached = _tables_poisson_mp(fam)
        else:
            raise TypeError("no operator-table route for this family")
        fam._tables = cached
    return cached


# Audit ---------------------------------------------------------------------------


@dataclass
class AuditEntry:
    measured: float
    required: str
    passed: bool


@dataclass
class AuditReport:
    entries: dict[str, AuditEntry]
    meta: dict

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries.values())

    def to_dict(self) -> dict:
        flat = {name: {"measured": e.measured, "required": e.required, "pass": e.passed}
                for name, e in sorted(self.entries.items())}
        flat["_meta"] = self.meta
        return flat

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)


def audit(af: AssouadFamily, n: int | None = None, *, pairs: int = 64,
          ratio_grid: int = 1000, seed: int = 0,
          truncation_h: float | None = None) -> AuditReport:
    """Check every hypothesis of the lower-bound program on an Assouad family.

    Hamming-1 neighbor checks (chi-squared closeness, regression-function
    separation, mixture identity) are sampled along a random single-flip walk
    of `pairs` steps; the remaining hypotheses are checked exactly.  Failures
    are report entries, not exceptions.
    """
    fam = af.family
    if n is None:
        n = af.n
    m, delta = fam.m, af.delta
    tau, tau1, tau2 = fam.tau, fam.tau1, fam.tau2
    rng = np.random.default_rng(seed)
    entries: dict[str, AuditEntry] = {}

    # static hypotheses
    grid = _support_grid(fam, ratio_grid)
    rvals = np.stack([r(grid) for r in fam.r])
    sup_ratio = float(np.max(np.abs(rvals) / fam.sup_bounds[:, None]))
    entries["sup_norm_bound"] = AuditEntry(sup_ratio, "<= 1 (grid max / declared bound)",
                                           sup_ratio <= 1.0 + 1e-9)
    kmax = float(np.max(np.diag(fam.gram.k_gram)))
    entries["k_norm_le_gamma"] = AuditEntry(kmax, f"<= gamma = {fam.gamma:.6g}",
                                            kmax <= fam.gamma * (1.0 + 1e-9))
    entries["tau_unit"] = AuditEntry(tau, "= 1 within 1e-6", abs(tau - 1.0) <= 1e-6)
    entries["tau1_unit"] = AuditEntry(tau1, "= 1 within 1e-6", abs(tau1 - 1.0) <= 1e-6)
    entries["tau2_zero"] = AuditEntry(tau2, "<= 1e-6", tau2 <= 1e-6)
    dma = delta * m * fam.a
    entries["delta_ratio_condition"] = AuditEntry(dma, "delta m a <= 1/16",
                                                  dma <= 1.0 / 16.0 + 1e-12)
    ndg = n * delta**2 * fam.gamma
    entries["chi2_product_condition"] = AuditEntry(ndg, "n delta^2 gamma <= 1",
                                                   ndg <= 1.0 + 1e-12)

    # density ratios over sampled vertices (all-ones is the extreme one)
    us = [np.ones(m), np.zeros(m)] + [rng.integers(0, 2, m).astype(float)
                                      for _ in range(8)]
    worst = 0.0
    for u in us:
        ratio = (1.0 + delta * (u @ rvals)) / (1.0 + delta * af.mu_u(u))
        worst = max(worst, float(np.max(np.abs(ratio - 1.0))))
    entries["density_ratio"] = AuditEntry(worst, "|dG_u/dG0 - 1| <= 1/2",
                                          worst <= 0.5 + 1e-12)

    # neighbor checks along a random single-flip walk
    tab = _op_tables(fam)
    walk = _flip_walk(rng, m, pairs)
    chi2_values = []
    chi2_rel = 0.0
    gap_margin = math.inf
    eps = 0.5 * tau * delta**2
    eps1 = delta**2 * (m * tau1**2 / 16.0 + 0.5 * tau2)
    for u, v, i in walk:
        chi2 = _chi2_pair(af, tab, u, v)
        chi2_values.append(math.expm1(n * math.log1p(chi2)))
        chi2_rel = max(chi2_rel, chi2 / (delta**2 * fam.gamma))
        gap = _gap_pair(af, tab, u, v)
        lower = eps - eps1
        gap_margin = min(gap_margin, gap - lower)
    tensorized = max(chi2_values)
    entries["chi2_neighbors_tensorized"] = AuditEntry(
        tensorized, "(1+chi2)^n - 1 finite and <= e-1",
        math.isfinite(tensorized) and tensorized <= math.e - 1.0)
    entries["chi2_neighbors_constant"] = AuditEntry(
        chi2_rel, "chi2 <= C1 delta^2 gamma (fitted C1 reported)", True)
    entries["regression_gap"] = AuditEntry(
        gap_margin, ">= 0 (gap >= tau delta^2/2 - eps1 on neighbors)",
        gap_margin >= -1e-12 * max(eps, 1.0))

    # two-path mixture identity on a few sampled u's
    ident = _mixture_identity_dev(af, tab, rng)
    entries["mixture_identity"] = AuditEntry(ident, "rel err <= 1e-8", ident <= 1e-8)

    predicted = delta**2 * (m * (4.0 * tau - tau1**2) - tau2)
    entries["predicted_lower_bound"] = AuditEntry(
        predicted, "Regret_n >= C * this, C a universal constant (reported with C=1)",
        True)

    if truncation_h is not None:
        corr = _truncation_correction(fam, truncation_h, n)
        entries["truncation_correction"] = AuditEntry(
            corr, "6 sqrt((M + h^4) n eps), reported alongside the bound", True)

    meta = {"kind": fam.kind, "m": m, "n": n, "delta": delta, "gamma": fam.gamma,
            "a": fam.a, "seed": seed, "pairs": pairs, "gram_path": fam.gram_path,
            "predicted_lower_bound": predicted,
            "chi2_tensorized_values": chi2_values}
    return AuditReport(entries, meta)


def _support_grid(fam: PerturbationFamily, size: int) -> np.ndarray:
    if isinstance(fam.ctx, operators._GaussianContext):
        half = 8.0 * math.sqrt(fam.ctx.s)
        return np.linspace(-half, half, size)
    a, b = fam.ctx.alpha, fam.ctx.beta
    hi = (a + 40.0 * math.sqrt(a)) / b
    return np.linspace(0.0, hi, size)


def _flip_walk(rng: np.random.Generator, m: int, steps: int):
    u = rng.integers(0, 2, m).astype(float)
    out = []
    for _ in range(steps):
        i = int(rng.integers(m))
        v = u.copy()
        v[i] = 1.0 - v[i]
        out.append((u, v, i))
        u = v
    return out


def _delta_ratios(af: AssouadFamily, tab: _OpTables, u: np.ndarray,
                  v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(f_u - f_v)/f0 without subtractive cancellation, and f_v/f0."""
    delta = af.delta
    du = u - v
    h_v = v @ tab.B
    dh = du @ tab.B
    dmu = float(du @ af.family.mu)
    ru = 1.0 + delta * af.mu_u(u)
    rv = 1.0 + delta * af.mu_u(v)
    diff = delta * dh / ru - (1.0 + delta * h_v) * delta * dmu / (ru * rv)
    return diff, (1.0 + delta * h_v) / rv


def _chi2_pair(af: AssouadFamily, tab: _OpTables, u: np.ndarray, v: np.ndarray) -> float:
    diff, ratio_v = _delta_ratios(af, tab, u, v)
    return float(np.sum(tab.weights * diff**2 / ratio_v))


def _gap_pair(af: AssouadFamily, tab: _OpTables, u: np.ndarray, v: np.ndarray) -> float:
    """||T_u - T_v||^2_{L2(f0)} from the exact Bayes rules of the two tilts."""
    delta = af.delta
    du = u - v
    B_u, B_v = u @ tab.B, v @ tab.B
    A_u, A_v = u @ tab.A, v @ tab.A
    K1d = du @ tab.K1
    num = delta * K1d + delta**2 * (A_u * B_v - A_v * B_u)
    den = (1.0 + delta * B_u) * (1.0 + delta * B_v)
    return float(np.sum(tab.weights * (num / den) ** 2))


def _mixture_identity_dev(af: AssouadFamily, tab: _OpTables,
                          rng: np.random.Generator) -> float:
    """max rel deviation of direct f_u against (1 + delta h_u) f0 / (1 + delta mu_u)."""
    fam = af.family
    worst = 0.0
    for _ in range(3):
        u = rng.integers(0, 2, fam.m).astype(float)
        if not u.any():
            u[0] = 1.0
        if isinstance(fam.ctx, operators._GaussianContext):
            predicted = ((1.0 + af.delta * (u @ tab.B)) * tab.f0
                         / (1.0 + af.delta * af.mu_u(u)))
            direct = mixture_density(fam.ctx.model, af.prior(u), fam.ctx.y_rule.nodes)
        else:
            # the adaptive mp integral is the costly side; a few y suffice
            ys = np.arange(min(6, tab.f0.size), dtype=float)
            sl = slice(0, ys.size)
            predicted = ((1.0 + af.delta * (u @ tab.B[:, sl])) * tab.f0[sl]
                         / (1.0 + af.delta * af.mu_u(u)))
            direct = _poisson_tilt_direct_mp(af, u, ys)
        worst = max(worst, float(np.max(np.abs(direct / predicted - 1.0))))
    return worst


def _poisson_tilt_direct_mp(af: AssouadFamily, u: np.ndarray, ys: np.ndarray,
                            *, dps: int = 50) -> np.ndarray:
    """Direct mp evaluation of f_u(y) = int pmf(y|x) (1+delta r_u) dG0 / norm.

    Independent of the posterior-mean route: integrates the unnormalized
    prior density against the Poisson pmf by adaptive quadrature.
    """
    fam = af.family
    pc: PoissonConstants = fam.constants
    a, b = pc.alpha, pc.beta
    out = np.empty(ys.size)
    with mp.workdps(dps):
        delta = mp.mpf(af.delta)
        g1 = mp.sqrt(mp.mpf(b) * (1 + b))
        g2 = 2 * g1
        scales = [mp.e ** (-mp.mpf(0.5) * _mp_log_k1_norm_sq(pc, k, dps))
                  for k in fam.indices]

        def r_u(x):
            total = mp.mpf(0)
            for coef, k, sc in zip(u, fam.indices, scales):
                if coef:
                    total += sc * mp.e ** (-g1 * x) * mp.laguerre(k, a - 1, g2 * x)
            return total

        norm = 1 + delta * af.mu_u(u)
        hi = (a + 50 * mp.sqrt(a)) / b
        for j, y in enumerate(ys):
            def integrand(x, _y=y):
                logpmf = (_y * mp.log(x) - x - mp.loggamma(_y + 1) if x > 0
                          else (mp.mpf(0) if _y == 0 else mp.mpf("-inf")))
                dens = (mp.mpf(b) ** a / mp.gamma(a)) * x ** (a - 1) * mp.e ** (-b * x)
                return mp.e**logpmf * dens * (1 + delta * r_u(x))
            out[j] = float(mp.quad(integrand, [0, float(hi) / 4, float(hi)]) / norm)
    return out


def _truncation_correction(fam: PerturbationFamily, h: float, n: int) -> float:
    """6 sqrt((M + h^4) n eps) with M a fourth-moment bound and eps the tail
    mass beyond [-h, h] (both inflated by 3/2 for the tilted class)."""
    g0 = fam.ctx.g0
    m4 = 1.5 * models.prior_fourth_moment(g0)
    if isinstance(fam.ctx, operators._GaussianContext):
        s = fam.ctx.s
        eps = 1.5 * 2.0 * math.exp(-h * h / (2.0 * s))
    else:
        a, b = fam.ctx.alpha, fam.ctx.beta
        if h * b <= a:
            eps = 1.0
        else:
            # Chernoff for Gamma(a, b): exp(-a (u - 1 - log u)), u = h b / a
            u = h * b / a
            eps = 1.5 * math.exp(-a * (u - 1.0 - math.log(u)))
    eps = min(eps, 1.0)
    return 6.0 * math.sqrt((m4 + h**4) * n * eps)


def regression_gap(af: AssouadFamily, u, v) -> float:
    """||T_u - T_v||^2_{L2(f0)} for two vertices of the hypercube.

    T_w is the exact Bayes rule of the tilted prior G_w; the difference is
    assembled as delta K1(r_u - r_v) + delta^2 (A_u B_v - A_v B_u) over the
    common denominator, which is algebraically identical to subtracting the
    two rules but immune to the delta-scale cancellation.
    """
    fam = af.family
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (fam.m,) or v.shape != (fam.m,):
        raise ValueError("u and v must be length-m vertex vectors")
    return _gap_pair(af, _op_tables(fam), u, v)


# Eigen-identity checkers (shared by the CLI verifier and the test suite) --------


def gaussian_eigen_deviation(s: float, kmax: int = 12,
                             ctx: BasePriorContext | None = None) -> dict:
    """Measured-vs-closed-form deviations of the Hermite eigen system.

    Returns max |(K psi_k, K psi_j) - lambda0 mu^k 1{k=j}| (absolute) and the
    entrywise deviation of the K1 Gram from its tridiagonal closed form,
    relative to max(|entry|, geometric mean of the diagonal) so structural
    zeros are judged against the local scale.
    """
    c = gaussian_constants(s)
    if ctx is None:
        ctx = _widened_gaussian_context(s, kmax)
    funcs = [_hermite_func(k, c.alpha1, 1.0) for k in range(kmax + 1)]
    g = operators.gram(ctx, funcs)
    ks = np.arange(kmax + 1)
    k_expected = np.diag(c.lambda0 * c.mu**ks)
    k1_expected = np.zeros_like(g.k1_gram)
    for k in range(kmax + 1):
        k1_expected[k, k] = c.lambda3 * (k * c.mu ** (k - 1) + (k + 1) * c.mu ** (k + 1))
        if k + 2 <= kmax:
            val = -c.lambda3 * math.sqrt((k + 1) * (k + 2)) * c.mu ** (k + 1)
            k1_expected[k, k + 2] = k1_expected[k + 2, k] = val
    scale = np.sqrt(np.outer(np.diag(k1_expected), np.diag(k1_expected)))
    k1_dev = np.abs(g.k1_gram - k1_expected) / np.maximum(np.abs(k1_expected), scale)
    return {"k_gram_abs": float(np.max(np.abs(g.k_gram - k_expected))),
            "k1_gram_rel": float(np.max(k1_dev))}


def poisson_eigen_deviation(alpha: float, beta: float, kmax: int = 8) -> dict:
    """Measured-vs-closed-form deviations of the Laguerre system.

    The S inner products follow the closed-form kernel convention,
    (S f, g) = (1+beta)^2 (K f, K g)_{L2(f0)}: diagonal of S against b_k and
    of S1 against its bracket formula (relative), off-diagonals against the
    geometric-mean scale (S cross terms vanish for all k != j, S1 ones for
    |k - j| >= 3).
    """
    pc = poisson_constants(alpha, beta, kmax)
    ctx = gamma_context(alpha, beta)
    funcs = [_laguerre_func(k, alpha - 1.0, pc.gamma1, pc.gamma2, 0.0)
             for k in range(kmax + 1)]
    bounds = [math.exp(log_binomial(k + alpha, k)) for k in range(kmax + 1)]
    g = operators.gram(ctx, funcs, bounds)
    scale2 = operators.s_scale(ctx)
    s_gram = scale2 * g.k_gram
    s1_gram = scale2 * g.k1_gram
    ks = np.arange(kmax + 1)
    b = np.exp(pc.log_b[ks])
    s1_diag = b * pc.s1_bracket(ks) / (4.0 * (1.0 + beta) ** 2)
    off_scale = np.sqrt(np.outer(b, b))
    s_dev_diag = float(np.max(np.abs(np.diag(s_gram) / b - 1.0)))
    s_dev_off = float(np.max(np.abs(s_gram - np.diag(np.diag(s_gram))) / off_scale))
    s1_dev_diag = float(np.max(np.abs(np.diag(s1_gram) / s1_diag - 1.0)))
    far = np.abs(ks[:, None] - ks[None, :]) >= 3
    s1_scale = np.sqrt(np.outer(s1_diag, s1_diag))
    s1_dev_far = float(np.max(np.abs(s1_gram[far]) / s1_scale[far])) if far.any() else 0.0
    return {"s_diag_rel": s_dev_diag, "s_offdiag_scale": s_dev_off,
            "s1_diag_rel": s1_dev_diag, "s1_offdiag_scale": s1_dev_far}


# Hellinger (density-estimation) audit -------------------------------------------


def hellinger_audit(af: AssouadFamily, n: int | None = None, *, pairs: int = 64,
                    seed: int = 0) -> AuditReport:
    """Audit of the density-estimation variant of the program.

    Requires a centered family (int r_i dG0 = 0): non-centered families are
    flagged.  tau and gamma come from the K Gram; the predicted minimax
    Hellinger-risk lower bound is delta^2 (m tau - tau2), and sampled
    neighbor pairs are checked for H^2(f_u, f_v) >= delta^2/6 (tau d_H - tau2)
    and the data-processing inequality H(f_u, f_v) <= H(G_u, G_v).
    """
    fam = af.family
    if n is None:
        n = af.n
    m, delta = fam.m, af.delta
    rng = np.random.default_rng(seed)
    entries: dict[str, AuditEntry] = {}

    tau, tau1, tau2 = contrast_stats(fam.gram.k_gram)
    theta_c, w_c = prior_nodes(fam.ctx.g0, 400)
    if isinstance(fam.ctx.g0, models.GaussianPrior) and fam.ctx.g0.mean == 0.0:
        # int r dG0 = int (r(t) + r(-t))/2 dG0 for the symmetric base; the
        # symmetrized form cancels odd integrands exactly instead of leaving
        # float residue amplified by the family normalizers
        centered = max(float(abs(np.sum(w_c * 0.5 * (r(theta_c) + r(-theta_c)))))
                       for r in fam.r)
    else:
        centered = max(float(abs(np.sum(w_c * r(theta_c)))) for r in fam.r)
    entries["centering"] = AuditEntry(centered, "|int r_i dG0| <= 1e-9",
                                      centered <= 1e-9)
    entries["tau_unit"] = AuditEntry(tau, "= 1 within 1e-6", abs(tau - 1.0) <= 1e-6)
    entries["tau2_zero"] = AuditEntry(tau2, "<= 1e-6", tau2 <= 1e-6)
    dma = delta * m * fam.a
    entries["delta_ratio_condition"] = AuditEntry(dma, "delta m a <= 1/16",
                                                  dma <= 1.0 / 16.0 + 1e-12)
    ndg = n * delta**2 * fam.gamma
    entries["chi2_product_condition"] = AuditEntry(ndg, "n delta^2 gamma <= 1",
                                                   ndg <= 1.0 + 1e-12)

    tab = _op_tables(fam)
    h2_margin = math.inf
    dp_margin = math.inf
    theta, w0 = prior_nodes(fam.ctx.g0, 400)
    rtheta = np.stack([r(theta) for r in fam.r])
    for u, v, i in _flip_walk(rng, m, pairs):
        h2 = _hellinger_sq_pair(af, tab, u, v)
        lower = delta**2 / 6.0 * (tau * float(np.abs(u - v).sum()) - tau2)
        h2_margin = min(h2_margin, h2 - lower)
        h2_prior = _hellinger_sq_prior(af, rtheta, w0, u, v)
        dp_margin = min(dp_margin, h2_prior - h2)
    entries["hellinger_separation"] = AuditEntry(
        h2_margin, ">= 0 (H^2 >= delta^2/6 (tau d_H - tau2))", h2_margin >= -1e-15)
    entries["data_processing"] = AuditEntry(
        dp_margin, ">= 0 (H(f_u, f_v) <= H(G_u, G_v))", dp_margin >= -1e-15)

    predicted = delta**2 * (m * tau - tau2)
    entries["predicted_lower_bound"] = AuditEntry(
        predicted, "R_n >= C * this, C a universal constant (reported with C=1)", True)

    meta = {"kind": fam.kind, "m": m, "n": n, "delta": delta, "gamma": fam.gamma,
            "a": fam.a, "seed": seed, "pairs": pairs,
            "predicted_lower_bound": predicted}
    return AuditReport(entries, meta)


def _hellinger_sq_pair(af: AssouadFamily, tab: _OpTables, u: np.ndarray,
                       v: np.ndarray) -> float:
    diff, ratio_v = _delta_ratios(af, tab, u, v)
    ratio_u = diff + ratio_v
    denom = (np.sqrt(ratio_u) + np.sqrt(ratio_v)) ** 2
    return float(np.sum(tab.weights * diff**2 / denom))


def _hellinger_sq_prior(af: AssouadFamily, rtheta: np.ndarray, w0: np.ndarray,
                        u: np.ndarray, v: np.ndarray) -> float:
    delta = af.delta
    tilt_u = (1.0 + delta * (u @ rtheta)) / (1.0 + delta * af.mu_u(u))
    tilt_v = (1.0 + delta * (v @ rtheta)) / (1.0 + delta * af.mu_u(v))
    du = u - v
    diff = (delta * (du @ rtheta) / (1.0 + delta * af.mu_u(u))
            - tilt_v * delta * float(du @ af.family.mu) / (1.0 + delta * af.mu_u(u)))
    denom = (np.sqrt(tilt_u) + np.sqrt(tilt_v)) ** 2
    return float(np.sum(w0 * diff**2 / denom))
