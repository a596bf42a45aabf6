"""Special functions and quadrature rules used across the library.

Hermite polynomials follow the probabilists' convention (orthogonal with
respect to the standard normal density phi): H_0 = 1, H_1 = x and

    x H_k = H_{k+1} + k H_{k-1}.

The physicists' polynomials Hphys_k (weight exp(-x^2)) are related by
H_k(x) = 2^{-k/2} Hphys_k(x / sqrt(2)); only the probabilists' form is used
here.  Factorial/Gamma ratios are taken through log-gamma, and exponentially
normalized quantities (Hermite functions, scaled Bessel) are evaluated so
that no intermediate overflows for the orders this library needs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln, roots_hermitenorm, roots_legendre

__all__ = [
    "QuadDomain",
    "QuadratureRule",
    "bessel_i_scaled",
    "hermite_eval",
    "hermite_psi",
    "hermite_psi_table",
    "laguerre_eval",
    "laguerre_table",
    "log_binomial",
    "quadrature",
]

_LOG_2PI = math.log(2.0 * math.pi)


def log_binomial(n: float, k: float) -> float:
    """log of the (generalized) binomial coefficient C(n, k)."""
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def hermite_eval(k: int, x):
    """Probabilists' monic Hermite polynomial H_k(x) by three-term recursion.

    Total function: any real (or array) x, any k >= 0.
    """
    if k < 0:
        raise ValueError("hermite order must be nonnegative")
    x = np.asarray(x, dtype=float)
    h_prev = np.zeros_like(x)
    h = np.ones_like(x)
    for j in range(k):
        h_prev, h = h, x * h - j * h_prev
    return h if h.ndim else float(h)


def hermite_psi(k: int, alpha1: float, x):
    """Dilated L2-normalized Hermite function.

    psi_k(x) = sqrt(alpha1 / k!) * H_k(alpha1 x) * sqrt(phi(alpha1 x)).

    Evaluated through the recurrence on the already-normalized functions
    h_k(u) = H_k(u) exp(-u^2/4) / sqrt(k!), whose magnitudes stay bounded
    (Cramer's inequality), so arbitrary orders (k >= 200 included) evaluate
    without overflow; this is the stable equivalent of a log-domain scheme
    with separate sign tracking.
    """
    return hermite_psi_table(k, alpha1, x)[k]


def hermite_psi_table(kmax: int, alpha1: float, x) -> np.ndarray:
    """All psi_0..psi_kmax at once; shape (kmax+1,) + shape(x)."""
    if kmax < 0:
        raise ValueError("hermite order must be nonnegative")
    if alpha1 <= 0:
        raise ValueError("alpha1 must be positive")
    u = alpha1 * np.asarray(x, dtype=float)
    out = np.empty((kmax + 1,) + u.shape)
    # h_0 = exp(-u^2/4); recurrence h_{k+1} = (u h_k - sqrt(k) h_{k-1}) / sqrt(k+1)
    h_prev = np.zeros_like(u)
    h = np.exp(-0.25 * u * u)
    scale = math.sqrt(alpha1) * (2.0 * math.pi) ** -0.25
    out[0] = scale * h
    for k in range(kmax):
        h_prev, h = h, (u * h - math.sqrt(k) * h_prev) / math.sqrt(k + 1)
        out[k + 1] = scale * h
    return out


def laguerre_eval(n: int, nu: float, x):
    """Generalized Laguerre polynomial L_n^nu(x), nu > -1, by recurrence.

    (n+1) L_{n+1}^nu = (2n + nu + 1 - x) L_n^nu - (n + nu) L_{n-1}^nu,
    seeded by L_0 = 1, L_1 = 1 + nu - x.
    """
    if n < 0:
        raise ValueError("laguerre degree must be nonnegative")
    if nu <= -1:
        raise ValueError("laguerre parameter must exceed -1")
    x = np.asarray(x, dtype=float)
    l_prev = np.zeros_like(x)
    l = np.ones_like(x)
    for j in range(n):
        l_prev, l = l, ((2 * j + nu + 1 - x) * l - (j + nu) * l_prev) / (j + 1)
    return l if l.ndim else float(l)


def laguerre_table(nmax: int, nu: float, x) -> np.ndarray:
    """All L_0^nu..L_nmax^nu at once; shape (nmax+1,) + shape(x)."""
    if nmax < 0:
        raise ValueError("laguerre degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape)
    l_prev = np.zeros_like(x)
    l = np.ones_like(x)
    out[0] = l
    for j in range(nmax):
        l_prev, l = l, ((2 * j + nu + 1 - x) * l - (j + nu) * l_prev) / (j + 1)
        out[j + 1] = l
    return out


# Scaled modified Bessel function ------------------------------------------------

_BESSEL_SERIES_RTOL = 1e-18
_BESSEL_ASYM_OFFSET = 30.0


def _bessel_series(nu: float, x: float) -> float:
    """e^{-x} I_nu(x) as the defining power series, term-wise in log-domain.

    Sum over y of exp((nu + 2y) log(x/2) - x - lgamma(y+1) - lgamma(y+nu+1)),
    truncated when a term drops below 1e-18 of the running sum.
    """
    log_half_x = math.log(0.5 * x)
    total = 0.0
    for y in range(1000):
        term = math.exp(
            (nu + 2 * y) * log_half_x - x - gammaln(y + 1) - gammaln(y + nu + 1)
        )
        total += term
        if y > x and term < _BESSEL_SERIES_RTOL * total:
            break
    return total


def _bessel_asymptotic(nu: float, x: float) -> float:
    """Large-argument (Hankel) expansion of e^{-x} I_nu(x).

    e^{-x} I_nu(x) ~ (2 pi x)^{-1/2} sum_k (-1)^k a_k(nu) / x^k with
    a_k(nu) = prod_{j=1..k} (4 nu^2 - (2j-1)^2) / (8 j).  The series is
    truncated at the smallest term; for x >= 30 + nu^2 the truncation error
    is far below 1e-8 relative.
    """
    total = 1.0
    term = 1.0
    prev_abs = math.inf
    for k in range(1, 60):
        term *= -(4.0 * nu * nu - (2 * k - 1) ** 2) / (8.0 * k * x)
        if abs(term) >= prev_abs:
            break
        total += term
        prev_abs = abs(term)
        if abs(term) < 1e-18 * abs(total):
            break
    return total / math.sqrt(2.0 * math.pi * x)


def bessel_i_scaled(nu: float, x: float) -> float:
    """Exponentially scaled modified Bessel function e^{-x} I_nu(x).

    Power series in log-domain for moderate x, uniform asymptotic branch for
    x >= 30 + nu^2.  Finite for all x >= 0, nu >= 0 (no overflow up to
    x = 1e6 and beyond).
    """
    if x < 0 or nu < 0:
        raise ValueError("bessel_i_scaled requires x >= 0 and nu >= 0")
    if x == 0.0:
        return 1.0 if nu == 0.0 else 0.0
    if x >= _BESSEL_ASYM_OFFSET + nu * nu:
        return _bessel_asymptotic(nu, x)
    return _bessel_series(nu, x)


# Quadrature ---------------------------------------------------------------------


class QuadDomain(enum.Enum):
    """Weight function / domain selector for quadrature rules."""

    REAL_LINE_GAUSSIAN = "real-line-gaussian-weight"
    HALF_LINE_GAMMA = "half-line-gamma-weight"
    TRUNCATED_INTERVAL = "truncated-interval"


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights integrating against a fixed weight function.

    REAL_LINE_GAUSSIAN integrates against phi(x) dx, HALF_LINE_GAMMA against
    x^{shape-1} e^{-x} dx (weights sum to Gamma(shape)), TRUNCATED_INTERVAL
    against dx on [lo, hi] (composite Gauss-Legendre, `panels` panels).
    A simple (non-composite) rule of order q is exact for polynomials of
    degree <= 2q - 1.
    """

    nodes: np.ndarray
    weights: np.ndarray
    domain: QuadDomain

    def __post_init__(self):
        if self.nodes.size == 0 or self.nodes.shape != self.weights.shape:
            raise ValueError("quadrature rule must be nonempty and congruent")
        if not (np.all(np.isfinite(self.nodes)) and np.all(np.isfinite(self.weights))):
            raise ValueError("quadrature rule contains non-finite entries")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be strictly positive")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("quadrature nodes must be strictly increasing")

    def integrate(self, f) -> float:
        return float(np.sum(self.weights * f(self.nodes)))


def _drop_underflowed(x: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # high-order Gauss rules have far-tail weights that underflow to exact 0
    # in double precision; they contribute nothing and would violate the
    # positivity invariant
    keep = w > 0.0
    return x[keep], w[keep]


def laguerre_rule_normalized(order: int, nu: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalized Gauss-Laguerre rule with probability weights (sum 1).

    Golub-Welsch on the Jacobi matrix of the L^nu system (diagonal
    2k + nu + 1, off-diagonal sqrt(k (k + nu))): stable at orders where
    iterative root-polishing breaks down, and free of the Gamma(nu+1) weight
    overflow, so it serves directly as the Gamma(nu+1, 1) posterior rule.
    """
    if order < 2:
        raise ValueError("quadrature order must be at least 2")
    if nu <= -1:
        raise ValueError("laguerre parameter must exceed -1")
    k = np.arange(order, dtype=float)
    nodes, vecs = eigh_tridiagonal(2.0 * k + nu + 1.0, np.sqrt(k[1:] * (k[1:] + nu)))
    return nodes, vecs[0] ** 2


def quadrature(kind: QuadDomain, order: int, *, shape: float = 1.0,
               lo: float = 0.0, hi: float = 1.0, panels: int = 1) -> QuadratureRule:
    """Build a QuadratureRule for the given domain.

    order >= 2 is the per-rule (per-panel, for the composite interval
    variant) number of nodes.
    """
    if order < 2:
        raise ValueError("quadrature order must be at least 2")
    if kind is QuadDomain.REAL_LINE_GAUSSIAN:
        x, w = roots_hermitenorm(order)
        return QuadratureRule(*_drop_underflowed(x, w / math.sqrt(2.0 * math.pi)), kind)
    if kind is QuadDomain.HALF_LINE_GAMMA:
        if shape <= 0:
            raise ValueError("gamma-weight shape must be positive")
        if shape > 170.0:
            raise ValueError("gamma-weight normalization Gamma(shape) overflows "
                             "for shape > 170; use laguerre_rule_normalized")
        x, w = laguerre_rule_normalized(order, shape - 1.0)
        return QuadratureRule(*_drop_underflowed(x, w * math.gamma(shape)), kind)
    if kind is QuadDomain.TRUNCATED_INTERVAL:
        if not hi > lo:
            raise ValueError("interval must satisfy hi > lo")
        if panels < 1:
            raise ValueError("panel count must be positive")
        x0, w0 = roots_legendre(order)
        edges = np.linspace(lo, hi, panels + 1)
        nodes, weights = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            nodes.append(0.5 * (b - a) * x0 + 0.5 * (a + b))
            weights.append(0.5 * (b - a) * w0)
        return QuadratureRule(np.concatenate(nodes), np.concatenate(weights), kind)
    raise ValueError(f"unsupported quadrature kind: {kind!r}")
