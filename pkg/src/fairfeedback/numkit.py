"""
Numerical substrate: Weibull densities, fits and KL divergence, the Beta
CDF with its shape-parameter gradients, and Euclidean simplex projection.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.integrate import quad

from .errors import (
    Degenerate,
    DomainError,
    NonPositiveSample,
    QuadratureFailure,
    WeibullOverflow,
)

EULER_GAMMA = 0.5772156649015329
SHAPE_MIN = 1e-2
SHAPE_MAX = 1e2
KL_NEGATIVE_TOL = 1e-10

# exp() overflows beyond this
_LOG_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class WeibullParams:
    shape: float
    scale: float

    def __post_init__(self):
        if not (math.isfinite(self.shape) and self.shape > 0):
            raise DomainError(f"Weibull shape must be positive, got {self.shape}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise DomainError(f"Weibull scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class BetaShape:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DomainError(f"Beta shapes must be positive, got ({self.a}, {self.b})")

    @classmethod
    def from_mean(cls, psi: float, c: float) -> "BetaShape":
        """Mean/precision parametrisation: a = psi*c, b = (1-psi)*c."""
        return cls(psi * c, (1.0 - psi) * c)


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 200

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise DomainError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")


DEFAULT_QUADRATURE = QuadratureConfig()


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------

def lgamma(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("lgamma is only defined here for x > 0")
    out = special.gammaln(x)
    return float(out) if out.ndim == 0 else out


def digamma(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("digamma is only defined here for x > 0")
    out = special.psi(x)
    return float(out) if out.ndim == 0 else out


def _check_unit_interval(r: float) -> float:
    r = float(r)
    if not (0.0 <= r <= 1.0):
        raise DomainError(f"r must lie in [0, 1], got {r}")
    return r


def incomplete_beta(r: float, a: float, b: float) -> float:
    """Unregularised incomplete beta B(r; a, b) = int_0^r t^(a-1) (1-t)^(b-1) dt."""
    r = _check_unit_interval(r)
    if a <= 0 or b <= 0:
        raise DomainError("Beta shapes must be positive")
    if r == 0.0:
        return 0.0
    return float(special.betainc(a, b, r) * special.beta(a, b))


def beta_cdf(r, shape: BetaShape):
    """Regularised incomplete beta I(r; a, b). Accepts scalar or array r."""
    arr = np.asarray(r, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise DomainError("r must lie in [0, 1]")
    out = special.betainc(shape.a, shape.b, arr)
    return float(out) if out.ndim == 0 else out


def _quad(func, upper, weight, wvar, cfg: QuadratureConfig) -> float:
    with np.errstate(all="ignore"):
        res = quad(
            func, 0.0, upper, weight=weight, wvar=wvar,
            epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
            limit=cfg.max_subdivisions, full_output=1,
        )
    value = res[0]
    if len(res) > 3:
        raise QuadratureFailure(f"quadrature did not converge: {res[3].strip()}")
    if not math.isfinite(value):
        raise QuadratureFailure("quadrature produced a non-finite value")
    return value


def incomplete_beta_grad(r: float, a: float, b: float,
                         cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> tuple[float, float]:
    """Partial derivatives of B(r; a, b) with respect to a and b.

    Both are integrals of the Beta kernel against log t and log(1-t).  The
    algebraic-logarithmic endpoint singularities are delegated to the QAWS
    weighted rule; the integrand is rescaled by B(r; a, b) so the absolute
    tolerance is meaningful even when the kernel mass is tiny.
    """
    r = _check_unit_interval(r)
    if a <= 0 or b <= 0:
        raise DomainError("Beta shapes must be positive")
    if r == 0.0:
        return 0.0, 0.0

    scale = float(special.betainc(a, b, r)) * math.exp(special.betaln(a, b))
    if not (scale > 0 and math.isfinite(scale)):
        scale = 1.0

    if r == 1.0:
        da = _quad(lambda t: 1.0 / scale, 1.0, "alg-loga", (a - 1.0, b - 1.0), cfg)
        db = _quad(lambda t: 1.0 / scale, 1.0, "alg-logb", (a - 1.0, b - 1.0), cfg)
    else:
        da = _quad(lambda t: (1.0 - t) ** (b - 1.0) / scale, r,
                   "alg-loga", (a - 1.0, 0.0), cfg)
        db = _quad(lambda t: (1.0 - t) ** (b - 1.0) * math.log1p(-t) / scale, r,
                   "alg", (a - 1.0, 0.0), cfg)
    return da * scale, db * scale


def beta_cdf_grad_psi(r: float, psi: float, c: float,
                      cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """d/dpsi of I(r; psi*c, (1-psi)*c).

    Quotient rule on B(r;a,b)/B(a,b); the complete Beta function does depend on
    psi, which is where the digamma term comes from.
    """
    r = _check_unit_interval(r)
    if not (0.0 < psi < 1.0):
        raise DomainError(f"psi must lie strictly inside (0, 1), got {psi}")
    if c <= 0:
        raise DomainError("precision must be positive")
    if r == 0.0 or r == 1.0:
        return 0.0
    a, b = psi * c, (1.0 - psi) * c
    if special.betainc(a, b, r) > 0.5:
        # reflection I(r; a, b) = 1 - I(1-r; b, a) keeps the small tail, so the
        # two terms below never cancel against a CDF value near 1
        r, psi = 1.0 - r, 1.0 - psi
        a, b = b, a
    da, db = incomplete_beta_grad(r, a, b, cfg)
    inv_complete = math.exp(-special.betaln(a, b))
    cdf = special.betainc(a, b, r)
    return c * inv_complete * (da - db) - cdf * c * (special.psi(a) - special.psi(b))


# ---------------------------------------------------------------------------
# Weibull
# ---------------------------------------------------------------------------

def weibull_logpdf(y, p: WeibullParams):
    """Log density; -inf at y=0 when shape > 1."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise DomainError("Weibull density needs finite y")
    if np.any(y < 0):
        raise DomainError("Weibull density is supported on y >= 0")
    k, lam = p.shape, p.scale
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        z = y / lam
        out = math.log(k / lam) + (k - 1.0) * np.log(z) - z ** k
        if k == 1.0:
            out = np.where(y == 0, math.log(1.0 / lam), out)
    return float(out) if out.ndim == 0 else out


def weibull_pdf(y, p: WeibullParams):
    y_arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y_arr)):
        raise DomainError("Weibull density needs finite y")
    if np.any(y_arr < 0):
        raise DomainError("Weibull density is supported on y >= 0")
    k, lam = p.shape, p.scale
    z = y_arr / lam
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = (k / lam) * z ** (k - 1.0) * np.exp(-(z ** k))
    return float(out) if out.ndim == 0 else out


def _shape_equation(k: float, centred_log: np.ndarray) -> tuple[float, float]:
    """Profile-likelihood shape equation g(k) and its derivative.

    g(k) = sum x^k log x / sum x^k - 1/k - mean(log x), evaluated with log x
    centred so that the exponentials stay bounded.
    """
    shift = centred_log.max()
    w = np.exp(k * (centred_log - shift))
    sw = w.sum()
    m1 = (w * centred_log).sum() / sw
    m2 = (w * centred_log * centred_log).sum() / sw
    g = m1 - 1.0 / k
    dg = (m2 - m1 * m1) + 1.0 / (k * k)
    return g, dg


def weibull_mle_fit(samples, min_samples: int = 2, tol: float = 1e-10,
                    max_iter: int = 100) -> WeibullParams:
    """Maximum-likelihood Weibull fit.

    The shape solves the profile equation via Newton steps kept inside a
    bisection bracket; the scale then follows in closed form.  The shape is
    clamped to [SHAPE_MIN, SHAPE_MAX].

    Raises ``Degenerate`` for fewer than ``min_samples`` values or zero spread.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise Degenerate("no samples")
    if not np.all(np.isfinite(x)):
        raise NonPositiveSample("samples must be finite")
    if np.any(x <= 0):
        raise NonPositiveSample("Weibull samples must be strictly positive")
    if x.size < min_samples:
        raise Degenerate(f"{x.size} samples is below the minimum of {min_samples}")
    if np.all(x == x[0]):
        raise Degenerate("all samples are identical")

    x = np.sort(x)   # the fit must not depend on sample order
    logx = np.log(x)
    centred = logx - logx.mean()

    lo, hi = SHAPE_MIN, SHAPE_MAX
    g_lo, _ = _shape_equation(lo, centred)
    g_hi, _ = _shape_equation(hi, centred)
    if g_lo >= 0:
        k = lo
    elif g_hi <= 0:
        k = hi
    else:
        # method-of-moments start (Justus approximation on the coefficient of variation)
        cv = x.std() / x.mean()
        k = float(np.clip(cv ** -1.086 if cv > 0 else 1.0, lo, hi))
        for _ in range(max_iter):
            g, dg = _shape_equation(k, centred)
            if g > 0:
                hi = k
            else:
                lo = k
            step = g / dg
            k_new = k - step
            if not (lo < k_new < hi):
                k_new = 0.5 * (lo + hi)
            if abs(k_new - k) <= tol * max(1.0, k):
                k = k_new
                break
            k = k_new

    shift = logx.max()
    log_scale = shift + math.log(np.mean(np.exp(k * (logx - shift)))) / k
    return WeibullParams(shape=float(k), scale=float(math.exp(log_scale)))


def weibull_kl(p: WeibullParams, q: WeibullParams) -> float:
    """Closed-form KL(p || q) between two Weibull distributions."""
    if p == q:
        return 0.0
    k, lam = p.shape, p.scale
    k2, lam2 = q.shape, q.scale
    log_lam, log_lam2 = math.log(lam), math.log(lam2)
    log_tail = k2 * (log_lam - log_lam2) + special.gammaln(k2 / k + 1.0)
    if log_tail > _LOG_MAX:
        raise WeibullOverflow(
            f"KL between {p} and {q} exceeds the floating-point range"
        )
    kl = (
        math.log(k) - k * log_lam
        - math.log(k2) + k2 * log_lam2
        + (k - k2) * (log_lam - EULER_GAMMA / k)
        + math.exp(log_tail)
        - 1.0
    )
    if kl < 0.0:
        if kl < -KL_NEGATIVE_TOL:
            raise ArithmeticError(f"negative KL {kl} from {p} and {q}")
        kl = 0.0
    return kl


# ---------------------------------------------------------------------------
# Simplex
# ---------------------------------------------------------------------------

def project_to_simplex(v) -> np.ndarray:
    """Euclidean projection onto {w : w >= 0, sum w = 1} by sort and threshold."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise DomainError("cannot project an empty vector")
    if not np.all(np.isfinite(v)):
        raise DomainError("cannot project a non-finite vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)
