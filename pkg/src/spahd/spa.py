"""Saddlepoint density estimate and its multiplicative error budget.

The density of the mean of n i.i.d. draws at a point a is approximated by

    (n / 2 pi)^(d/2) det(H)^(-1/2) exp(-n phi*(a))

with H the cgf Hessian at the saddle.  Everything is assembled in the log
domain; exp only happens at the very end so deep tails stay representable.
The budget for the multiplicative error |I(a) - 1| keeps its three terms
separate (main, exp(-d), truncation tail) and carries the unknown absolute
constant as metadata instead of folding it into the numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import gammaln

from .errors import DimensionError, SpahdError
from .saddle import SaddlePoint

_LOG_2PI = math.log(2.0 * math.pi)

# exp underflows to subnormal/zero below roughly -745.13
_UNDERFLOW_LOG = -745.0


@dataclass(frozen=True)
class SpaEstimate:
    """Log-domain saddlepoint density value at one query point."""

    log_density: float
    density: float
    log_prefactor: float
    exponent: float
    n: int
    d: int
    underflow: bool


def spa_density(saddle: SaddlePoint, n: int) -> SpaEstimate:
    """Saddlepoint density of the n-sample mean at the solved query point."""
    if n < 1:
        raise DimensionError(f"n must be >= 1, got {n}")
    d = saddle.a.shape[0]
    log_prefactor = 0.5 * d * (math.log(n) - _LOG_2PI) - 0.5 * saddle.log_det_h
    exponent = -n * saddle.phi_star
    log_density = log_prefactor + exponent
    underflow = log_density < _UNDERFLOW_LOG
    density = 0.0 if underflow else math.exp(log_density)
    return SpaEstimate(log_density=log_density, density=density,
                       log_prefactor=log_prefactor, exponent=exponent,
                       n=int(n), d=d, underflow=underflow)


@dataclass(frozen=True)
class ErrorBudget:
    """Three-term bound on |I(a) - 1|, up to one unknown absolute constant.

    total = exp(40 c4 eps^2) (c3^2 + c4) eps + exp(-d) + (e eps / kappa^2)^(d/2)
    with eps = d^2/n.  eps_warning flags eps > 0.25, where the bound is
    vacuous but still reported.
    """

    eps: float
    c3: float
    c4: float
    kappa: float
    r_const: float
    term_main: float
    term_exp: float
    term_tail: float
    total: float
    eps_warning: bool
    constant_note: str = "x C, C unknown"


def error_bound(d: int, n: int, c3: float, c4: float, kappa: float = 1.0) -> ErrorBudget:
    """Assemble the error budget for given derivative suprema and kappa."""
    if d < 1 or n < 1:
        raise DimensionError(f"d and n must be >= 1, got d={d}, n={n}")
    if c3 < 0 or c4 < 0 or kappa <= 0:
        raise DimensionError("c3, c4 must be >= 0 and kappa > 0")
    eps = d * d / n
    try:
        term_main = math.exp(40.0 * c4 * eps * eps) * (c3 * c3 + c4) * eps
    except OverflowError:
        # far outside the bound's regime (eps_warning fires); inf is honest
        term_main = math.inf
    term_exp = math.exp(-float(d))
    term_tail = (math.e * eps / (kappa * kappa)) ** (0.5 * d)
    return ErrorBudget(eps=eps, c3=c3, c4=c4, kappa=kappa, r_const=2.5,
                       term_main=term_main, term_exp=term_exp,
                       term_tail=term_tail,
                       total=term_main + term_exp + term_tail,
                       eps_warning=eps > 0.25)


def tail_bound_terms(d: int, n: int, kappa: float = 1.0) -> tuple[float, float]:
    """Endpoint bounds for the truncated contour mass.

    Returns (exp(-d)/sqrt(d), (e d^2 / (n kappa^2))^(d/2)): the near-shell
    and far-field contributions outside the radius-2.5 sqrt(d/n) ball.
    """
    if d < 1 or n < 1:
        raise DimensionError(f"d and n must be >= 1, got d={d}, n={n}")
    if kappa <= 0:
        raise DimensionError("kappa must be > 0")
    first = math.exp(-float(d)) / math.sqrt(d)
    second = (math.e * d * d / (n * kappa * kappa)) ** (0.5 * d)
    return first, second


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d: 2 pi^(d/2) / Gamma(d/2)."""
    if d < 1:
        raise DimensionError(f"d must be >= 1, got {d}")
    return math.exp(math.log(2.0) + 0.5 * d * math.log(math.pi) - gammaln(0.5 * d))


def log_gamma_ratio(d: int) -> float:
    """log(Gamma(d) / Gamma(d/2)), validated against the duplication identity.

    Gamma(d)/Gamma(d/2) = 2^(d-1) Gamma((d+1)/2) / sqrt(pi); both sides are
    compared in the log domain to relative 1e-10 and a failure raises, since
    it would mean the special-function evaluation itself is off.
    """
    if d < 1:
        raise DimensionError(f"d must be >= 1, got {d}")
    direct = gammaln(float(d)) - gammaln(0.5 * d)
    dup = (d - 1.0) * math.log(2.0) + gammaln(0.5 * (d + 1.0)) - 0.5 * math.log(math.pi)
    if abs(direct - dup) > 1e-10 * max(1.0, abs(direct)):
        raise SpahdError(f"gamma duplication identity violated at d={d}: "
                         f"{direct!r} vs {dup!r}")
    return float(direct)


def gamma_ratio(d: int) -> float:
    """Gamma(d) / Gamma(d/2); overflows to inf for d beyond ~260."""
    ratio = log_gamma_ratio(d)
    try:
        return math.exp(ratio)
    except OverflowError:
        return math.inf
