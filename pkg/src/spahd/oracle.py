"""Reference densities: exact binomial-mixture oracle and Monte Carlo check.

The mean of n draws from the symmetric mixture is itself a (n+1)-component
Gaussian mixture: conditioning on how many draws took the +mu branch gives
mean (2k - n)/n * mu and covariance sigma/n with Binomial(n, 1/2) weights.
That finite sum is evaluated in the log domain and serves as the exact
oracle.  The Monte Carlo oracle is an independent cross-check on the formula
itself: sample means drawn directly, product-kernel density estimate at the
query point, bootstrap standard error attached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln, logsumexp

from .errors import DimensionError, StandardizationError
from .model import GaussianMixture, MixtureParams
from .saddle import c3_ball
from .spa import error_bound

_LOG_2PI = math.log(2.0 * math.pi)
_MC_CHUNK = 1 << 16


class ExactMeanDensity:
    """Exact density of the n-sample mean, reusable across query points.

    Precomputes the log binomial weights log C(n,k) - n log 2 (log-Gamma,
    no factorial overflow) and the Cholesky factor of sigma/n.
    """

    def __init__(self, params: MixtureParams, n: int):
        if n < 1:
            raise DimensionError(f"n must be >= 1, got {n}")
        self.params = params
        self.n = int(n)
        k = np.arange(n + 1, dtype=float)
        self.log_binom_weights = (
            gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0) - n * math.log(2.0)
        )
        self._means = (2.0 * k - n) / n
        self._chol = np.linalg.cholesky(params.sigma / n)
        self._log_norm = (
            -0.5 * params.d * _LOG_2PI - float(np.sum(np.log(np.diag(self._chol))))
        )
        # whitened query pieces: |x - m mu|^2 expands in three scalars
        self._mu_w = solve_triangular(self._chol, params.mu, lower=True)
        self._q_mu = float(self._mu_w @ self._mu_w)

    def log_density(self, a) -> float:
        a = np.asarray(a, dtype=float).reshape(-1)
        if a.shape != (self.params.d,):
            raise DimensionError(f"a has shape {a.shape}, expected ({self.params.d},)")
        a_w = solve_triangular(self._chol, a, lower=True)
        q_a = float(a_w @ a_w)
        q_cross = float(a_w @ self._mu_w)
        m = self._means
        quad = q_a - 2.0 * m * q_cross + (m * m) * self._q_mu
        return float(logsumexp(self.log_binom_weights - 0.5 * quad)) + self._log_norm

    def density(self, a) -> float:
        return math.exp(self.log_density(a))


def exact_mean_density(params: MixtureParams, n: int, a) -> float:
    """Density of the n-sample mean at a (one-shot convenience wrapper)."""
    return ExactMeanDensity(params, n).density(a)


@dataclass(frozen=True)
class McOracleConfig:
    """Monte Carlo oracle settings; samples below 1e4 are refused."""

    samples: int = 20000
    seed: int = 0
    bandwidth: float | None = None  # None: Scott's rule per axis
    bootstrap: int = 200

    def __post_init__(self):
        if self.samples < 10000:
            raise DimensionError(f"samples must be >= 1e4, got {self.samples}")
        if self.bootstrap < 1:
            raise DimensionError("bootstrap count must be >= 1")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise DimensionError("bandwidth must be > 0")


def _sample_means(params, n, count, seed):
    """count independent n-sample means, chunked with per-chunk seed streams.

    The sign-sum over n draws collapses to a Binomial, so each mean costs one
    binomial and one Gaussian draw regardless of n.
    """
    d = params.d
    chol = np.linalg.cholesky(params.sigma)
    out = np.empty((count, d))
    pos = 0
    chunk_idx = 0
    while pos < count:
        take = min(_MC_CHUNK, count - pos)
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), chunk_idx]))
        k = rng.binomial(n, 0.5, size=take)
        z = rng.standard_normal((take, d))
        out[pos:pos + take] = (
            ((2.0 * k - n) / n)[:, None] * params.mu + (z @ chol.T) / math.sqrt(n)
        )
        pos += take
        chunk_idx += 1
    return out


def mc_density(params: MixtureParams, n: int, a, config: McOracleConfig | None = None):
    """Kernel density estimate of the mean density at a, with bootstrap stderr.

    Returns (estimate, stderr).  Only supported for d <= 4, where product-
    kernel estimates at a point are still reasonable at 1e4+ samples.
    """
    if params.d > 4:
        raise DimensionError(f"mc oracle supports d <= 4, got d={params.d}")
    if n < 1:
        raise DimensionError(f"n must be >= 1, got {n}")
    cfg = config or McOracleConfig()
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.shape != (params.d,):
        raise DimensionError(f"a has shape {a.shape}, expected ({params.d},)")
    x = _sample_means(params, n, cfg.samples, cfg.seed)
    if cfg.bandwidth is not None:
        h = np.full(params.d, cfg.bandwidth)
    else:
        sd = np.std(x, axis=0, ddof=1)
        sd = np.where(sd > 0, sd, 1.0 / math.sqrt(n))
        h = sd * cfg.samples ** (-1.0 / (params.d + 4))
    u = (x - a) / h
    log_k = -0.5 * np.sum(u * u, axis=1) - np.sum(np.log(h)) - 0.5 * params.d * _LOG_2PI
    v = np.exp(log_k)
    est = float(np.mean(v))
    boot_rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 0xB007]))
    boot = np.empty(cfg.bootstrap)
    for b in range(cfg.bootstrap):
        idx = boot_rng.integers(0, cfg.samples, cfg.samples)
        boot[b] = np.mean(v[idx])
    return est, float(np.std(boot, ddof=1))


class CltComparison(NamedTuple):
    ratio: float
    bound: float


def clt_ratio(params: MixtureParams, n: int, x, kappa: float = 1.0) -> CltComparison:
    """Density ratio of sqrt(n) * mean at x against the standard Gaussian.

    Requires a standardized model (sigma + mu mu' = identity).  The bound is
    the cubic local term C3(a) ||x||^3 / sqrt(n) at a = x / sqrt(n) plus the
    multiplicative budget total, both up to absolute constants.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (params.d,):
        raise DimensionError(f"x has shape {x.shape}, expected ({params.d},)")
    if n < 1:
        raise DimensionError(f"n must be >= 1, got {n}")
    second = params.sigma + np.outer(params.mu, params.mu)
    if np.max(np.abs(second - np.eye(params.d))) > 1e-10:
        raise StandardizationError("clt_ratio needs sigma + mu mu' = identity; "
                                   "use MixtureParams.standardized()")
    a = x / math.sqrt(n)
    log_exact = ExactMeanDensity(params, n).log_density(a)
    log_gauss = -0.5 * params.d * _LOG_2PI - 0.5 * float(x @ x)
    ratio = math.exp(log_exact - 0.5 * params.d * math.log(n) - log_gauss)
    model = GaussianMixture(params)
    norm_x = float(np.linalg.norm(x))
    local = c3_ball(model, a) * norm_x**3 / math.sqrt(n)
    if model.is_pure_gaussian:
        budget = error_bound(params.d, n, 0.0, 0.0, kappa).total
    else:
        tau_radius = max(2.0 * float(np.linalg.norm(a)), 1e-3)
        t_radius = 2.5 * math.sqrt(params.d / n)
        budget = error_bound(
            params.d, n,
            model.c3_sup(tau_radius, t_radius),
            model.c4_sup(tau_radius, t_radius),
            kappa,
        ).total
    return CltComparison(ratio=ratio, bound=local + budget)
