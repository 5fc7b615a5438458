"""Cumulant generating function models.

The central object is the symmetric two-component Gaussian mixture
(1/2) N(mu, sigma) + (1/2) N(-mu, sigma), whose moment generating function

    mgf(z) = exp(z' sigma z / 2) * cosh(<mu, z>)

stays positive on the real axis and extends to complex arguments
z = tau + i t.  Everything that downstream modules need from a model is
captured by the CgfModel contract: real and complex cgf evaluation, gradient,
Hessian, and suprema of the third/fourth derivative kernels over a
(tau, t) region.  The mixture implements all of it in closed form; the only
transcendental ingredient is log cosh, evaluated through shifted forms that
stay finite for arguments far beyond the overflow point of cosh itself.

Complex evaluation is split into magnitude and phase.  The magnitude part is
branch-free.  The phase uses the principal argument of the cosh factor and is
rejected (PhaseBranchError) when the total argument leaves (-pi, pi) or the
evaluation lands on a zero of cosh, which is where the complex log stops
being single-valued.
"""

from __future__ import annotations

import math
import re as _re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import _core
from .errors import ConfigError, DimensionError, ModelDomainError, PhaseBranchError

_LOG2 = math.log(2.0)

# argmax of 2 sech^2(x) tanh(x) on [0, inf); the kernel rises to 4/(3 sqrt 3)
# there and decays afterwards
_K3_ARGMAX = math.atanh(1.0 / math.sqrt(3.0))


def logcosh(x):
    """log cosh(x), overflow-free: |x| + log1p(exp(-2|x|)) - log 2."""
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - _LOG2


def sech(x):
    """1/cosh(x) without overflow: 2 exp(-|x|) / (1 + exp(-2|x|))."""
    ax = np.abs(x)
    e = np.exp(-ax)
    return 2.0 * e / (1.0 + e * e)


def c3_kernel(alpha, beta):
    """|2 Re[sech^2(w) tanh(w)]| at w = alpha + i beta (third-derivative kernel)."""
    a = np.atleast_1d(np.asarray(alpha, dtype=float)).ravel()
    b = np.atleast_1d(np.asarray(beta, dtype=float)).ravel()
    a, b = np.broadcast_arrays(a, b)
    out3 = np.empty(a.shape, dtype=float)
    out4 = np.empty(a.shape, dtype=float)
    _core.c34_kernel_grids(np.ascontiguousarray(a), np.ascontiguousarray(b), out3, out4)
    return out3 if out3.size > 1 else float(out3[0])


def c4_kernel(alpha, beta):
    """|2 Re[sech^2(w)(1 - 3 sech^2(w))]| at w = alpha + i beta (fourth-derivative kernel)."""
    a = np.atleast_1d(np.asarray(alpha, dtype=float)).ravel()
    b = np.atleast_1d(np.asarray(beta, dtype=float)).ravel()
    a, b = np.broadcast_arrays(a, b)
    out3 = np.empty(a.shape, dtype=float)
    out4 = np.empty(a.shape, dtype=float)
    _core.c34_kernel_grids(np.ascontiguousarray(a), np.ascontiguousarray(b), out3, out4)
    return out4 if out4.size > 1 else float(out4[0])


class ComplexCgfValue(NamedTuple):
    """cgf at tau + i t, split as log-magnitude (re) and argument (im)."""

    re: float
    im: float


@dataclass(frozen=True)
class MixtureParams:
    """Parameters of the symmetric Gaussian mixture in dimension d.

    sigma must be symmetric positive definite; mu = 0 degenerates to the pure
    Gaussian, which every routine accepts (is_pure_gaussian flags it).
    """

    d: int
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        if int(self.d) < 1:
            raise DimensionError(f"d must be >= 1, got {self.d}")
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        sigma = np.asarray(self.sigma, dtype=float)
        if mu.shape != (self.d,):
            raise DimensionError(f"mu has shape {mu.shape}, expected ({self.d},)")
        if sigma.shape != (self.d, self.d):
            raise DimensionError(f"sigma has shape {sigma.shape}, expected ({self.d}, {self.d})")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise ModelDomainError("mu and sigma must be finite")
        scale = max(1.0, float(np.max(np.abs(sigma))))
        if np.max(np.abs(sigma - sigma.T)) > 1e-10 * scale:
            raise ModelDomainError("sigma is not symmetric")
        sigma = 0.5 * (sigma + sigma.T)
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise ModelDomainError("sigma is not positive definite") from exc
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def is_pure_gaussian(self) -> bool:
        return float(np.linalg.norm(self.mu)) == 0.0

    def second_moment(self) -> np.ndarray:
        """Covariance of a single draw: sigma + mu mu'."""
        return self.sigma + np.outer(self.mu, self.mu)

    def standardized(self) -> "MixtureParams":
        """Whitened copy: W mu, W sigma W with W = (sigma + mu mu')^(-1/2)."""
        w = _inv_sqrt_psd(self.second_moment())
        return MixtureParams(self.d, w @ self.mu, w @ self.sigma @ w)


def _inv_sqrt_psd(m):
    vals, vecs = np.linalg.eigh(m)
    if np.min(vals) <= 0:
        raise ModelDomainError("matrix is not positive definite")
    return (vecs / np.sqrt(vals)) @ vecs.T


def _sqrt_psd(m):
    vals, vecs = np.linalg.eigh(m)
    if np.min(vals) <= 0:
        raise ModelDomainError("matrix is not positive definite")
    return (vecs * np.sqrt(vals)) @ vecs.T


class CgfModel(ABC):
    """Capabilities every cgf model exposes to the solver and quadrature.

    v_radius is the radius of the tau-ball the model declares safe for
    saddle queries; it parameterizes the derivative suprema and the
    assumption checker, nothing enforces it on individual calls.
    """

    v_radius: float = 1.0

    @property
    @abstractmethod
    def dim(self) -> int: ...

    @abstractmethod
    def cgf_real(self, tau: np.ndarray) -> float: ...

    @abstractmethod
    def cgf_complex(self, tau: np.ndarray, t: np.ndarray) -> ComplexCgfValue: ...

    @abstractmethod
    def grad(self, tau: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def hessian(self, tau: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def c3_sup(self, tau_radius: float, t_radius: float) -> float: ...

    @abstractmethod
    def c4_sup(self, tau_radius: float, t_radius: float) -> float: ...

    def log_ratio_magnitude(self, tau, t):
        """log |mgf(tau + i t) / mgf(tau)|; branch-free by construction."""
        return self.cgf_complex(tau, t).re - self.cgf_real(tau)

    def c3_op_norm_ball(self, radius: float, directions: int = 32, seed: int = 0) -> float:
        """sup of the third-derivative operator norm over ||tau|| <= radius.

        Generic finite-difference estimate over sampled directions; models
        with structure should override with an exact form.
        """
        if radius < 0:
            raise DimensionError("radius must be >= 0")
        d = self.dim
        rng = np.random.default_rng(seed)
        us = rng.standard_normal((directions, d))
        us /= np.linalg.norm(us, axis=1, keepdims=True)
        h = 1e-3 * max(radius, 1.0)
        best = 0.0
        for r in np.linspace(0.0, radius, 9):
            for u in us:
                tau = r * u
                # five-point stencil for the third directional derivative
                f = [self.cgf_real(tau + k * h * u) for k in (-2, -1, 1, 2)]
                d3 = (-0.5 * f[0] + f[1] - f[2] + 0.5 * f[3]) / h**3
                best = max(best, abs(d3))
        return best

    def hessian_chol(self, tau):
        """(H, L) with L the lower Cholesky factor; rejects non-SPD H."""
        h = self.hessian(tau)
        try:
            return h, np.linalg.cholesky(h)
        except np.linalg.LinAlgError as exc:
            raise ModelDomainError("cgf Hessian is not positive definite") from exc


class GaussianMixture(CgfModel):
    """Closed-form cgf model for the symmetric Gaussian mixture.

    cgf(tau) = tau' sigma tau / 2 + log cosh(<mu, tau>), so every derivative
    is sigma plus a scalar kernel of alpha = <mu, tau> times a tensor power
    of mu.  The complex extension only ever needs the scalars alpha and
    beta = <mu, t>.
    """

    def __init__(self, params: MixtureParams, v_radius: float = 1.0):
        self.params = params
        self.v_radius = float(v_radius)
        self._mu = params.mu
        self._sigma = params.sigma
        self._mu_norm = float(np.linalg.norm(self._mu))
        # g = mu' sigma^{-1} mu, fixed ingredient of ||H^{-1/2} mu||
        self._g = float(self._mu @ np.linalg.solve(self._sigma, self._mu)) if self._mu_norm else 0.0
        self._c34_cache: dict[tuple[float, float], tuple[float, float]] = {}

    @property
    def dim(self) -> int:
        return self.params.d

    @property
    def is_pure_gaussian(self) -> bool:
        return self.params.is_pure_gaussian

    def _check_vec(self, v, name):
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.shape != (self.params.d,):
            raise DimensionError(f"{name} has shape {v.shape}, expected ({self.params.d},)")
        return v

    def cgf_real(self, tau):
        tau = self._check_vec(tau, "tau")
        return 0.5 * float(tau @ (self._sigma @ tau)) + float(logcosh(self._mu @ tau))

    def cgf_complex(self, tau, t):
        """cgf at tau + i t as (log-magnitude, argument).

        The argument is <tau, sigma t> plus the principal argument of
        cosh(alpha + i beta); evaluation is rejected when that total leaves
        (-pi, pi) or the point is a zero of cosh.
        """
        tau = self._check_vec(tau, "tau")
        t = self._check_vec(t, "t")
        alpha = float(self._mu @ tau)
        beta = float(self._mu @ t)
        qt = 0.5 * float(tau @ (self._sigma @ tau))
        qs = 0.5 * float(t @ (self._sigma @ t))
        sb = math.sin(beta)
        cb = math.cos(beta)
        x2 = (sb * float(sech(alpha))) ** 2
        if x2 >= 1.0:
            raise PhaseBranchError(
                f"zero of cosh at alpha={alpha:.6g}, beta={beta:.6g}; log branch undefined"
            )
        re = qt - qs + float(logcosh(alpha)) + 0.5 * math.log1p(-x2)
        im = float(tau @ (self._sigma @ t)) + math.atan2(math.tanh(alpha) * sb, cb)
        if abs(im) >= math.pi:
            raise PhaseBranchError(
                f"argument {im:.6g} outside the principal branch at beta={beta:.6g}"
            )
        return ComplexCgfValue(re, im)

    def grad(self, tau):
        tau = self._check_vec(tau, "tau")
        return self._sigma @ tau + math.tanh(float(self._mu @ tau)) * self._mu

    def hessian(self, tau):
        tau = self._check_vec(tau, "tau")
        s = float(sech(self._mu @ tau))
        return self._sigma + (s * s) * np.outer(self._mu, self._mu)

    def ratio_magnitude(self, tau, t):
        """|mgf(tau + i t) / mgf(tau)|, always <= exp(-t' sigma t / 2)."""
        return math.exp(self.log_ratio_magnitude(tau, t))

    def log_ratio_magnitude(self, tau, t):
        tau = self._check_vec(tau, "tau")
        t = self._check_vec(t, "t")
        alpha = float(self._mu @ tau)
        beta = float(self._mu @ t)
        x2 = (math.sin(beta) * float(sech(alpha))) ** 2
        if x2 >= 1.0:
            return -math.inf
        return -0.5 * float(t @ (self._sigma @ t)) + 0.5 * math.log1p(-x2)

    def phase_arg(self, tau, t):
        """Smooth phase of mgf(tau + i t): <tau, sigma t> + Arg cosh(alpha + i beta)."""
        tau = self._check_vec(tau, "tau")
        t = self._check_vec(t, "t")
        alpha = float(self._mu @ tau)
        beta = float(self._mu @ t)
        y = math.tanh(alpha) * math.sin(beta)
        x = math.cos(beta)
        if x == 0.0 and y == 0.0:
            raise PhaseBranchError(f"zero of cosh at alpha={alpha:.6g}, beta={beta:.6g}")
        return float(tau @ (self._sigma @ t)) + math.atan2(y, x)

    def whitened_mu_norm(self, alpha):
        """||H(alpha)^{-1/2} mu|| = sqrt(g / (1 + sech^2(alpha) g)) by rank-one inversion."""
        s2 = float(sech(alpha)) ** 2
        return math.sqrt(self._g / (1.0 + s2 * self._g)) if self._g else 0.0

    def _c34_sup(self, tau_radius, t_radius, n_grid=401):
        """Grid + golden-section suprema of both derivative kernels.

        alpha ranges over |alpha| <= ||mu|| * tau_radius; for each alpha,
        beta ranges over |beta| <= ||H(alpha)^{-1/2} mu|| * t_radius, and the
        kernel is weighted by that whitened norm to the 3rd/4th power.
        """
        if tau_radius <= 0 or t_radius <= 0:
            raise DimensionError("radii must be > 0")
        key = (float(tau_radius), float(t_radius))
        hit = self._c34_cache.get(key)
        if hit is not None:
            return hit
        if self.is_pure_gaussian:
            self._c34_cache[key] = (0.0, 0.0)
            return 0.0, 0.0
        a_max = self._mu_norm * tau_radius
        alphas = np.linspace(-a_max, a_max, n_grid)
        rw = np.array([self.whitened_mu_norm(a) for a in alphas])
        u = np.linspace(-1.0, 1.0, n_grid)
        agrid = np.repeat(alphas, n_grid)
        bgrid = (rw[:, None] * (t_radius * u[None, :])).ravel()
        k3 = np.empty(agrid.size)
        k4 = np.empty(agrid.size)
        _core.c34_kernel_grids(agrid, bgrid, k3, k4)
        f3 = k3 * np.repeat(rw**3, n_grid)
        f4 = k4 * np.repeat(rw**4, n_grid)

        def refine(fgrid, power):
            idx = int(np.argmax(fgrid))
            i, j = divmod(idx, n_grid)

            def eval_at(alpha, bfrac):
                r = self.whitened_mu_norm(alpha)
                k = c3_kernel(alpha, bfrac * t_radius * r) if power == 3 else \
                    c4_kernel(alpha, bfrac * t_radius * r)
                return float(k) * r**power

            best = float(fgrid[idx])
            a_lo = alphas[max(i - 1, 0)]
            a_hi = alphas[min(i + 1, n_grid - 1)]
            b_lo = u[max(j - 1, 0)]
            b_hi = u[min(j + 1, n_grid - 1)]
            a_star = alphas[i]
            b_star = u[j]
            for _ in range(2):
                b_star, v = _golden_max(lambda b: eval_at(a_star, b), b_lo, b_hi)
                best = max(best, v)
                a_star, v = _golden_max(lambda a: eval_at(a, b_star), a_lo, a_hi)
                best = max(best, v)
            return best

        out = (refine(f3, 3), refine(f4, 4))
        self._c34_cache[key] = out
        return out

    def c3_sup(self, tau_radius, t_radius):
        """sup of the whitened third-derivative kernel over the (tau, t) region."""
        return self._c34_sup(tau_radius, t_radius)[0]

    def c4_sup(self, tau_radius, t_radius):
        """sup of the whitened fourth-derivative kernel over the (tau, t) region."""
        return self._c34_sup(tau_radius, t_radius)[1]

    def c3_op_norm_ball(self, radius, **_ignored):
        """Exact sup of ||grad^3 cgf|| over ||tau|| <= radius.

        The third derivative is -2 sech^2(alpha) tanh(alpha) mu^(x3) with
        |alpha| <= radius ||mu||; the scalar factor is unimodal in |alpha|,
        so the sup sits at min(radius ||mu||, argmax).
        """
        if radius < 0:
            raise DimensionError("radius must be >= 0")
        if self.is_pure_gaussian:
            return 0.0
        a = min(radius * self._mu_norm, _K3_ARGMAX)
        return float(c3_kernel(a, 0.0)) * self._mu_norm**3


def _golden_max(f, lo, hi, tol=1e-10, max_iter=200):
    """Golden-section maximum of a unimodal-ish f on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while abs(b - a) > tol and it < max_iter:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        it += 1
    x = c if fc > fd else d
    return x, max(fc, fd)


# --- model file parsing ---------------------------------------------------
#
# Plain key = value lines, '#' comments.  Keys: d, mu, sigma.
#   mu:    "ones*0.5" | "ones" | "unit*0.7" | "unit" | "1.0, 0.0"
#   sigma: "identity" | "diag 2.0, 1.0" | "1.0 0.0; 0.0 2.0"
# Exact grammar in README.md.


def _parse_floats(text):
    parts = [p for p in _re.split(r"[,\s]+", text.strip()) if p]
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"cannot parse numbers from {text!r}") from exc


def parse_kv_lines(text):
    """key = value pairs from config text; later keys override earlier ones."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().lower()] = value.strip()
    return out


def _build_mu(spec_text, d):
    text = spec_text.strip().lower()
    m = _re.fullmatch(r"(ones|unit)(?:\s*\*\s*([-+0-9.eE]+))?", text)
    if m:
        scale = float(m.group(2)) if m.group(2) is not None else 1.0
        if m.group(1) == "ones":
            return scale * np.ones(d)
        mu = np.zeros(d)
        mu[0] = scale
        return mu
    vals = _parse_floats(spec_text)
    if len(vals) != d:
        raise ConfigError(f"mu has {len(vals)} entries, model has d = {d}")
    return np.array(vals)


def _build_sigma(spec_text, d):
    text = spec_text.strip().lower()
    if text == "identity":
        return np.eye(d)
    if text.startswith("diag"):
        vals = _parse_floats(spec_text.strip()[4:].lstrip(" :"))
        if len(vals) != d:
            raise ConfigError(f"diag sigma has {len(vals)} entries, model has d = {d}")
        return np.diag(vals)
    rows = [r for r in spec_text.split(";") if r.strip()]
    if len(rows) != d:
        raise ConfigError(f"sigma has {len(rows)} rows, model has d = {d}")
    mat = np.array([_parse_floats(r) for r in rows])
    if mat.shape != (d, d):
        raise ConfigError(f"sigma parsed to shape {mat.shape}, expected ({d}, {d})")
    return mat


def params_from_mapping(kv, d_override=None):
    """MixtureParams from parsed key/value strings, optionally re-instantiated at another d."""
    if "d" not in kv:
        raise ConfigError("model file must set d")
    try:
        d = int(kv["d"])
    except ValueError as exc:
        raise ConfigError(f"d must be an integer, got {kv['d']!r}") from exc
    if d_override is not None:
        d = int(d_override)
    mu = _build_mu(kv.get("mu", "0" if d == 1 else ", ".join(["0"] * d)), d)
    sigma = _build_sigma(kv.get("sigma", "identity"), d)
    return MixtureParams(d, mu, sigma)


def load_model_file(path, d_override=None):
    """Read a model specification file into MixtureParams."""
    text = Path(path).read_text()
    return params_from_mapping(parse_kv_lines(text), d_override=d_override)
