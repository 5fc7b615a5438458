"""Sweep drivers producing the CSV study files, and the slope-fit reader.

Every mode emits the same schema, one row per (d, n, query point):

    d,n,a_norm,rho_spa,rho_exact,rel_err,i_minus_one,eps,bound_total,wall_ms,status

with rel_err = |rho_spa / rho_exact - 1| and eps = d^2 / n.  Floats are
written with repr, so values round-trip exactly and a rerun with the same
spec and timing disabled is byte-identical.  wall_ms stays empty unless
timing is requested, because timing and reproducible bytes cannot coexist.

Modes differ in how i_minus_one is obtained:

  error_scaling    |rho_exact / rho_spa - 1|, the measured correction gap;
  correction_study |I - 1| from the contour quadrature (d <= 3), with the
                   density ratio as a cross-check (status "inconsistent"
                   when they disagree);
  clt_study        reuses the columns: a_norm is ||x||, rho_spa the scaled
                   Gaussian limit n^{d/2} gamma_d(x), rho_exact the exact
                   scaled-mean density, rel_err = i_minus_one = |ratio - 1|,
                   bound_total the cubic-plus-budget bound.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .correction import QuadSpec, correction_integral
from .errors import (
    AssumptionViolationError,
    ConfigError,
    FitError,
    ModelDomainError,
    NonconvergenceError,
    PhaseBranchError,
    QuadratureError,
)
from .model import GaussianMixture, load_model_file, parse_kv_lines
from .oracle import ExactMeanDensity, clt_ratio
from .saddle import solve_saddle
from .spa import error_bound, spa_density

CSV_HEADER = "d,n,a_norm,rho_spa,rho_exact,rel_err,i_minus_one,eps,bound_total,wall_ms,status"

_ROW_ERRORS = (
    NonconvergenceError,
    QuadratureError,
    AssumptionViolationError,
    PhaseBranchError,
    ModelDomainError,
)

_MODES = ("error_scaling", "correction_study", "clt_study")


@dataclass(frozen=True)
class ExperimentSpec:
    mode: str
    model_path: str
    n_grid: tuple[int, ...]
    d_grid: tuple[int, ...] | None = None
    a_shells: tuple[tuple[float, int], ...] = ()
    a_points: tuple[tuple[float, ...], ...] = ()
    seed: int = 0
    out: str | None = None
    tol: float = 1e-12
    quad_nodes: int = 24
    trunc_radius: float = 2.5
    kappa: float = 1.0
    timing: bool = False

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ConfigError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if not self.n_grid:
            raise ConfigError("n_grid must not be empty")
        if any(n < 1 for n in self.n_grid):
            raise ConfigError("n_grid entries must be >= 1")
        if not self.a_shells and not self.a_points:
            raise ConfigError("need at least one of a_shells, a_points")


@dataclass(frozen=True)
class ResultRecord:
    d: int
    n: int
    a_norm: float
    rho_spa: float
    rho_exact: float
    rel_err: float
    i_minus_one: float
    eps: float
    bound_total: float
    wall_ms: float | None
    status: str


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    points: int


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise ConfigError(f"expected a boolean flag, got {text!r}")


def load_experiment_spec(path) -> ExperimentSpec:
    """Parse a key = value spec file; the model path resolves relative to it."""
    path = Path(path)
    kv = parse_kv_lines(path.read_text())
    for key in ("mode", "model", "n_grid"):
        if key not in kv:
            raise ConfigError(f"spec is missing required key {key!r}")
    model_path = str((path.parent / kv["model"]).resolve())
    n_grid = tuple(int(tok) for tok in kv["n_grid"].split())
    d_grid = None
    if "d_grid" in kv:
        d_grid = tuple(int(tok) for tok in kv["d_grid"].split())
        if any(d < 1 for d in d_grid):
            raise ConfigError("d_grid entries must be >= 1")
    shells = []
    for tok in kv.get("a_shells", "").split():
        try:
            radius_s, count_s = tok.split(":")
            shells.append((float(radius_s), int(count_s)))
        except ValueError as exc:
            raise ConfigError(f"bad a_shells entry {tok!r}, expected radius:count") from exc
        if shells[-1][0] < 0 or shells[-1][1] < 1:
            raise ConfigError(f"bad a_shells entry {tok!r}")
    points = []
    if "a_points" in kv:
        for group in kv["a_points"].split(";"):
            group = group.strip()
            if group:
                points.append(tuple(float(tok) for tok in group.split()))
    return ExperimentSpec(
        mode=kv["mode"],
        model_path=model_path,
        n_grid=n_grid,
        d_grid=d_grid,
        a_shells=tuple(shells),
        a_points=tuple(points),
        seed=int(kv.get("seed", "0")),
        out=kv.get("out"),
        tol=float(kv.get("tol", "1e-12")),
        quad_nodes=int(kv.get("quad_nodes", "24")),
        trunc_radius=float(kv.get("trunc_radius", "2.5")),
        kappa=float(kv.get("kappa", "1.0")),
        timing=_parse_bool(kv.get("timing", "off")),
    )


def _query_points(spec, d):
    """Evaluation points for dimension d: explicit points, then shell draws.

    Shell directions come from a (seed, d) stream, so the same spec always
    visits the same points.  A zero-radius shell contributes the origin once.
    """
    pts = []
    for vec in spec.a_points:
        if len(vec) != d:
            raise ConfigError(
                f"a_points entry has {len(vec)} components but d={d}"
            )
        pts.append(np.asarray(vec, dtype=float))
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, d]))
    origin_done = False
    for radius, count in spec.a_shells:
        if radius == 0.0:
            if not origin_done:
                pts.append(np.zeros(d))
                origin_done = True
            continue
        u = rng.standard_normal((count, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        pts.extend(radius * row for row in u)
    return pts


def _nan_record(d, n, a_norm, eps, bound, wall_ms, status):
    nan = float("nan")
    return ResultRecord(d, n, a_norm, nan, nan, nan, nan, eps, bound, wall_ms, status)


def _budget_for(model, d, n, max_norm, kappa):
    tau_radius = max(2.0 * max_norm, 1e-3)
    t_radius = 2.5 * math.sqrt(d / n)
    if model.is_pure_gaussian:
        return error_bound(d, n, 0.0, 0.0, kappa).total
    return error_bound(
        d, n, model.c3_sup(tau_radius, t_radius), model.c4_sup(tau_radius, t_radius), kappa
    ).total


def _sweep(spec, per_point):
    """Common d/n/point loop; per_point fills in the mode-specific fields."""
    d_values = spec.d_grid
    records = []
    for d in d_values or (None,):
        params = load_model_file(spec.model_path, d_override=d)
        model = GaussianMixture(params)
        pts = _query_points(spec, params.d)
        max_norm = max(float(np.linalg.norm(p)) for p in pts)
        for n in spec.n_grid:
            bound = _budget_for(model, params.d, n, max_norm, spec.kappa)
            eps = params.d**2 / n
            oracle = ExactMeanDensity(params, n)
            for a in pts:
                a_norm = float(np.linalg.norm(a))
                t0 = time.perf_counter() if spec.timing else None
                try:
                    rec = per_point(model, oracle, params.d, n, a, a_norm, eps, bound)
                except _ROW_ERRORS as exc:
                    rec = _nan_record(
                        params.d, n, a_norm, eps, bound, None, type(exc).__name__
                    )
                if spec.timing:
                    wall = (time.perf_counter() - t0) * 1e3
                    rec = ResultRecord(**{**asdict(rec), "wall_ms": wall})
                records.append(rec)
    return records


def run_error_scaling(spec: ExperimentSpec):
    def per_point(model, oracle, d, n, a, a_norm, eps, bound):
        saddle = solve_saddle(model, a, tol=spec.tol)
        est = spa_density(saddle, n)
        rho_exact = oracle.density(a)
        i_true = rho_exact / est.density
        return ResultRecord(
            d, n, a_norm, est.density, rho_exact,
            abs(est.density / rho_exact - 1.0), abs(i_true - 1.0),
            eps, bound, None, "ok",
        )

    return _sweep(spec, per_point)


def run_correction_study(spec: ExperimentSpec):
    quad = QuadSpec(nodes_per_axis=spec.quad_nodes, trunc_radius=spec.trunc_radius)

    def per_point(model, oracle, d, n, a, a_norm, eps, bound):
        saddle = solve_saddle(model, a, tol=spec.tol)
        est = spa_density(saddle, n)
        rho_exact = oracle.density(a)
        corr = correction_integral(model, saddle, n, quad, kappa=spec.kappa)
        i_true = rho_exact / est.density
        consistent = abs(corr.i_value - i_true) <= max(1e-9, 5e-6 * abs(i_true))
        return ResultRecord(
            d, n, a_norm, est.density, rho_exact,
            abs(est.density / rho_exact - 1.0), corr.abs_err_from_one,
            eps, bound, None, "ok" if consistent else "inconsistent",
        )

    return _sweep(spec, per_point)


def run_clt_study(spec: ExperimentSpec):
    def per_point(model, oracle, d, n, x, x_norm, eps, bound):
        comparison = clt_ratio(model.params, n, x, kappa=spec.kappa)
        log_gauss = -0.5 * d * math.log(2.0 * math.pi) - 0.5 * float(x @ x)
        rho_limit = n ** (d / 2.0) * math.exp(log_gauss)
        rho_exact = oracle.density(np.asarray(x) / math.sqrt(n))
        gap = abs(comparison.ratio - 1.0)
        return ResultRecord(
            d, n, x_norm, rho_limit, rho_exact, gap, gap,
            eps, comparison.bound, None, "ok",
        )

    return _sweep(spec, per_point)


_RUNNERS = {
    "error_scaling": run_error_scaling,
    "correction_study": run_correction_study,
    "clt_study": run_clt_study,
}


def format_csv(records) -> str:
    lines = [CSV_HEADER]
    for r in records:
        wall = "" if r.wall_ms is None else repr(float(r.wall_ms))
        lines.append(",".join([
            str(r.d), str(r.n), repr(float(r.a_norm)),
            repr(float(r.rho_spa)), repr(float(r.rho_exact)),
            repr(float(r.rel_err)), repr(float(r.i_minus_one)),
            repr(float(r.eps)), repr(float(r.bound_total)),
            wall, r.status,
        ]))
    return "\n".join(lines) + "\n"


def read_records(path):
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigError(f"{path}: not a study file (bad header)")
    records = []
    for ln in lines[1:]:
        f = ln.split(",")
        if len(f) != 11:
            raise ConfigError(f"{path}: bad row {ln!r}")
        records.append(ResultRecord(
            d=int(f[0]), n=int(f[1]), a_norm=float(f[2]),
            rho_spa=float(f[3]), rho_exact=float(f[4]), rel_err=float(f[5]),
            i_minus_one=float(f[6]), eps=float(f[7]), bound_total=float(f[8]),
            wall_ms=None if f[9] == "" else float(f[9]), status=f[10],
        ))
    return records


def run_experiment(spec: ExperimentSpec, out=None):
    """Run a sweep; write the CSV and a sha256 manifest when an output is set.

    Returns (records, csv_path or None).
    """
    records = _RUNNERS[spec.mode](spec)
    target = out or spec.out
    if target is None:
        return records, None
    csv_path = Path(target)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    payload = format_csv(records)
    csv_path.write_text(payload)
    digest = hashlib.sha256(payload.encode()).hexdigest()
    manifest = {
        "mode": spec.mode,
        "model": spec.model_path,
        "rows": len(records),
        "csv_sha256": digest,
        "seed": spec.seed,
        "total_wall_ms": (
            sum(r.wall_ms for r in records if r.wall_ms is not None)
            if spec.timing else None
        ),
    }
    manifest_path = csv_path.with_name(csv_path.name + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return records, csv_path


def emit_plot_data(records, path, x="eps", y="i_minus_one", group="d"):
    """Write grouped (x, y) pairs as JSON for external plotting."""
    series = {}
    for r in records:
        if r.status != "ok":
            continue
        key = str(getattr(r, group))
        series.setdefault(key, []).append([getattr(r, x), getattr(r, y)])
    doc = {"x": x, "y": y, "group": group, "series": series}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc


def read_plot_data(path):
    doc = json.loads(Path(path).read_text())
    for key in ("x", "y", "group", "series"):
        if key not in doc:
            raise ConfigError(f"{path}: not a plot-data file")
    return doc


def fit_slope(xs, ys) -> SlopeFit:
    """Least-squares slope of log y against log x.

    Refuses fits that cannot mean anything: fewer than 4 points, any
    non-positive value, or an x spread under half a decade.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise FitError("x and y must be 1-d arrays of equal length")
    if len(xs) < 4:
        raise FitError(f"need at least 4 points for a slope, got {len(xs)}")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise FitError("log fit needs strictly positive values")
    lx, ly = np.log10(xs), np.log10(ys)
    if lx.max() - lx.min() < 0.5:
        raise FitError(
            f"x spans {lx.max() - lx.min():.3f} decades; refusing a slope "
            "from less than half a decade"
        )
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(
        slope=float(slope), intercept=float(intercept),
        r_squared=r2, points=len(xs),
    )
