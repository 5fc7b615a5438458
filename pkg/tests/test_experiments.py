"""Sweep runners, CSV/manifest determinism, slope fitting."""

import hashlib
import json

import numpy as np
import pytest

from spahd import ConfigError, FitError, fit_slope, run_experiment
from spahd.experiments import (
    CSV_HEADER,
    ExperimentSpec,
    emit_plot_data,
    format_csv,
    load_experiment_spec,
    read_plot_data,
    read_records,
)

# mpmath 40-digit reference: mu = 1, sigma = 1, a = 0, n = 2
REL_ERR_N2 = 0.033872956787750616434


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "model.txt"
    path.write_text("d = 1\nmu = unit\nsigma = identity\n")
    return str(path)


def make_spec(model_file, **kw):
    base = dict(
        mode="error_scaling",
        model_path=model_file,
        n_grid=(2, 4),
        a_points=((0.0,),),
    )
    base.update(kw)
    return ExperimentSpec(**base)


class TestErrorScaling:
    def test_reference_row(self, model_file):
        records, _ = run_experiment(make_spec(model_file))
        first = records[0]
        assert first.d == 1 and first.n == 2
        assert first.rel_err == pytest.approx(REL_ERR_N2, rel=1e-12)
        assert first.status == "ok"

    def test_row_identity(self, model_file):
        # rel_err = |spa/exact - 1| and i_minus_one = |exact/spa - 1| are
        # the same gap seen from the two sides of the ratio
        records, _ = run_experiment(
            make_spec(model_file, n_grid=(2, 8, 32), a_points=((0.2,),))
        )
        for r in records:
            assert r.rel_err == pytest.approx(
                r.i_minus_one / (r.rho_exact / r.rho_spa), rel=1e-12
            )

    def test_gap_halves_when_n_doubles(self, model_file):
        records, _ = run_experiment(
            make_spec(model_file, n_grid=(100, 200, 400), a_points=((0.1,),))
        )
        gaps = [r.i_minus_one for r in records]
        for a, b in zip(gaps, gaps[1:]):
            assert 1.6 <= a / b <= 2.5

    def test_pure_gaussian_rows_are_exact(self, tmp_path):
        path = tmp_path / "gauss.txt"
        path.write_text("d = 2\nsigma = identity\n")
        spec = make_spec(str(path), n_grid=(10, 50), a_points=((0.3, -0.1),))
        records, _ = run_experiment(spec)
        for r in records:
            assert r.rel_err <= 1e-12
            assert r.status == "ok"

    def test_eps_and_bound_columns(self, model_file):
        records, _ = run_experiment(make_spec(model_file, n_grid=(100,)))
        r = records[0]
        assert r.eps == pytest.approx(1 / 100)
        assert r.bound_total > 0


class TestCorrectionStudy:
    def test_rows_consistent(self, model_file):
        spec = make_spec(
            model_file,
            mode="correction_study",
            n_grid=(10, 40),
            a_points=((0.25,),),
        )
        records, _ = run_experiment(spec)
        assert len(records) == 2
        for r in records:
            assert r.status == "ok"  # includes the quad-vs-ratio cross-check
            assert r.i_minus_one > 0


class TestDeterminism:
    def test_reruns_are_byte_identical(self, model_file, tmp_path):
        spec = make_spec(
            model_file, n_grid=(5, 20), a_shells=((0.3, 2),), a_points=((0.1,),)
        )
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        run_experiment(spec, out=str(out1))
        run_experiment(spec, out=str(out2))
        assert out1.read_bytes() == out2.read_bytes()

    def test_manifest_digest_matches_file(self, model_file, tmp_path):
        out = tmp_path / "run.csv"
        run_experiment(make_spec(model_file), out=str(out))
        manifest = json.loads((tmp_path / "run.csv.manifest.json").read_text())
        assert manifest["csv_sha256"] == hashlib.sha256(out.read_bytes()).hexdigest()
        assert manifest["rows"] == 2
        assert manifest["total_wall_ms"] is None  # timing off by default

    def test_csv_round_trip(self, model_file, tmp_path):
        spec = make_spec(model_file, n_grid=(3, 9))
        records, _ = run_experiment(spec)
        out = tmp_path / "x.csv"
        out.write_text(format_csv(records))
        back = read_records(str(out))
        assert back == records

    def test_read_rejects_foreign_csv(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ConfigError):
            read_records(str(bad))


class TestSpecFiles:
    def test_load_round_trip(self, tmp_path, model_file):
        spec_path = tmp_path / "sweep.spec"
        spec_path.write_text(
            "mode = error_scaling\n"
            f"model = {model_file}\n"
            "n_grid = 10 20 40\n"
            "d_grid = 1 2\n"
            "a_shells = 0.0:1 0.3:2\n"
            "seed = 3\n"
            "timing = on\n"
        )
        spec = load_experiment_spec(str(spec_path))
        assert spec.n_grid == (10, 20, 40)
        assert spec.d_grid == (1, 2)
        assert spec.a_shells == ((0.0, 1), (0.3, 2))
        assert spec.seed == 3
        assert spec.timing

    def test_missing_required_key(self, tmp_path):
        p = tmp_path / "s.spec"
        p.write_text("mode = error_scaling\nmodel = m.txt\n")
        with pytest.raises(ConfigError, match="n_grid"):
            load_experiment_spec(str(p))

    def test_bad_shell_token(self, tmp_path, model_file):
        p = tmp_path / "s.spec"
        p.write_text(
            f"mode = error_scaling\nmodel = {model_file}\n"
            "n_grid = 10\na_shells = 0.3x4\n"
        )
        with pytest.raises(ConfigError, match="a_shells"):
            load_experiment_spec(str(p))

    def test_spec_validation(self, model_file):
        with pytest.raises(ConfigError):
            make_spec(model_file, mode="noise_study")
        with pytest.raises(ConfigError):
            make_spec(model_file, n_grid=())
        with pytest.raises(ConfigError):
            make_spec(model_file, n_grid=(0,))
        with pytest.raises(ConfigError):
            make_spec(model_file, a_points=(), a_shells=())

    def test_timing_column(self, model_file, tmp_path):
        records, _ = run_experiment(make_spec(model_file, timing=True))
        assert all(r.wall_ms is not None and r.wall_ms >= 0 for r in records)
        # timing rows still parse, but reruns are no longer byte-stable
        out = tmp_path / "t.csv"
        out.write_text(format_csv(records))
        assert read_records(str(out))[0].wall_ms is not None


class TestPlotData:
    def test_round_trip(self, model_file, tmp_path):
        records, _ = run_experiment(make_spec(model_file, n_grid=(5, 10)))
        path = tmp_path / "plot.json"
        doc = emit_plot_data(records, str(path))
        back = read_plot_data(str(path))
        assert back == doc
        assert back["series"]["1"]  # d = 1 series present

    def test_rejects_foreign_json(self, tmp_path):
        p = tmp_path / "other.json"
        p.write_text(json.dumps({"hello": 1}))
        with pytest.raises(ConfigError):
            read_plot_data(str(p))


class TestFitSlope:
    def test_recovers_power_law(self):
        xs = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
        fit = fit_slope(xs, 3.0 * xs**2)
        assert fit.slope == pytest.approx(2.0, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
        assert fit.points == 5

    def test_refusals(self):
        with pytest.raises(FitError):  # too few points
            fit_slope([1, 2, 4], [1, 2, 4])
        with pytest.raises(FitError):  # non-positive y
            fit_slope([1, 2, 4, 8], [1, 2, 0, 4])
        with pytest.raises(FitError):  # under half a decade of x
            fit_slope([1.0, 1.2, 1.5, 2.0], [1, 2, 3, 4])
        with pytest.raises(FitError):  # shape mismatch
            fit_slope([1, 2, 4, 8], [1, 2, 4])


def test_csv_header_is_stable():
    # downstream tooling keys on these exact column names
    assert CSV_HEADER == (
        "d,n,a_norm,rho_spa,rho_exact,rel_err,i_minus_one,eps,bound_total,"
        "wall_ms,status"
    )
