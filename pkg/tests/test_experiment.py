"""
Tests for ExperimentRunner: artifacts, reproducibility and failure handling.
"""

import csv
from dataclasses import replace
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

# Imports handled by conftest.py
from calderon.config import DescentConfig, ExperimentMode, GradientMode
from calderon.exceptions import CalderonError, SolverError
from calderon.experiment import ExperimentRunner
from calderon.inversion import ConvergenceHistory
from calderon.presets import get_preset
from calderon.regularization import region_average


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


@pytest.fixture
def runner(tmp_path):
    return ExperimentRunner(output_dir=str(tmp_path))


@pytest.fixture
def small_config(runner, sample_config_text):
    return runner.parser.parse_config_text(sample_config_text)


class TestDescentRun:
    def test_artifacts(self, runner, small_config, tmp_path):
        result = runner.run(small_config)
        out = tmp_path / "small-gaussian"
        assert result.output_dir == str(out)
        rows = read_rows(out / "history.csv")
        assert rows[0] == ["iter", "cost", "flux_error", "k_l2_error", "alpha"]
        assert len(rows) == len(result.history) + 1
        for name in ("conductivity.vtk", "final_u_m1.vtk", "final_flux_m1.csv"):
            assert (out / name).exists()
        flux_rows = read_rows(out / "final_flux_m1.csv")
        assert flux_rows[0] == ["face_id", "cx", "cy", "measure", "target_flux", "flux", "element_flux"]

    def test_summary(self, runner, small_config):
        result = runner.run(small_config)
        summary = result.summary
        assert summary["iterations"] == len(result.history) - 1
        assert summary["final_cost"] <= summary["initial_cost"]
        assert summary["termination"] in ("max_iters", "cost threshold", "zero gradient", "line search failed")
        assert result.k_final.shape == result.k_target.shape

    def test_snapshots(self, runner, small_config, tmp_path):
        result = runner.run(replace(small_config, snapshot_every=1))
        snapshots = sorted((tmp_path / "small-gaussian" / "snapshots").iterdir())
        assert [p.name for p in snapshots] == [f"k_{i:04d}.vtk" for i in result.history.iterations]

    def test_reruns_are_identical(self, tmp_path, small_config):
        first = ExperimentRunner(output_dir=str(tmp_path / "a")).run(small_config)
        second = ExperimentRunner(output_dir=str(tmp_path / "b")).run(small_config)
        assert np.array_equal(first.k_final, second.k_final)
        history_a = (tmp_path / "a" / "small-gaussian" / "history.csv").read_text()
        history_b = (tmp_path / "b" / "small-gaussian" / "history.csv").read_text()
        assert history_a == history_b

    def test_regions_in_summary(self, runner, small_config):
        result = runner.run(replace(small_config, dofs=(2, 2)))
        assert len(result.summary["region_k"]) == 4

    def test_solver_failure_flushes_history(self, runner, small_config, tmp_path):
        partial = ConvergenceHistory()
        partial.record(0, 1.0, 0.5, 0.2, 0.0)
        error = SolverError("CG did not converge", residual=1.0, iterations=60)
        error.history = partial
        with patch("calderon.experiment.run_descent", side_effect=error):
            with pytest.raises(SolverError):
                runner.run(small_config)
        rows = read_rows(tmp_path / "small-gaussian" / "history.csv")
        assert rows[1] == ["0", "1.0", "0.5", "0.2", "0.0"]


class TestGradcheck:
    def test_element_check(self, runner, small_config, tmp_path):
        report = runner.gradcheck(small_config, samples=5)
        assert report.ids.size == 5
        assert np.all(np.diff(report.ids) > 0)
        assert report.passed
        rows = read_rows(tmp_path / "small-gaussian" / "gradcheck.csv")
        assert rows[0][0] == "element_id"
        assert len(rows) == 6

    def test_region_check(self, runner, small_config, tmp_path):
        report = runner.gradcheck(replace(small_config, dofs=(2, 2)))
        assert report.ids.tolist() == [0, 1, 2, 3]
        assert report.passed
        rows = read_rows(tmp_path / "small-gaussian" / "gradcheck.csv")
        assert rows[0][0] == "region_id"
        assert len(rows) == 5

    def test_corruption_is_detected(self, runner, small_config):
        report = runner.gradcheck(small_config, samples=5, corrupt=True)
        assert not report.passed
        assert report.max_error > 0.05

    def test_samples_capped_by_elements(self, runner, small_config):
        report = runner.gradcheck(small_config, samples=10_000)
        assert report.ids.size == 72

    def test_same_seed_same_sample(self, runner, small_config):
        assert np.array_equal(runner.gradcheck(small_config).ids, runner.gradcheck(small_config).ids)

    def test_rejects_oned(self, runner):
        with pytest.raises(CalderonError, match="needs an experiment with measurements"):
            runner.gradcheck(get_preset("oned-demo"))


class TestOtherModes:
    def test_forward_three_region(self, runner, tmp_path):
        result = runner.run(get_preset("three-region-2d"))
        assert result.summary["far_gradient_ratio"] < 0.05
        assert (tmp_path / "three-region-2d" / "target_flux_m0.csv").exists()

    def test_forward_unknown_boundary(self, runner):
        config = replace(get_preset("three-region-2d"), boundary_value="spiral")
        with pytest.raises(CalderonError, match="Unknown boundary data"):
            runner.run(config)

    def test_oned(self, runner, tmp_path):
        result = runner.run(replace(get_preset("oned-demo"), seed=5))
        assert [row[0] for row in result.summary["rows"]] == ["a", "b", "c", "random"]
        assert result.summary["resistance"] == pytest.approx(1.0)
        assert result.summary["fem_max_deviation"] < 1e-10
        assert len(read_rows(tmp_path / "oned-demo" / "family.csv")) == 5

    def test_parametric_without_iterations(self, runner, tmp_path):
        config = replace(get_preset("square-disk"), descent=DescentConfig(max_iters=0))
        result = runner.run(config)
        assert result.mode == ExperimentMode.PARAMETRIC
        assert result.summary["parameters"] == pytest.approx([0.25, 0.25, 0.1, 2.0])
        assert result.summary["clamped"] == 0
        rows = read_rows(tmp_path / "square-disk" / "parameters.csv")
        assert rows[0] == ["iter", "x0", "y0", "r0", "k_disk"]

    def test_parametric_needs_initial_point(self, runner):
        config = replace(get_preset("square-disk"), parametric_initial=None)
        with pytest.raises(CalderonError, match="initial"):
            runner.run(config)


def relative_difference(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b))


class TestRecoveryBehaviour:
    """End-to-end recovery properties of the preset experiments."""

    @pytest.mark.slow
    def test_constant_recovery(self, runner):
        result = runner.run(get_preset("square-constant"))
        summary = result.summary
        assert summary["iterations"] <= 50
        assert summary["final_cost"] <= 1e-3 * summary["initial_cost"]
        assert summary["k_l2_error"] < 0.02

    @pytest.mark.slow
    def test_second_measurement_converges_faster(self, runner):
        two = runner.run(get_preset("square-constant", measurements=2)).summary["iterations_to_1e-3"]
        one = runner.run(get_preset("square-constant", measurements=1)).summary["iterations_to_1e-3"]
        assert two is not None
        assert one is None or one > two

    @pytest.mark.slow
    def test_constant_recovery_independent_of_start(self, runner):
        finals = []
        for k0 in (0.5, 1.0, 4.0):
            config = get_preset("square-constant")
            config = replace(config, descent=replace(config.descent, k0=k0, max_iters=200))
            finals.append(runner.run(config).k_final)
        for i in range(3):
            for j in range(i + 1, 3):
                assert relative_difference(finals[i], finals[j]) <= 0.01

    @pytest.mark.slow
    def test_disk_parameters_fit_boundary_not_interior(self, runner):
        result = runner.run(get_preset("square-disk"))
        summary = result.summary
        x0, y0, _, _ = summary["parameters"]
        assert summary["termination"] in ("parameter change below eps_r", "step below eps_r")
        assert summary["final_cost"] <= 1e-4 * summary["initial_cost"]
        assert np.hypot(x0 - 0.5, y0 - 0.5) < 0.05
        assert summary["flux_error"] < 0.01
        assert summary["k_l2_error"] > 0.10

    @pytest.mark.slow
    def test_gaussian_fits_flux_before_conductivity(self, runner):
        full = runner.run(get_preset("square-gaussian")).summary
        regions = runner.run(replace(get_preset("square-gaussian"), dofs=(5, 5))).summary
        assert full["flux_error"] < 0.05
        assert full["k_l2_error"] > 0.10
        assert regions["k_l2_error"] <= full["k_l2_error"]

    @pytest.mark.slow
    def test_cube_region_and_element_paths_agree(self, runner):
        base = get_preset("cube-gaussian")
        fd_config = replace(
            base, dofs=(5, 5, 5), descent=replace(base.descent, gradient_mode=GradientMode.FD)
        )
        fd = runner.run(fd_config)
        full = runner.run(base)
        for result in (fd, full):
            assert result.summary["flux_error"] <= 0.1 * result.history.flux_error[0]

        problem = runner.prepare(fd_config)
        full_regions = region_average(problem.geom, full.k_final, problem.regions)
        assert relative_difference(full_regions, fd.summary["region_k"]) <= 0.05


class TestOutputDirectory:
    def test_environment_beats_config(self, tmp_path, monkeypatch, small_config):
        monkeypatch.setenv("CALDERON_OUTPUT_DIR", str(tmp_path / "env"))
        config = replace(small_config, output_dir=str(tmp_path / "cfg"), descent=DescentConfig(max_iters=0))
        result = ExperimentRunner().run(config)
        assert Path(result.output_dir) == tmp_path / "env" / "small-gaussian"

    def test_explicit_beats_environment(self, tmp_path, monkeypatch, small_config):
        monkeypatch.setenv("CALDERON_OUTPUT_DIR", str(tmp_path / "env"))
        config = replace(small_config, descent=DescentConfig(max_iters=0))
        result = ExperimentRunner(output_dir=str(tmp_path / "cli")).run(config)
        assert Path(result.output_dir) == tmp_path / "cli" / "small-gaussian"

    def test_config_used_without_environment(self, tmp_path, monkeypatch, small_config):
        monkeypatch.delenv("CALDERON_OUTPUT_DIR", raising=False)
        config = replace(small_config, output_dir=str(tmp_path / "cfg"), descent=DescentConfig(max_iters=0))
        result = ExperimentRunner().run(config)
        assert Path(result.output_dir) == tmp_path / "cfg" / "small-gaussian"


def test_run_config_file(tmp_path, project_root):
    path = project_root / "tests" / "fixtures" / "valid_configs" / "basic.conf"
    result = ExperimentRunner.run_config_file(str(path), output_dir=str(tmp_path))
    assert result.name == "basic-gaussian"
    assert (tmp_path / "basic-gaussian" / "snapshots" / "k_0000.vtk").exists()
