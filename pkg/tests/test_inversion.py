"""
Tests for targets, measurement synthesis, error norms and the optimizers.
"""

import numpy as np
import pytest

from calderon.adjoint import total_gradient
from calderon.config import DescentConfig, GradientMode, SolverConfig, Source, TargetKind, TargetSpec
from calderon.exceptions import CalderonError, SolverError
from calderon.inversion import (
    ConvergenceHistory,
    DescentDriver,
    build_measurement,
    build_target,
    disk_conductivity,
    fd_gradient_regions,
    flux_error_norm,
    insulated_face_mask,
    k_l2_error,
    run_descent,
    run_parametric_disk,
    source_field,
    three_region_boundary,
)
from calderon.mesh import compute_geometry, generate_box_mesh
from calderon.regularization import build_region_map, project_gradient
from calderon.solver import FieldSolver

from conftest import source_specs


class TestTargets:
    def test_constant(self, square_mesh, square_geom):
        k = build_target(square_mesh, square_geom, TargetSpec(kind=TargetKind.CONSTANT, value=3.0))
        assert np.all(k == 3.0)

    def test_linear(self, square_mesh, square_geom):
        spec = TargetSpec(kind=TargetKind.LINEAR, intercept=2.0, slope=1.0)
        k = build_target(square_mesh, square_geom, spec)
        assert np.allclose(k, 2.0 - square_geom.centroids[:, 0])

    def test_linear_must_stay_positive(self, square_mesh, square_geom):
        spec = TargetSpec(kind=TargetKind.LINEAR, intercept=0.5, slope=1.0)
        with pytest.raises(CalderonError, match="not positive"):
            build_target(square_mesh, square_geom, spec)

    def test_gaussian_peaks_at_center(self, fine_mesh, fine_geom):
        spec = TargetSpec(kind=TargetKind.GAUSSIAN, center=(0.5, 0.5), radius=0.2, amplitude=4.0, base=1.0)
        k = build_target(fine_mesh, fine_geom, spec)
        nearest = np.argmin(np.linalg.norm(fine_geom.centroids - 0.5, axis=1))
        assert k[nearest] == k.max()
        assert k.min() > 1.0
        assert k.max() < 5.0

    def test_disk_inside_and_outside(self, fine_mesh, fine_geom):
        k = disk_conductivity(fine_geom, (0.5, 0.5), 0.25, 5.0, 1.0)
        dist = np.linalg.norm(fine_geom.centroids - 0.5, axis=1)
        assert np.all(k[dist < 0.25 - fine_geom.sizes] == 5.0)
        assert np.all(k[dist > 0.25 + fine_geom.sizes] == 1.0)
        assert np.all((k >= 1.0) & (k <= 5.0))

    def test_disk_is_continuous_in_radius(self, fine_geom):
        small = disk_conductivity(fine_geom, (0.5, 0.5), 0.25, 5.0)
        large = disk_conductivity(fine_geom, (0.5, 0.5), 0.25 + 1e-6, 5.0)
        assert np.max(np.abs(large - small)) < 1e-4

    def test_disk_target_has_a_sharp_edge(self, fine_mesh, fine_geom):
        spec = TargetSpec(kind=TargetKind.DISK, center=(0.5, 0.5), radius=0.25, k_disk=5.0, k_exte=1.0)
        k = build_target(fine_mesh, fine_geom, spec)
        dist = np.linalg.norm(fine_geom.centroids - 0.5, axis=1)
        assert np.array_equal(k, np.where(dist <= 0.25, 5.0, 1.0))

    def test_disk_needs_two_dimensions(self):
        mesh = generate_box_mesh((0.0,), (1.0,), (4,))
        geom = compute_geometry(mesh)
        with pytest.raises(CalderonError):
            build_target(mesh, geom, TargetSpec(kind=TargetKind.DISK))

    def test_three_region(self):
        mesh = generate_box_mesh((0, 0), (3, 1), (6, 2))
        geom = compute_geometry(mesh)
        k = build_target(mesh, geom, TargetSpec(kind=TargetKind.THREE_REGION_2D))
        x = geom.centroids[:, 0]
        assert np.all(k[(x > 1) & (x < 2)] == 10.1)
        assert np.all(k[(x < 1) | (x > 2)] == 1.0)


class TestMeasurements:
    def test_source_field_at_center(self):
        sources = [Source(center=(0.5, 0.0), radius=0.5, amplitude=2.0)]
        assert source_field([[0.5, 0.0]], sources)[0] == pytest.approx(2.0)
        assert source_field([[0.5, 0.5]], sources)[0] == pytest.approx(2.0 * np.exp(-1.0))

    def test_short_center_on_slab(self):
        sources = [Source(center=(0.5, 0.0), radius=0.5)]
        values = source_field([[0.5, 0.0, 0.0], [0.5, 0.0, 0.05]], sources)
        assert values[0] == values[1] == pytest.approx(1.0)

    def test_long_center_rejected(self):
        with pytest.raises(CalderonError, match="more coordinates"):
            source_field([[0.0, 0.0]], [Source(center=(0.0, 0.0, 0.0))])

    def test_three_region_boundary(self):
        values = three_region_boundary([[0.0, 1.0], [1.0, 0.0], [2.5, 1.0]])
        assert values.tolist() == [0.5, 0.0, 0.0]

    def test_insulated_mask_on_slab(self):
        mesh = generate_box_mesh((0, 0, 0), (1, 1, 0.05), (4, 4, 1))
        mask = insulated_face_mask(mesh, (2,))
        assert np.sum(mask * mesh.face_measures) == pytest.approx(0.2)
        assert insulated_face_mask(mesh, ()) is None

    def test_measurement_flux_is_conservative(self, fine_mesh, fine_geom, constant_measurements):
        for m in constant_measurements:
            assert abs(np.sum(m.target_flux * fine_mesh.face_measures)) < 1e-10
            assert np.array_equal(m.dirichlet.nodes, fine_mesh.boundary_nodes)

    def test_custom_boundary_function(self, fine_mesh, fine_geom, direct_solver):
        spec = source_specs(1)[0]
        m = build_measurement(
            fine_mesh, fine_geom, np.ones(fine_mesh.n_elements), spec, direct_solver,
            boundary=lambda p: p[:, 0],
        )
        # u = x with k = 1 gives flux n_x on every face
        right = (fine_mesh.face_normals[:, 0] > 0.5) & (np.abs(fine_mesh.face_centroids[:, 1] - 0.5) < 0.4)
        assert right.sum() == 6
        assert np.allclose(m.target_flux[right], 1.0)


class TestErrorNorms:
    def test_flux_error(self, square_mesh):
        target = np.linspace(1.0, 2.0, square_mesh.n_faces)
        assert flux_error_norm(target, target, square_mesh) == 0.0
        assert flux_error_norm(np.zeros_like(target), target, square_mesh) == pytest.approx(1.0)

    def test_flux_error_over_measurements(self, square_mesh):
        target = np.ones(square_mesh.n_faces)
        err = flux_error_norm([target, np.zeros_like(target)], [target, target], square_mesh)
        assert err == pytest.approx(np.sqrt(0.5))

    def test_zero_target_flux(self, square_mesh):
        zeros = np.zeros(square_mesh.n_faces)
        with pytest.raises(CalderonError, match="all-zero"):
            flux_error_norm(zeros, zeros, square_mesh)

    def test_k_error(self, square_geom):
        target = np.full(square_geom.volumes.size, 2.0)
        assert k_l2_error(target, target, square_geom) == 0.0
        assert k_l2_error(2 * target, target, square_geom) == pytest.approx(1.0)
        with pytest.raises(CalderonError):
            k_l2_error(target[:3], target, square_geom)


class TestFiniteDifferenceRegions:
    def test_matches_projected_adjoint(self, fine_mesh, fine_geom, direct_solver, constant_measurements):
        k = 1.0 + 0.5 * fine_geom.centroids[:, 0]
        regions = build_region_map(fine_mesh, fine_geom, (2, 2))
        _, grad = total_gradient(fine_mesh, fine_geom, k, constant_measurements, direct_solver)
        projected = project_gradient(fine_mesh, fine_geom, grad, regions) * regions.region_volumes
        fd = fd_gradient_regions(fine_mesh, fine_geom, k, regions, constant_measurements, solver=direct_solver)
        assert np.allclose(fd, projected, rtol=1e-4, atol=1e-8 * np.max(np.abs(projected)))

    def test_five_by_five_lattice_matches_projected_adjoint(self):
        mesh = generate_box_mesh((0.0, 0.0), (1.0, 1.0), (10, 10))
        geom = compute_geometry(mesh)
        solver = FieldSolver(mesh, geom, SolverConfig(method="direct"))
        k_target = np.full(mesh.n_elements, 2.0)
        measurements = [build_measurement(mesh, geom, k_target, spec, solver) for spec in source_specs(2)]
        k = np.random.default_rng(2).uniform(0.5, 3.0, mesh.n_elements)
        regions = build_region_map(mesh, geom, (5, 5))
        _, grad = total_gradient(mesh, geom, k, measurements, solver)
        projected = project_gradient(mesh, geom, grad, regions) * regions.region_volumes
        fd = fd_gradient_regions(mesh, geom, k, regions, measurements, solver=solver)
        assert fd.shape == (25,)
        assert np.allclose(fd, projected, rtol=1e-4, atol=1e-6 * np.max(np.abs(projected)))

    def test_solve_count(self, fine_mesh, fine_geom, constant_measurements):
        regions = build_region_map(fine_mesh, fine_geom, (2, 2))
        solver = FieldSolver(fine_mesh, fine_geom, SolverConfig(method="direct"))
        fd_gradient_regions(
            fine_mesh, fine_geom, np.ones(fine_mesh.n_elements), regions, constant_measurements, solver=solver
        )
        assert solver.solve_count == 2 * 4 * 2

    def test_step_must_be_positive(self, fine_mesh, fine_geom, constant_measurements):
        regions = build_region_map(fine_mesh, fine_geom, (2, 2))
        with pytest.raises(CalderonError):
            fd_gradient_regions(
                fine_mesh, fine_geom, np.ones(fine_mesh.n_elements), regions, constant_measurements, step=0.0
            )


class TestDescent:
    def test_stops_at_target(self, fine_mesh, fine_geom, direct_solver, constant_measurements):
        config = DescentConfig(k0=2.0, max_iters=5)
        k, history = run_descent(fine_mesh, fine_geom, constant_measurements, config, solver=direct_solver)
        assert history.termination == "cost threshold"
        assert len(history) == 1
        assert np.all(k == 2.0)

    def test_cost_decreases(self, fine_mesh, fine_geom, direct_solver, constant_measurements):
        config = DescentConfig(k0=1.0, max_iters=4, alpha=2.0)
        k_target = np.full(fine_mesh.n_elements, 2.0)
        seen = []
        k, history = run_descent(
            fine_mesh, fine_geom, constant_measurements, config, k_target=k_target,
            solver=direct_solver, callback=lambda i, field: seen.append(i),
        )
        assert history.iterations[0] == 0
        assert seen == history.iterations
        assert all(b < a for a, b in zip(history.cost, history.cost[1:]))
        assert history.final_cost < history.cost[0]
        assert history.alpha[0] == 0.0
        assert all(e is not None for e in history.k_l2_error)
        assert np.all(k >= config.k_min)

    @pytest.mark.parametrize("growth", [1.0, 2.0])
    def test_step_grows_after_acceptance(self, fine_mesh, fine_geom, direct_solver, constant_measurements, growth):
        tried = []

        class RecordingDriver(DescentDriver):
            def _line_search(self, k, direction, cost, alpha):
                tried.append(alpha)
                return super()._line_search(k, direction, cost, alpha)

        config = DescentConfig(k0=1.0, max_iters=4, alpha=2.0, alpha_growth=growth)
        driver = RecordingDriver(fine_mesh, fine_geom, constant_measurements, config, solver=direct_solver)
        _, history = driver.run()
        assert tried[0] == 2.0
        assert len(tried) >= len(history) - 1
        for accepted, next_try in zip(history.alpha[1:], tried[1:]):
            assert next_try == min(growth * accepted, config.alpha)

    def test_max_iters_zero(self, fine_mesh, fine_geom, direct_solver, constant_measurements):
        _, history = run_descent(
            fine_mesh, fine_geom, constant_measurements, DescentConfig(max_iters=0), solver=direct_solver
        )
        assert len(history) == 1
        assert history.termination == "max_iters"

    def test_region_descent_keeps_regions_constant(self, fine_mesh, fine_geom, direct_solver, constant_measurements):
        regions = build_region_map(fine_mesh, fine_geom, (2, 2))
        config = DescentConfig(k0=1.0, max_iters=2, gradient_mode=GradientMode.FD)
        k, history = run_descent(
            fine_mesh, fine_geom, constant_measurements, config, solver=direct_solver, regions=regions
        )
        for _, mask in regions.masks():
            assert np.unique(k[mask]).size == 1
        assert history.final_cost <= history.cost[0]

    def test_fd_mode_needs_regions(self, fine_mesh, fine_geom, constant_measurements):
        with pytest.raises(CalderonError, match="region lattice"):
            DescentDriver(fine_mesh, fine_geom, constant_measurements, DescentConfig(gradient_mode=GradientMode.FD))

    def test_needs_measurements(self, fine_mesh, fine_geom):
        with pytest.raises(CalderonError, match="at least one measurement"):
            DescentDriver(fine_mesh, fine_geom, [], DescentConfig())

    def test_update_clamps(self, fine_mesh, fine_geom, constant_measurements):
        driver = DescentDriver(fine_mesh, fine_geom, constant_measurements, DescentConfig(k_min=0.1))
        k = driver.update(np.ones(fine_mesh.n_elements), np.full(fine_mesh.n_elements, 10.0), 1.0)
        assert np.all(k == 0.1)

    def test_solver_failure_keeps_partial_history(self, fine_mesh, fine_geom, constant_measurements):
        class FlakySolver(FieldSolver):
            def solve_dirichlet(self, A, bc, x0=None):
                # Initial evaluation: one forward and one adjoint solve per measurement
                if self.solve_count >= 4:
                    raise SolverError("CG did not converge", residual=1.0, iterations=10)
                return super().solve_dirichlet(A, bc, x0)

        solver = FlakySolver(fine_mesh, fine_geom, SolverConfig(method="direct"))
        with pytest.raises(SolverError) as exc_info:
            run_descent(fine_mesh, fine_geom, constant_measurements, DescentConfig(), solver=solver)
        assert len(exc_info.value.history) == 1


class TestParametricDisk:
    @pytest.fixture
    def disk_measurements(self, fine_mesh, fine_geom, direct_solver):
        k_target = disk_conductivity(fine_geom, (0.5, 0.5), 0.25, 5.0)
        return k_target, [
            build_measurement(fine_mesh, fine_geom, k_target, spec, direct_solver)
            for spec in source_specs(2)
        ]

    def test_converged_at_target(self, fine_mesh, fine_geom, direct_solver, disk_measurements):
        k_target, measurements = disk_measurements
        params, history = run_parametric_disk(
            fine_mesh, fine_geom, measurements, (0.5, 0.5, 0.25, 5.0), DescentConfig(),
            k_target=k_target, solver=direct_solver,
        )
        assert history.termination == "cost threshold"
        assert history.cost[0] < 1e-16
        assert params == pytest.approx([0.5, 0.5, 0.25, 5.0])
        assert history.parameters[0] == pytest.approx((0.5, 0.5, 0.25, 5.0))

    def test_out_of_bounds_start_is_clamped(self, fine_mesh, fine_geom, direct_solver, disk_measurements):
        _, measurements = disk_measurements
        params, history = run_parametric_disk(
            fine_mesh, fine_geom, measurements, (-0.5, 0.5, 0.25, 5.0), DescentConfig(max_iters=0),
            solver=direct_solver,
        )
        assert history.clamped == [(0, "x0")]
        assert params[0] == 0.0
        assert history.termination == "max_iters"

    def test_invalid_initial_point(self, fine_mesh, fine_geom, disk_measurements):
        _, measurements = disk_measurements
        with pytest.raises(CalderonError):
            run_parametric_disk(fine_mesh, fine_geom, measurements, (0.5, 0.5, -0.1, 5.0), DescentConfig())
        with pytest.raises(CalderonError):
            run_parametric_disk(fine_mesh, fine_geom, measurements, (0.5, 0.5), DescentConfig())

    @pytest.mark.slow
    def test_improves_offset_start(self, fine_mesh, fine_geom, direct_solver, disk_measurements):
        _, measurements = disk_measurements
        _, history = run_parametric_disk(
            fine_mesh, fine_geom, measurements, (0.45, 0.55, 0.2, 4.0), DescentConfig(max_iters=5),
            solver=direct_solver,
        )
        assert history.final_cost < history.cost[0]
        assert all(b < a for a, b in zip(history.cost, history.cost[1:]))

    @pytest.mark.slow
    def test_offset_start_stops_at_eps_r(self, fine_mesh, fine_geom, direct_solver, disk_measurements):
        _, measurements = disk_measurements
        params, history = run_parametric_disk(
            fine_mesh, fine_geom, measurements, (0.4, 0.6, 0.15, 3.0), DescentConfig(max_iters=100),
            solver=direct_solver,
        )
        assert history.termination in ("parameter change below eps_r", "step below eps_r", "cost threshold")
        assert history.final_cost < 1e-3 * history.cost[0]
        assert np.hypot(params[0] - 0.5, params[1] - 0.5) < 0.05


def test_history_rows():
    history = ConvergenceHistory()
    history.record(0, 2.0, 0.5, None, 0.0)
    history.record(1, 1.0, 0.25, 0.1, 0.5)
    assert history.rows() == [(0, 2.0, 0.5, None, 0.0), (1, 1.0, 0.25, 0.1, 0.5)]
    assert history.final_cost == 1.0
    assert len(history) == 2
