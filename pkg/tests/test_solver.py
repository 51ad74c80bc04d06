"""
Tests for stiffness assembly, Dirichlet solves and boundary flux recovery.
"""

from unittest.mock import patch

import numpy as np
import pytest

from calderon.config import SolverConfig
from calderon.exceptions import CalderonError, SolverError
from calderon.mesh import compute_geometry, generate_box_mesh
from calderon.solver import (
    DirichletData,
    FieldSolver,
    assemble_stiffness,
    boundary_normal_flux,
    solve_forward,
    solve_spd,
)


def affine(points):
    return 1.0 + 2.0 * points[:, 0] - points[:, 1]


class TestAssembly:
    def test_stiffness_is_symmetric_with_zero_row_sums(self, square_mesh, square_geom):
        k = np.linspace(1.0, 3.0, square_mesh.n_elements)
        A = assemble_stiffness(square_mesh, square_geom, k)
        assert abs(A - A.T).max() < 1e-12
        assert np.allclose(A @ np.ones(square_mesh.n_nodes), 0.0)

    def test_rejects_non_positive_conductivity(self, square_mesh, square_geom):
        k = np.ones(square_mesh.n_elements)
        k[3] = 0.0
        with pytest.raises(CalderonError, match="element 3"):
            assemble_stiffness(square_mesh, square_geom, k)

    def test_rejects_wrong_length(self, square_mesh, square_geom):
        with pytest.raises(CalderonError, match="32 elements"):
            assemble_stiffness(square_mesh, square_geom, np.ones(5))


class TestDirichletSolve:
    @pytest.mark.parametrize("method", ["cg", "direct"])
    def test_affine_solution_is_exact(self, square_mesh, square_geom, method):
        solver = FieldSolver(square_mesh, square_geom, SolverConfig(method=method))
        bc = DirichletData.from_function(square_mesh, affine)
        u = solver.solve(np.full(square_mesh.n_elements, 3.0), bc)
        assert np.max(np.abs(u - affine(square_mesh.nodes))) < 1e-10

    def test_affine_solution_in_tetrahedra(self):
        mesh = generate_box_mesh((0, 0, 0), (1, 1, 1), (3, 3, 3))
        geom = compute_geometry(mesh)
        bc = DirichletData.from_function(mesh, lambda p: p[:, 0] + 2 * p[:, 1] - p[:, 2])
        u = solve_forward(mesh, geom, np.full(mesh.n_elements, 0.5), bc)
        expected = mesh.nodes[:, 0] + 2 * mesh.nodes[:, 1] - mesh.nodes[:, 2]
        assert np.max(np.abs(u - expected)) < 1e-10

    def test_two_segment_bar(self):
        mesh = generate_box_mesh((0.0,), (1.0,), (2,))
        geom = compute_geometry(mesh)
        nodal = np.array([1.0, 0.0, 0.0])
        solver = FieldSolver(mesh, geom, SolverConfig(method="direct"))
        u = solver.solve(np.array([1.0, 3.0]), DirichletData.from_nodal(mesh, nodal))
        assert u == pytest.approx([1.0, 0.25, 0.0])

    def test_solution_scales_with_boundary_data(self, fine_mesh, fine_geom, direct_solver):
        k = 1.0 + fine_geom.centroids[:, 0]
        bc = DirichletData.from_function(fine_mesh, lambda p: np.sin(3 * p[:, 0]) + p[:, 1] ** 2)
        u = direct_solver.solve(k, bc)
        doubled = direct_solver.solve(k, DirichletData(bc.nodes, 2.0 * bc.values))
        assert np.allclose(doubled, 2.0 * u)

    def test_counts_solves(self, square_mesh, square_geom):
        solver = FieldSolver(square_mesh, square_geom)
        bc = DirichletData.from_function(square_mesh, affine)
        k = np.ones(square_mesh.n_elements)
        solver.solve(k, bc)
        solver.solve(k, bc)
        assert solver.solve_count == 2

    def test_dirichlet_data_must_cover_boundary(self, square_mesh, square_geom):
        solver = FieldSolver(square_mesh, square_geom)
        nodes = square_mesh.boundary_nodes[:-1]
        bc = DirichletData(nodes, np.zeros(nodes.size))
        with pytest.raises(CalderonError, match="boundary nodes"):
            solver.solve(np.ones(square_mesh.n_elements), bc)

    def test_dirichlet_data_validation(self):
        with pytest.raises(ValueError):
            DirichletData(np.array([0, 1]), np.array([0.0]))
        with pytest.raises(ValueError):
            DirichletData(np.array([0]), np.array([np.nan]))

    def test_cg_failure_raises_solver_error(self, square_mesh, square_geom):
        solver = FieldSolver(square_mesh, square_geom)
        bc = DirichletData.from_function(square_mesh, affine)
        n_free = square_mesh.interior_nodes.size
        with patch("calderon.solver.cg", return_value=(np.zeros(n_free), 90)):
            with pytest.raises(SolverError) as exc_info:
                solver.solve(np.ones(square_mesh.n_elements), bc)
        assert exc_info.value.code.value == 2

    def test_cg_and_direct_agree(self, fine_mesh, fine_geom):
        k = 1.0 + fine_geom.centroids[:, 1] ** 2
        A = assemble_stiffness(fine_mesh, fine_geom, k)
        free = fine_mesh.interior_nodes
        A_ff = A[free][:, free]
        b = np.linspace(-1.0, 1.0, free.size)
        x_cg = solve_spd(A_ff, b, SolverConfig(method="cg"))
        x_lu = solve_spd(A_ff, b, SolverConfig(method="direct"))
        assert np.allclose(x_cg, x_lu, atol=1e-9)


class TestBoundaryFlux:
    def test_element_flux_of_affine_field(self, square_mesh, square_geom):
        u = affine(square_mesh.nodes)
        k = np.full(square_mesh.n_elements, 3.0)
        flux = boundary_normal_flux(square_mesh, square_geom, k, u, method="element")
        expected = 3.0 * square_mesh.face_normals @ np.array([2.0, -1.0])
        assert np.allclose(flux, expected)

    def test_consistent_flux_matches_away_from_corners(self, square_mesh, square_geom):
        u = affine(square_mesh.nodes)
        k = np.full(square_mesh.n_elements, 3.0)
        consistent = boundary_normal_flux(square_mesh, square_geom, k, u)
        element = boundary_normal_flux(square_mesh, square_geom, k, u, method="element")
        on_side = np.isclose(square_mesh.nodes, 0.0) | np.isclose(square_mesh.nodes, 1.0)
        corners = set(np.flatnonzero(on_side.all(axis=1)).tolist())
        away = [f for f, nodes in enumerate(square_mesh.face_nodes) if not corners & set(nodes.tolist())]
        assert len(away) == 8
        assert np.allclose(consistent[away], element[away], atol=1e-10)

    def test_consistent_flux_is_conservative(self, fine_mesh, fine_geom, direct_solver):
        k = 1.0 + 3.0 * fine_geom.centroids[:, 0]
        bc = DirichletData.from_function(fine_mesh, lambda p: np.exp(p[:, 0]) * np.cos(p[:, 1]))
        u = direct_solver.solve(k, bc)
        flux = direct_solver.flux(k, u)
        assert abs(np.sum(flux * fine_mesh.face_measures)) < 1e-10

    def test_unknown_method(self, square_mesh, square_geom):
        with pytest.raises(CalderonError, match="Unknown flux method"):
            boundary_normal_flux(
                square_mesh, square_geom, np.ones(32), np.zeros(25), method="patch"
            )

    def test_nodal_length_checked(self, square_mesh, square_geom):
        with pytest.raises(CalderonError, match="25 nodes"):
            boundary_normal_flux(square_mesh, square_geom, np.ones(32), np.zeros(24))
