"""
High-level experiment interface.

This module provides the ExperimentRunner class, the primary entry point for
running complete experiments: it builds the mesh and target, synthesizes the
measurements, runs the requested optimizer or check, and writes every
artifact (CSV histories, VTK snapshots, flux tables) to the output directory.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .adjoint import Measurement, fd_element_gradient, gradient_relative_error, total_gradient
from .analytic1d import boundary_data, fem_boundary_data, nonuniqueness_family, reference_profiles, resistance
from .config import ExperimentConfig, ExperimentMode, SolverConfig
from .constants import CalderonConstants
from .exceptions import CalderonError, SolverError
from .inversion import (
    ConvergenceHistory,
    build_measurement,
    build_target,
    fd_gradient_regions,
    insulated_face_mask,
    run_descent,
    run_parametric_disk,
    three_region_boundary,
)
from .mesh import ElementGeometry, SimplexMesh, compute_geometry, generate_box_mesh
from .parser import ExperimentConfigParser
from .regularization import RegionMap, build_region_map, project_gradient, region_average
from .solver import DirichletData, FieldSolver, boundary_normal_flux
from .writers import CSVWriter, MeshWriter, VTKWriter
from .writers.utils import ensure_dir, resolve_output_dir

BOUNDARY_FUNCTIONS = {"three-region": three_region_boundary}


@dataclass
class Problem:
    """Mesh, target and measurements of one experiment."""

    mesh: SimplexMesh
    geom: ElementGeometry
    solver: FieldSolver
    k_target: np.ndarray
    measurements: List[Measurement]
    regions: Optional[RegionMap] = None


@dataclass
class ExperimentResult:
    """Outcome of one experiment run."""

    name: str
    mode: ExperimentMode
    output_dir: str
    artifacts: List[str] = field(default_factory=list)
    history: Optional[ConvergenceHistory] = None
    k_final: Optional[np.ndarray] = None
    k_target: Optional[np.ndarray] = None
    parameters: Optional[np.ndarray] = None
    summary: Dict[str, object] = field(default_factory=dict)


@dataclass
class GradcheckReport:
    """Adjoint versus finite-difference comparison."""

    ids: np.ndarray
    adjoint: np.ndarray
    fd: np.ndarray
    rel_error: np.ndarray
    threshold: float
    artifacts: List[str] = field(default_factory=list)

    @property
    def max_error(self) -> float:
        return float(np.max(self.rel_error)) if self.rel_error.size else 0.0

    @property
    def passed(self) -> bool:
        return self.max_error <= self.threshold


class ExperimentRunner:
    """Runs configured experiments and writes their artifacts.

    The runner owns the library logger "calderon" and never configures the
    host application's logging beyond adding a NullHandler.
    """

    VERSION = "pycalderon 1.0.0"

    def __init__(
        self,
        log_level: str = "WARNING",
        output_dir: Optional[str] = None,
        max_workers: Optional[int] = None,
    ):
        # Create library-specific logger that doesn't interfere with calling app
        self.logger = logging.getLogger("calderon")
        self.logger.setLevel(getattr(logging, log_level.upper(), logging.WARNING))

        # Only add NullHandler if no handlers exist (prevents duplicate handlers)
        if not self.logger.handlers:
            self.logger.addHandler(logging.NullHandler())

        self.output_dir = output_dir
        self.max_workers = max_workers
        self.parser = ExperimentConfigParser()
        self.mesh_writer = MeshWriter(self.logger)
        self.vtk_writer = VTKWriter(self.logger)
        self.csv_writer = CSVWriter(self.logger)

    def _output_dir(self, config: ExperimentConfig) -> str:
        path = resolve_output_dir(self.output_dir, config.output_dir)
        return ensure_dir(os.path.join(path, config.name))

    def prepare(self, config: ExperimentConfig, solver_config: Optional[SolverConfig] = None) -> Problem:
        """Build mesh, geometry, target conductivity and measurements."""
        domain = config.domain
        mesh = generate_box_mesh(domain.lower, domain.upper, domain.divisions)
        geom = compute_geometry(mesh)
        solver = FieldSolver(mesh, geom, solver_config or config.solver)
        k_target = build_target(mesh, geom, config.target)
        mask = insulated_face_mask(mesh, domain.insulated_axes)
        if mesh.interior_nodes.size == 0:
            self.logger.warning(
                "Mesh has no interior nodes; fluxes do not depend on the conductivity"
            )
        measurements = [
            build_measurement(mesh, geom, k_target, spec, solver, face_weights=mask)
            for spec in config.measurements
        ]
        regions = build_region_map(mesh, geom, config.dofs) if config.dofs else None
        self.logger.info(
            "Prepared '%s': %d elements, %d measurements, %s design variables",
            config.name, mesh.n_elements, len(measurements),
            regions.n_regions if regions else mesh.n_elements,
        )
        return Problem(mesh, geom, solver, k_target, measurements, regions)

    def generate_mesh(self, lower, upper, divisions, path: str) -> SimplexMesh:
        """Write a structured box mesh in the text mesh format."""
        mesh = generate_box_mesh(lower, upper, divisions)
        compute_geometry(mesh)
        self.mesh_writer.write(mesh, path)
        self.logger.info(
            "Wrote %d-D mesh to %s: %d nodes, %d elements, %d boundary faces",
            mesh.dim, path, mesh.n_nodes, mesh.n_elements, mesh.n_faces,
        )
        return mesh

    def run(self, config: ExperimentConfig) -> ExperimentResult:
        """Run an experiment according to its mode."""
        handlers = {
            ExperimentMode.FORWARD: self.run_forward,
            ExperimentMode.DESCENT: self.run_descent,
            ExperimentMode.PARAMETRIC: self.run_parametric,
            ExperimentMode.ONED: self.run_oned,
        }
        self.logger.info("Running experiment '%s' (%s)", config.name, config.mode.value)
        return handlers[config.mode](config)

    # Artifact helpers

    def _write_fields(self, result: ExperimentResult, problem: Problem, k, prefix: str) -> None:
        """Per-measurement u snapshots and flux tables at conductivity k."""
        mesh, geom = problem.mesh, problem.geom
        for m in problem.measurements:
            u = problem.solver.solve(k, m.dirichlet)
            path = os.path.join(result.output_dir, f"{prefix}_u_m{m.id}.vtk")
            self.vtk_writer.write(path, mesh, point_data={"u": u}, cell_data={"k": k})
            result.artifacts.append(path)
            fluxes = {
                "target_flux": m.target_flux,
                "flux": boundary_normal_flux(mesh, geom, k, u),
                "element_flux": boundary_normal_flux(mesh, geom, k, u, method="element"),
            }
            path = os.path.join(result.output_dir, f"{prefix}_flux_m{m.id}.csv")
            self.csv_writer.write_fluxes(path, mesh, fluxes)
            result.artifacts.append(path)

    def _write_history(self, result: ExperimentResult, history: ConvergenceHistory) -> None:
        path = os.path.join(result.output_dir, "history.csv")
        self.csv_writer.write_history(path, history)
        result.artifacts.append(path)
        if history.parameters:
            path = os.path.join(result.output_dir, "parameters.csv")
            self.csv_writer.write_parameters(path, history)
            result.artifacts.append(path)

    def _summarize(self, result: ExperimentResult, history: ConvergenceHistory) -> None:
        result.summary.update(
            iterations=len(history) - 1,
            termination=history.termination,
            initial_cost=history.cost[0],
            final_cost=history.cost[-1],
            flux_error=history.flux_error[-1],
            k_l2_error=history.k_l2_error[-1],
        )
        reached = [i for i, c in zip(history.iterations, history.cost) if c <= 1e-3 * history.cost[0]]
        result.summary["iterations_to_1e-3"] = reached[0] if reached else None

    # Modes

    def run_forward(self, config: ExperimentConfig) -> ExperimentResult:
        """Forward solves with the target conductivity."""
        result = ExperimentResult(config.name, config.mode, self._output_dir(config))
        problem = self.prepare(config)
        mesh, geom = problem.mesh, problem.geom
        if config.boundary_value:
            if config.boundary_value not in BOUNDARY_FUNCTIONS:
                raise CalderonError(f"Unknown boundary data '{config.boundary_value}'")
            bc = DirichletData.from_function(mesh, BOUNDARY_FUNCTIONS[config.boundary_value])
            u = problem.solver.solve(problem.k_target, bc)
            flux = boundary_normal_flux(mesh, geom, problem.k_target, u)
            problem.measurements.append(Measurement(id=0, dirichlet=bc, target_flux=flux))

            grad_norm = np.linalg.norm(geom.element_gradient(mesh, u), axis=1)
            far = geom.centroids[:, 0] > 2.0
            if np.any(far) and grad_norm.max() > 0:
                result.summary["far_gradient_ratio"] = float(grad_norm[far].max() / grad_norm.max())
        if not problem.measurements:
            raise CalderonError("Forward run needs measurements or boundary data")

        self._write_fields(result, problem, problem.k_target, "target")
        result.k_target = problem.k_target
        self.logger.info("Forward run '%s' wrote %d artifacts", config.name, len(result.artifacts))
        return result

    def run_descent(self, config: ExperimentConfig) -> ExperimentResult:
        """Gradient descent (adjoint or finite-difference gradients)."""
        result = ExperimentResult(config.name, config.mode, self._output_dir(config))
        problem = self.prepare(config)
        mesh, geom = problem.mesh, problem.geom
        k_initial = np.full(mesh.n_elements, config.descent.k0)
        snapshot_dir = os.path.join(result.output_dir, "snapshots")

        def snapshot(iteration, k):
            if config.snapshot_every and iteration % config.snapshot_every == 0:
                path = os.path.join(snapshot_dir, f"k_{iteration:04d}.vtk")
                self.vtk_writer.write(path, mesh, cell_data={"k": k})
                result.artifacts.append(path)

        try:
            k_final, history = run_descent(
                mesh, geom, problem.measurements, config.descent,
                k_target=problem.k_target, solver=problem.solver, regions=problem.regions,
                k_initial=k_initial, callback=snapshot, max_workers=self.max_workers,
            )
        except SolverError as e:
            self.logger.error("Descent '%s' failed: %s", config.name, e)
            if e.history is not None and len(e.history):
                self._write_history(result, e.history)
            raise

        self._write_history(result, history)
        _, gradient = total_gradient(mesh, geom, k_final, problem.measurements, problem.solver)
        path = os.path.join(result.output_dir, "conductivity.vtk")
        self.vtk_writer.write(
            path, mesh,
            cell_data={
                "k_initial": k_initial,
                "k_final": k_final,
                "k_target": problem.k_target,
                "gradient": gradient / geom.volumes,
            },
        )
        result.artifacts.append(path)
        self._write_fields(result, problem, k_final, "final")

        result.history = history
        result.k_final = k_final
        result.k_target = problem.k_target
        self._summarize(result, history)
        if problem.regions is not None:
            result.summary["region_k"] = region_average(geom, k_final, problem.regions).tolist()
        self.logger.info(
            "Descent '%s': cost %.3e -> %.3e, flux error %.3e, k error %.3e",
            config.name, history.cost[0], history.cost[-1],
            history.flux_error[-1], history.k_l2_error[-1],
        )
        return result

    def run_parametric(self, config: ExperimentConfig) -> ExperimentResult:
        """Four-parameter disk fit."""
        result = ExperimentResult(config.name, config.mode, self._output_dir(config))
        problem = self.prepare(config)
        initial = config.parametric_initial
        if initial is None:
            raise CalderonError("Parametric run needs an initial (x0, y0, r0, k_disk)")
        try:
            params, history = run_parametric_disk(
                problem.mesh, problem.geom, problem.measurements, initial, config.descent,
                k_exte=config.target.k_exte, k_target=problem.k_target, solver=problem.solver,
            )
        except SolverError as e:
            self.logger.error("Parametric run '%s' failed: %s", config.name, e)
            if e.history is not None and len(e.history):
                self._write_history(result, e.history)
            raise

        self._write_history(result, history)
        result.history = history
        result.parameters = params
        result.k_target = problem.k_target
        self._summarize(result, history)
        result.summary["parameters"] = [float(p) for p in params]
        result.summary["clamped"] = len(history.clamped)

        target = config.target
        if params[2] > target.radius and params[3] < target.k_disk:
            self.logger.info(
                "Recovered radius %.4f exceeds %.4f while k_disk %.4f is below %.4f",
                params[2], target.radius, params[3], target.k_disk,
            )
        return result

    def run_oned(self, config: ExperimentConfig) -> ExperimentResult:
        """1-D non-uniqueness demo: fixed profiles plus one random family member."""
        result = ExperimentResult(config.name, config.mode, self._output_dir(config))
        profiles = dict(reference_profiles())
        target_resistance = resistance(profiles["a"])
        profiles["random"] = nonuniqueness_family(target_resistance, 4, seed=config.seed)

        rows = []
        worst = 0.0
        for name, profile in profiles.items():
            f_c, u = boundary_data(profile, 1.0, 0.0)
            f_fem, u_fem = fem_boundary_data(profile, 1.0, 0.0)
            worst = max(worst, float(np.max(np.abs(u - u_fem))), abs(f_c - f_fem))
            rows.append([
                name,
                ";".join(repr(float(v)) for v in profile.values),
                repr(resistance(profile)),
                repr(f_c),
                ";".join(repr(float(v)) for v in u),
            ])
        path = os.path.join(result.output_dir, "family.csv")
        self.csv_writer.write_family(path, rows)
        result.artifacts.append(path)
        result.summary.update(resistance=target_resistance, fem_max_deviation=worst, rows=rows)
        self.logger.info("1-D demo: %d profiles, FEM deviation %.3e", len(rows), worst)
        return result

    def gradcheck(
        self,
        config: ExperimentConfig,
        samples: int = CalderonConstants.GRADCHECK_SAMPLES,
        threshold: float = CalderonConstants.GRADCHECK_THRESHOLD,
        corrupt: bool = False,
    ) -> GradcheckReport:
        """Compare adjoint gradients with central finite differences.

        The check runs at a random positive conductivity drawn from the
        configured seed. With a region lattice configured the projected
        adjoint gradient is compared with region finite differences instead.

        Args:
            corrupt: Scale the adjoint gradient by 1.1 (test hook)
        """
        if config.mode in (ExperimentMode.ONED, ExperimentMode.FORWARD) or not config.measurements:
            raise CalderonError("Gradient check needs an experiment with measurements")
        out = self._output_dir(config)
        direct = SolverConfig(method="direct")
        problem = self.prepare(config, solver_config=direct)
        mesh, geom = problem.mesh, problem.geom
        rng = np.random.default_rng(config.seed)
        k = config.descent.k0 * rng.uniform(0.5, 1.5, size=mesh.n_elements)

        _, gradient = total_gradient(mesh, geom, k, problem.measurements, problem.solver)
        if problem.regions is not None:
            ids = np.arange(problem.regions.n_regions)
            adjoint = project_gradient(mesh, geom, gradient, problem.regions) * problem.regions.region_volumes
            fd = fd_gradient_regions(mesh, geom, k, problem.regions, problem.measurements, solver=problem.solver)
            id_column = "region_id"
        else:
            count = min(samples, mesh.n_elements)
            ids = np.sort(rng.choice(mesh.n_elements, size=count, replace=False))
            adjoint = gradient[ids]
            fd = fd_element_gradient(mesh, geom, k, problem.measurements, ids, solver=problem.solver)
            id_column = "element_id"
        if corrupt:
            adjoint = adjoint * 1.1

        floor = CalderonConstants.GRADCHECK_FLOOR * float(np.max(np.abs(gradient)))
        rel_error = gradient_relative_error(adjoint, fd, floor=floor)
        path = os.path.join(out, "gradcheck.csv")
        self.csv_writer.write_gradcheck(path, ids, adjoint, fd, rel_error, id_column=id_column)
        report = GradcheckReport(ids, adjoint, fd, rel_error, threshold, [path])
        level = logging.INFO if report.passed else logging.ERROR
        self.logger.log(
            level, "Gradient check: max relative error %.3e (threshold %.1e)", report.max_error, threshold
        )
        return report

    @classmethod
    def run_config_file(
        cls, filename: str, log_level: str = "WARNING", output_dir: Optional[str] = None
    ) -> ExperimentResult:
        """Parse a configuration file and run it in one call."""
        runner = cls(log_level=log_level, output_dir=output_dir)
        config = runner.parser.parse_config_file(filename)
        return runner.run(config)

