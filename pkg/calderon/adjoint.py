"""
Flux-mismatch cost, adjoint solves and conductivity gradients.

The cost of one measurement is half the face-measure-weighted squared
mismatch between target and computed boundary fluxes. Its gradient with
respect to every element conductivity costs one forward and one adjoint
solve per measurement, independent of the number of elements.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import SolverConfig
from .constants import CalderonConstants
from .exceptions import CalderonError, SolverError
from .mesh import ElementGeometry, SimplexMesh
from .solver import DirichletData, FieldSolver, boundary_normal_flux, validate_conductivity

logger = logging.getLogger(__name__)


@dataclass
class Measurement:
    """One Dirichlet-to-Neumann data pair.

    Attributes:
        id: Measurement number
        dirichlet: Prescribed boundary values u0_m
        target_flux: Target normal flux f_m per boundary face
        face_weights: Optional 0/1 mask of faces included in the cost
            (None includes every face)
    """

    id: int
    dirichlet: DirichletData
    target_flux: np.ndarray
    face_weights: Optional[np.ndarray] = None

    def __post_init__(self):
        self.target_flux = np.asarray(self.target_flux, dtype=float)
        if self.face_weights is not None:
            self.face_weights = np.asarray(self.face_weights, dtype=float)
            if self.face_weights.shape != self.target_flux.shape:
                raise ValueError("face_weights must match target_flux in length")

    def weights(self, mesh: SimplexMesh) -> np.ndarray:
        """Face measure times face mask."""
        if self.face_weights is None:
            return mesh.face_measures
        return mesh.face_measures * self.face_weights


@dataclass
class MeasurementEvaluation:
    """Forward/adjoint results of one measurement at one conductivity."""

    measurement_id: int
    u: np.ndarray
    flux: np.ndarray
    cost: float
    adjoint: Optional[np.ndarray] = None
    gradient: Optional[np.ndarray] = None


def _check_flux(mesh: SimplexMesh, computed: np.ndarray, measurement: Measurement) -> np.ndarray:
    computed = np.asarray(computed, dtype=float)
    if computed.shape != (mesh.n_faces,) or measurement.target_flux.shape != (mesh.n_faces,):
        raise CalderonError(
            f"Flux length mismatch: computed {computed.size}, target "
            f"{measurement.target_flux.size}, mesh has {mesh.n_faces} boundary faces"
        )
    return computed


def evaluate_cost(mesh: SimplexMesh, computed, measurement: Measurement) -> float:
    """0.5 * sum over faces of (f_m - f_n)^2 |f| for the included faces."""
    computed = _check_flux(mesh, computed, measurement)
    mismatch = measurement.target_flux - computed
    return 0.5 * float(np.sum(measurement.weights(mesh) * mismatch ** 2))


def adjoint_boundary_values(mesh: SimplexMesh, computed, measurement: Measurement) -> DirichletData:
    """Transfer the face mismatch -(f_m - f_n) to the boundary nodes.

    Each node takes the face-measure-weighted average of the (masked)
    mismatch of its faces.
    """
    computed = _check_flux(mesh, computed, measurement)
    mismatch = -(measurement.target_flux - computed) * measurement.weights(mesh)
    dim = mesh.dim
    num = np.bincount(
        mesh.face_nodes.ravel(), weights=np.repeat(mismatch, dim), minlength=mesh.n_nodes
    )
    den = np.bincount(
        mesh.face_nodes.ravel(), weights=np.repeat(mesh.face_measures, dim), minlength=mesh.n_nodes
    )
    nodes = mesh.boundary_nodes
    return DirichletData(nodes=nodes, values=num[nodes] / den[nodes])


def solve_adjoint(
    mesh: SimplexMesh,
    geom: ElementGeometry,
    k,
    u_m,
    measurement: Measurement,
    solver: Optional[FieldSolver] = None,
    A=None,
    flux: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Solve div(k grad w) = 0 with the flux mismatch as Dirichlet data.

    Args:
        u_m: Converged forward solution for ``k`` and this measurement
        A: Pre-assembled stiffness for ``k``
        flux: Pre-computed consistent flux of ``u_m``

    Raises:
        SolverError: If the adjoint solve does not converge
    """
    solver = solver or FieldSolver(mesh, geom)
    if A is None:
        A = solver.stiffness(k)
    if flux is None:
        flux = boundary_normal_flux(mesh, geom, k, u_m, A=A)
    return solver.solve_dirichlet(A, adjoint_boundary_values(mesh, flux, measurement))


def cost_gradient(mesh: SimplexMesh, geom: ElementGeometry, u_m, adj_m) -> np.ndarray:
    """Per-element gradient g_el = V_el grad(u_m) . grad(adj_m)."""
    u_m = np.asarray(u_m, dtype=float)
    adj_m = np.asarray(adj_m, dtype=float)
    if u_m.shape != (mesh.n_nodes,) or adj_m.shape != (mesh.n_nodes,):
        raise CalderonError("Forward and adjoint fields must have one value per node")
    grad_u = geom.element_gradient(mesh, u_m)
    grad_w = geom.element_gradient(mesh, adj_m)
    return geom.volumes * np.einsum("ed,ed->e", grad_u, grad_w)


def evaluate_measurement(
    mesh: SimplexMesh,
    geom: ElementGeometry,
    k,
    measurement: Measurement,
    solver: Optional[FieldSolver] = None,
    with_gradient: bool = True,
    A=None,
) -> MeasurementEvaluation:
    """Forward solve, flux, cost and (optionally) adjoint gradient for one measurement."""
    solver = solver or FieldSolver(mesh, geom)
    if A is None:
        A = solver.stiffness(k)
    try:
        u = solver.solve_dirichlet(A, measurement.dirichlet)
        flux = boundary_normal_flux(mesh, geom, k, u, A=A)
        cost = evaluate_cost(mesh, flux, measurement)
        result = MeasurementEvaluation(measurement.id, u, flux, cost)
        if with_gradient:
            result.adjoint = solve_adjoint(mesh, geom, k, u, measurement, solver, A=A, flux=flux)
            result.gradient = cost_gradient(mesh, geom, u, result.adjoint)
    except SolverError as e:
        raise SolverError(
            f"Measurement {measurement.id}: {e}",
            residual=e.residual,
            iterations=e.iterations,
            measurement_id=measurement.id,
        ) from e
    return result


def evaluate_all(
    mesh: SimplexMesh,
    geom: ElementGeometry,
    k,
    measurements: Sequence[Measurement],
    solver: Optional[FieldSolver] = None,
    with_gradient: bool = True,
    max_workers: Optional[int] = None,
) -> List[MeasurementEvaluation]:
    """Evaluate every measurement, optionally on a thread pool.

    Results come back in measurement order whatever the worker count.
    """
    if not measurements:
        raise CalderonError("At least one measurement is required")
    k = validate_conductivity(mesh, k)
    solver = solver or FieldSolver(mesh, geom)
    A = solver.stiffness(k)

    def run(measurement):
        return evaluate_measurement(mesh, geom, k, measurement, solver, with_gradient, A=A)

    if max_workers and max_workers > 1 and len(measurements) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(run, measurements))
    return [run(m) for m in measurements]


def total_cost(
    mesh: SimplexMesh,
    geom: ElementGeometry,
    k,
    measurements: Sequence[Measurement],
    solver: Optional[FieldSolver] = None,
) -> float:
    """Sum of measurement costs using forward solves only."""
    results = evaluate_all(mesh, geom, k, measurements, solver, with_gradient=False)
    return float(sum(r.cost for r in results))


def total_gradient(
    mesh: SimplexMesh,
    geom: ElementGeometry,
    k,
    measurements: Sequence[Measurement],
    solver: Optional[FieldSolver] = None,
    max_workers: Optional[int] = None,
) -> Tuple[float, np.ndarray]:
    """Total cost and element gradient summed over measurements.

    The sum runs sequentially in measurement order so results are
    reproducible regardless of ``max_workers``.
    """
    results = evaluate_all(mesh, geom, k, measurements, solver, max_workers=max_workers)
    cost = 0.0
    grad = np.zeros(mesh.n_elements)
    for r in results:
        cost += r.cost
        grad += r.gradient
    return cost, grad


def fd_element_gradient(
    mesh: SimplexMesh,
    geom: ElementGeometry,
    k,
    measurements: Sequence[Measurement],
    elements: Sequence[int],
    rel_step: float = CalderonConstants.FD_REL_STEP,
    solver: Optional[FieldSolver] = None,
) -> np.ndarray:
    """Central finite differences of the total cost w.r.t. single element conductivities.

    Uses a direct solver unless one is supplied, so differences are not
    polluted by iterative tolerances.
    """
    if not rel_step > 0:
        raise CalderonError("Finite-difference step must be positive")
    k = validate_conductivity(mesh, k)
    solver = solver or FieldSolver(mesh, geom, SolverConfig(method="direct"))
    values = []
    for e in elements:
        h = rel_step * k[e]
        k_plus = k.copy()
        k_minus = k.copy()
        k_plus[e] += h
        k_minus[e] -= h
        c_plus = total_cost(mesh, geom, k_plus, measurements, solver)
        c_minus = total_cost(mesh, geom, k_minus, measurements, solver)
        values.append((c_plus - c_minus) / (2.0 * h))
    logger.debug("Finite-difference gradient for %d elements", len(values))
    return np.array(values)


def gradient_relative_error(adjoint, fd, floor: float = 0.0) -> np.ndarray:
    """|adjoint - fd| / max(|adjoint|, |fd|, floor), elementwise."""
    adjoint = np.asarray(adjoint, dtype=float)
    fd = np.asarray(fd, dtype=float)
    scale = np.maximum(np.maximum(np.abs(adjoint), np.abs(fd)), floor)
    with np.errstate(invalid="ignore", divide="ignore"):
        err = np.where(scale > 0, np.abs(adjoint - fd) / scale, 0.0)
    return err
