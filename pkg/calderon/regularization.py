"""
Gradient regularization.

Smoothing operators acting on element fields (simple point/element/point
averaging) and on nodal fields (H1 and pseudo-Laplacian smoothing, solved
directly or by explicit relaxation), plus projection of element gradients
onto a coarse lattice of constant-conductivity regions.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .config import DescentConfig, SmoothingKind, SolverConfig
from .constants import CalderonConstants
from .exceptions import CalderonError, SolverError
from .mesh import ElementGeometry, SimplexMesh
from .solver import assemble_laplacian, solve_spd

logger = logging.getLogger(__name__)


@dataclass
class MassMatrices:
    """Consistent mass matrix and its lumped (row-sum) diagonal."""

    consistent: sp.csr_matrix
    lumped: np.ndarray


@dataclass
class RegionMap:
    """Assignment of elements to coarse regions.

    Attributes:
        assignment: Region index of every element
        region_volumes: Sum of element volumes per region
        divisions: Lattice divisions per axis the regions came from
    """

    assignment: np.ndarray
    region_volumes: np.ndarray
    divisions: Tuple[int, ...] = ()

    @property
    def n_regions(self) -> int:
        return self.region_volumes.size

    def masks(self):
        for r in range(self.n_regions):
            yield r, self.assignment == r


def _check_element_field(mesh: SimplexMesh, field) -> np.ndarray:
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.n_elements,):
        raise CalderonError(f"Element field has {field.size} values, mesh has {mesh.n_elements} elements")
    return field


def _check_nodal_field(mesh: SimplexMesh, field) -> np.ndarray:
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.n_nodes,):
        raise CalderonError(f"Nodal field has {field.size} values, mesh has {mesh.n_nodes} nodes")
    return field


def elements_to_points(mesh: SimplexMesh, geom: ElementGeometry, elem_field) -> np.ndarray:
    """Volume-weighted average of incident element values at every node."""
    elem_field = _check_element_field(mesh, elem_field)
    P = mesh.incidence
    return (P @ (geom.volumes * elem_field)) / (P @ geom.volumes)


def points_to_elements(mesh: SimplexMesh, nodal) -> np.ndarray:
    """Arithmetic mean of the nodal values of every element."""
    nodal = _check_nodal_field(mesh, nodal)
    return nodal[mesh.elements].mean(axis=1)


def smooth_spea(mesh: SimplexMesh, geom: ElementGeometry, elem_field, passes: int = 1) -> np.ndarray:
    """Simple point/element/point averaging repeated ``passes`` times."""
    if passes < 1:
        raise CalderonError(f"SPEA needs at least one pass, got {passes}")
    field = _check_element_field(mesh, elem_field)
    for _ in range(passes):
        field = points_to_elements(mesh, elements_to_points(mesh, geom, field))
    return field


def assemble_mass(mesh: SimplexMesh, geom: ElementGeometry) -> MassMatrices:
    """Consistent P1 mass matrix, V_el (1 + delta_ij) / ((d + 1)(d + 2)) per element."""
    n_vert = mesh.dim + 1
    ref = (np.ones((n_vert, n_vert)) + np.eye(n_vert)) / (n_vert * (n_vert + 1))
    local = geom.volumes[:, None, None] * ref[None, :, :]
    rows = np.repeat(mesh.elements, n_vert, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, n_vert)).ravel()
    consistent = sp.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)
    ).tocsr()
    lumped = np.asarray(consistent.sum(axis=1)).ravel()
    return MassMatrices(consistent=consistent, lumped=lumped)


def relax_solve(
    operator: sp.spmatrix,
    rhs,
    dtau: float = CalderonConstants.RELAX_DTAU,
    steps: int = CalderonConstants.RELAX_STEPS,
    u0=None,
) -> np.ndarray:
    """Explicit relaxation C (u_new - u) = dtau (r - L u) with C = diag(L).

    Args:
        operator: System matrix L
        rhs: Right-hand side r
        dtau: Pseudo-time step, in (0, 2)
        steps: Number of relaxation steps (>= 1)
        u0: Initial guess (zero if omitted)

    Raises:
        CalderonError: For invalid dtau or steps
        SolverError: If the residual grows over consecutive steps
    """
    if not 0.0 < dtau < 2.0:
        raise CalderonError(f"Relaxation step dtau must lie in (0, 2), got {dtau}")
    if steps < 1:
        raise CalderonError(f"Relaxation needs at least one step, got {steps}")
    L = sp.csr_matrix(operator)
    rhs = np.asarray(rhs, dtype=float)
    diag = L.diagonal()
    if np.any(diag <= 0):
        raise SolverError("Relaxation operator has non-positive diagonal entries")
    u = np.zeros_like(rhs) if u0 is None else np.array(u0, dtype=float)

    residual = rhs - L @ u
    norm = np.linalg.norm(residual)
    initial = norm
    growth = 0
    for step in range(steps):
        u = u + dtau * residual / diag
        residual = rhs - L @ u
        new_norm = np.linalg.norm(residual)
        growth = growth + 1 if new_norm > norm else 0
        if growth >= CalderonConstants.RELAX_DIVERGENCE_STEPS:
            raise SolverError(
                f"Relaxation diverged at step {step + 1} (residual {new_norm:.3e})",
                residual=new_norm,
                iterations=step + 1,
            )
        norm = new_norm
    logger.debug("Relaxation: %d steps, residual %.3e -> %.3e", steps, initial, norm)
    return u


def _smoothing_system(nodal_field, operator, mass, solver_config, relaxation):
    rhs = mass.consistent @ nodal_field
    if relaxation is not None:
        dtau, steps = relaxation
        return relax_solve(operator, rhs, dtau=dtau, steps=steps, u0=nodal_field)
    return solve_spd(operator, rhs, solver_config, x0=nodal_field)


def smooth_h1(
    mesh: SimplexMesh,
    geom: ElementGeometry,
    nodal_field,
    lambda_l: float,
    solver_config: Optional[SolverConfig] = None,
    relaxation: Optional[Tuple[float, int]] = None,
    mass: Optional[MassMatrices] = None,
) -> np.ndarray:
    """Solve [M_c + lambda_l K] k = M_c k0.

    Args:
        lambda_l: Smoothing length squared (>= 0); 0 returns the input
        relaxation: (dtau, steps) to use relax_solve instead of a linear solve
        mass: Pre-assembled mass matrices
    """
    nodal_field = _check_nodal_field(mesh, nodal_field)
    if lambda_l < 0:
        raise CalderonError(f"lambda_l must not be negative, got {lambda_l}")
    if lambda_l == 0:
        return nodal_field.copy()
    mass = mass or assemble_mass(mesh, geom)
    operator = mass.consistent + lambda_l * assemble_laplacian(mesh, geom)
    return _smoothing_system(nodal_field, operator, mass, solver_config, relaxation)


def smooth_pseudo_laplacian(
    mesh: SimplexMesh,
    geom: ElementGeometry,
    nodal_field,
    lambda_pl: float = CalderonConstants.PSEUDO_LAPLACIAN_LAMBDA,
    solver_config: Optional[SolverConfig] = None,
    relaxation: Optional[Tuple[float, int]] = None,
    mass: Optional[MassMatrices] = None,
) -> np.ndarray:
    """Solve [M_c + lambda_pl (M_l - M_c)] k = M_c k0.

    The operator equals (1 - lambda_pl) M_c + lambda_pl M_l, which is positive
    definite for every lambda_pl >= 0 because M_c <= M_l holds elementwise for
    linear simplices.
    """
    nodal_field = _check_nodal_field(mesh, nodal_field)
    if lambda_pl < 0:
        raise CalderonError(f"lambda_pl must not be negative, got {lambda_pl}")
    if lambda_pl == 0:
        return nodal_field.copy()
    mass = mass or assemble_mass(mesh, geom)
    operator = (1.0 - lambda_pl) * mass.consistent + lambda_pl * sp.diags(mass.lumped)
    return _smoothing_system(nodal_field, operator, mass, solver_config, relaxation)


class GradientSmoother:
    """Applies the configured smoother to element gradient densities.

    The mass matrices are assembled once per mesh. Densities are averaged to
    the nodes, smoothed there and mapped back to elements by nodal mean; SPEA
    works on the element field directly.
    """

    def __init__(
        self,
        mesh: SimplexMesh,
        geom: ElementGeometry,
        config: DescentConfig,
        solver_config: Optional[SolverConfig] = None,
    ):
        self.mesh = mesh
        self.geom = geom
        self.config = config
        self.solver_config = solver_config
        self.logger = logging.getLogger(__name__)
        self._mass = None

    @property
    def mass(self) -> MassMatrices:
        if self._mass is None:
            self._mass = assemble_mass(self.mesh, self.geom)
        return self._mass

    @property
    def lambda_l(self) -> float:
        if self.config.lambda_l is not None:
            return self.config.lambda_l
        return float(np.mean(self.geom.sizes) ** 2)

    def smooth(self, density) -> np.ndarray:
        kind = self.config.smoothing
        if kind == SmoothingKind.NONE:
            return np.array(density, dtype=float)
        if kind == SmoothingKind.SPEA:
            return smooth_spea(self.mesh, self.geom, density, self.config.spea_passes)

        nodal = elements_to_points(self.mesh, self.geom, density)
        relaxation = (
            (self.config.dtau, self.config.relax_steps) if self.config.use_relaxation else None
        )
        if kind == SmoothingKind.H1:
            nodal = smooth_h1(
                self.mesh, self.geom, nodal, self.lambda_l,
                self.solver_config, relaxation, self.mass,
            )
        else:
            nodal = smooth_pseudo_laplacian(
                self.mesh, self.geom, nodal, self.config.lambda_pl,
                self.solver_config, relaxation, self.mass,
            )
        return points_to_elements(self.mesh, nodal)


def build_region_map(mesh: SimplexMesh, geom: ElementGeometry, divisions: Sequence[int]) -> RegionMap:
    """Assign elements to a box lattice of regions by centroid.

    Raises:
        CalderonError: If the lattice does not match the mesh dimension or a
            region receives no element
    """
    divisions = tuple(int(d) for d in divisions)
    if len(divisions) != mesh.dim or any(d < 1 for d in divisions):
        raise CalderonError(f"Region lattice {divisions} does not fit a {mesh.dim}-D mesh")
    lower, upper = mesh.bounding_box()
    rel = (geom.centroids - lower) / (upper - lower)
    cell = np.floor(rel * np.array(divisions)).astype(int)
    cell = np.clip(cell, 0, np.array(divisions) - 1)
    assignment = np.ravel_multi_index(tuple(cell.T), divisions)
    n_regions = int(np.prod(divisions))
    volumes = np.bincount(assignment, weights=geom.volumes, minlength=n_regions)
    empty = np.flatnonzero(volumes <= 0)
    if empty.size:
        raise CalderonError(
            f"Region {int(empty[0])} of lattice {divisions} contains no elements; use a coarser lattice"
        )
    return RegionMap(assignment=assignment, region_volumes=volumes, divisions=divisions)


def single_region(mesh: SimplexMesh, geom: ElementGeometry) -> RegionMap:
    return RegionMap(
        assignment=np.zeros(mesh.n_elements, dtype=int),
        region_volumes=np.array([geom.total_volume]),
        divisions=(1,) * mesh.dim,
    )


def project_gradient(mesh: SimplexMesh, geom: ElementGeometry, grad, regions: RegionMap) -> np.ndarray:
    """Region gradient density: sum of g_el over the region divided by its volume."""
    grad = _check_element_field(mesh, grad)
    if regions.assignment.shape != (mesh.n_elements,):
        raise CalderonError("Region map does not cover every element")
    if np.any(regions.region_volumes <= 0):
        raise CalderonError("Region map has an empty region")
    sums = np.bincount(regions.assignment, weights=grad, minlength=regions.n_regions)
    return sums / regions.region_volumes


def inject_regions(values, regions: RegionMap) -> np.ndarray:
    """Element field taking each region's value."""
    return np.asarray(values, dtype=float)[regions.assignment]


def region_average(geom: ElementGeometry, elem_field, regions: RegionMap) -> np.ndarray:
    """Volume-weighted region means of an element field."""
    sums = np.bincount(
        regions.assignment, weights=geom.volumes * np.asarray(elem_field), minlength=regions.n_regions
    )
    return sums / regions.region_volumes
