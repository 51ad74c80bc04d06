"""
Steady conduction solver.

Assembles the weak form of div(k grad u) = 0 for piecewise-constant element
conductivity on linear simplices, solves it with Dirichlet data by
elimination, and recovers boundary normal fluxes.
"""

import logging
import threading
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg, spsolve

from .config import SolverConfig
from .exceptions import CalderonError, SolverError
from .mesh import ElementGeometry, SimplexMesh

logger = logging.getLogger(__name__)

FLUX_METHODS = ("consistent", "element")


@dataclass
class DirichletData:
    """Prescribed values on a set of nodes.

    Attributes:
        nodes: Node indices (the boundary nodes of the mesh for every experiment)
        values: Prescribed value per node
    """

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        if self.nodes.shape != self.values.shape or self.nodes.ndim != 1:
            raise ValueError("Dirichlet nodes and values must be 1-D arrays of equal length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Dirichlet values must be finite")

    @classmethod
    def from_function(cls, mesh: SimplexMesh, func: Callable[[np.ndarray], np.ndarray]):
        """Sample ``func`` (points -> values) at the mesh boundary nodes."""
        nodes = mesh.boundary_nodes
        return cls(nodes=nodes, values=func(mesh.nodes[nodes]))

    @classmethod
    def from_nodal(cls, mesh: SimplexMesh, nodal: np.ndarray):
        """Restrict a nodal field to the mesh boundary nodes."""
        nodes = mesh.boundary_nodes
        return cls(nodes=nodes, values=np.asarray(nodal, dtype=float)[nodes])


def validate_conductivity(mesh: SimplexMesh, k) -> np.ndarray:
    """Return ``k`` as a float array, checking length, finiteness and positivity."""
    k = np.asarray(k, dtype=float)
    if k.shape != (mesh.n_elements,):
        raise CalderonError(
            f"Conductivity has {k.size} values, mesh has {mesh.n_elements} elements"
        )
    bad = np.flatnonzero(~(np.isfinite(k) & (k > 0)))
    if bad.size:
        e = int(bad[0])
        raise CalderonError(f"Conductivity must be positive: element {e} has k = {k[e]!r}")
    return k


def assemble_stiffness(mesh: SimplexMesh, geom: ElementGeometry, k) -> sp.csr_matrix:
    """Assemble A_ij = sum_el k_el V_el gradN_i . gradN_j.

    Raises:
        CalderonError: If any conductivity value is not positive
    """
    k = validate_conductivity(mesh, k)
    local = np.einsum(
        "e,eid,ejd->eij", k * geom.volumes, geom.gradients, geom.gradients
    )
    n_vert = mesh.elements.shape[1]
    rows = np.repeat(mesh.elements, n_vert, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, n_vert)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes))
    return A.tocsr()


def assemble_laplacian(mesh: SimplexMesh, geom: ElementGeometry) -> sp.csr_matrix:
    """Stiffness matrix of the plain Laplacian (k = 1)."""
    return assemble_stiffness(mesh, geom, np.ones(mesh.n_elements))


def solve_spd(
    A: sp.spmatrix,
    b: np.ndarray,
    config: Optional[SolverConfig] = None,
    x0: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Solve a symmetric positive-definite sparse system.

    Uses Jacobi-preconditioned conjugate gradients or a sparse direct solve
    according to ``config.method``.

    Raises:
        SolverError: If CG does not reach the tolerance within the iteration cap
    """
    config = config or SolverConfig()
    n = A.shape[0]
    if n == 0:
        return np.zeros(0)
    A = sp.csr_matrix(A)

    if config.method == "direct":
        x = np.atleast_1d(spsolve(A.tocsc(), b))
        if not np.all(np.isfinite(x)):
            raise SolverError("Direct solve produced non-finite values")
        return x

    diag = A.diagonal()
    if np.any(diag <= 0):
        raise SolverError("System matrix has non-positive diagonal entries")
    M = sp.diags(1.0 / diag)
    maxiter = config.maxiter_factor * max(n, 1)
    iterations = [0]

    def count(_):
        iterations[0] += 1

    x, info = cg(
        A, b, x0=x0, rtol=config.rtol, atol=0.0, maxiter=maxiter, M=M, callback=count
    )
    b_norm = np.linalg.norm(b)
    residual = np.linalg.norm(b - A @ x) / b_norm if b_norm > 0 else np.linalg.norm(A @ x)
    if info != 0 or not np.all(np.isfinite(x)):
        raise SolverError(
            f"CG did not converge in {iterations[0]} iterations (relative residual {residual:.3e})",
            residual=residual,
            iterations=iterations[0],
        )
    logger.debug("CG converged in %d iterations, relative residual %.3e", iterations[0], residual)
    return x


class FieldSolver:
    """Forward solver bound to one mesh.

    Holds the mesh, its geometry and the linear solver settings, and counts
    the Dirichlet solves it performs so finite-difference drivers can account
    for their cost.
    """

    def __init__(
        self,
        mesh: SimplexMesh,
        geom: ElementGeometry,
        config: Optional[SolverConfig] = None,
    ):
        self.mesh = mesh
        self.geom = geom
        self.config = config or SolverConfig()
        self.logger = logging.getLogger(__name__)
        self.solve_count = 0
        self._count_lock = threading.Lock()

    def stiffness(self, k) -> sp.csr_matrix:
        return assemble_stiffness(self.mesh, self.geom, k)

    def _check_bc(self, bc: DirichletData) -> None:
        boundary = self.mesh.boundary_nodes
        if bc.nodes.size != boundary.size or not np.array_equal(np.sort(bc.nodes), boundary):
            raise CalderonError(
                f"Dirichlet data must cover exactly the {boundary.size} boundary nodes "
                f"(got {bc.nodes.size})"
            )

    def solve_dirichlet(
        self, A: sp.csr_matrix, bc: DirichletData, x0: Optional[np.ndarray] = None
    ) -> np.ndarray:
        """Solve A u = 0 on interior nodes with u = bc on the boundary."""
        self._check_bc(bc)
        u = np.zeros(self.mesh.n_nodes)
        u[bc.nodes] = bc.values
        free = self.mesh.interior_nodes
        with self._count_lock:
            self.solve_count += 1
        if free.size == 0:
            self.logger.debug("No interior nodes, solution is the Dirichlet data")
            return u

        A_ff = A[free][:, free]
        rhs = -(A[free][:, bc.nodes] @ bc.values)
        guess = None if x0 is None else np.asarray(x0)[free]
        u[free] = solve_spd(A_ff, rhs, self.config, x0=guess)
        return u

    def solve(self, k, bc: DirichletData) -> np.ndarray:
        """Solve div(k grad u) = 0 with Dirichlet data ``bc``."""
        return self.solve_dirichlet(self.stiffness(k), bc)

    def flux(self, k, u, method: str = "consistent", A: Optional[sp.csr_matrix] = None):
        return boundary_normal_flux(self.mesh, self.geom, k, u, method=method, A=A)


def solve_forward(
    mesh: SimplexMesh,
    geom: ElementGeometry,
    k,
    bc: DirichletData,
    solver: Optional[FieldSolver] = None,
) -> np.ndarray:
    """Solve the forward problem; see FieldSolver.solve."""
    solver = solver or FieldSolver(mesh, geom)
    return solver.solve(k, bc)


def boundary_normal_flux(
    mesh: SimplexMesh,
    geom: ElementGeometry,
    k,
    u,
    method: str = "consistent",
    A: Optional[sp.csr_matrix] = None,
) -> np.ndarray:
    """Face-averaged outward normal flux k n.grad(u) on every boundary face.

    Args:
        method: 'element' evaluates k_el n.grad(u) in the adjacent element;
            'consistent' divides the boundary rows of A(k) u by the lumped
            boundary measure at each node and averages the result over the
            face's nodes
        A: Pre-assembled stiffness for ``k`` (consistent method only)

    Returns:
        (n_faces,) flux per boundary face
    """
    if method not in FLUX_METHODS:
        raise CalderonError(f"Unknown flux method '{method}', expected one of {FLUX_METHODS}")
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise CalderonError(f"Nodal field has {u.size} values, mesh has {mesh.n_nodes} nodes")

    if method == "element":
        k = validate_conductivity(mesh, k)
        grad = geom.element_gradient(mesh, u)[mesh.face_elements]
        return k[mesh.face_elements] * np.einsum("fd,fd->f", mesh.face_normals, grad)

    if A is None:
        A = assemble_stiffness(mesh, geom, k)
    reaction = A @ u
    measure = mesh.boundary_node_measure
    density = np.zeros(mesh.n_nodes)
    nodes = mesh.boundary_nodes
    density[nodes] = reaction[nodes] / measure[nodes]
    return density[mesh.face_nodes].mean(axis=1)
