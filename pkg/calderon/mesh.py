"""
Linear simplex meshes.

This module provides the SimplexMesh container (nodes, elements and oriented
boundary faces), structured box generators for segments, triangles and
tetrahedra, and the per-element geometry (volumes, shape-function gradients,
centroids and element sizes) used by every solver in the package.
"""

import itertools
import logging
from dataclasses import dataclass
from functools import cached_property
from math import factorial
from typing import List, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .exceptions import MeshError

logger = logging.getLogger(__name__)

# Relative volume below which an element is treated as degenerate
_DEGENERATE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SimplexMesh:
    """Immutable linear simplex mesh.

    Attributes:
        nodes: (n_nodes, dim) coordinates
        elements: (n_elements, dim + 1) node indices
        face_nodes: (n_faces, dim) node indices of each boundary face
        face_elements: (n_faces,) adjacent element of each boundary face
        face_normals: (n_faces, dim) outward unit normals
        face_measures: (n_faces,) face length/area (1 for 1-D point faces)
    """

    nodes: np.ndarray
    elements: np.ndarray
    face_nodes: np.ndarray
    face_elements: np.ndarray
    face_normals: np.ndarray
    face_measures: np.ndarray

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def n_faces(self) -> int:
        return self.face_nodes.shape[0]

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Sparse (n_nodes, n_elements) node/element incidence with unit entries."""
        n_vert = self.elements.shape[1]
        rows = self.elements.ravel()
        cols = np.repeat(np.arange(self.n_elements), n_vert)
        data = np.ones(rows.size)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n_nodes, self.n_elements))

    @cached_property
    def node_to_elements(self) -> List[np.ndarray]:
        """Incident element indices of every node, in increasing order."""
        csr = self.incidence
        return [csr.indices[csr.indptr[i]:csr.indptr[i + 1]] for i in range(self.n_nodes)]

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.face_nodes)

    @cached_property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    @cached_property
    def face_centroids(self) -> np.ndarray:
        return self.nodes[self.face_nodes].mean(axis=1)

    @cached_property
    def boundary_node_measure(self) -> np.ndarray:
        """Lumped boundary measure per node: each face shares |f| / dim with its nodes."""
        share = np.repeat(self.face_measures / self.dim, self.dim)
        return np.bincount(self.face_nodes.ravel(), weights=share, minlength=self.n_nodes)

    def bounding_box(self):
        return self.nodes.min(axis=0), self.nodes.max(axis=0)


@dataclass(frozen=True, eq=False)
class ElementGeometry:
    """Per-element geometry of a linear simplex mesh.

    Attributes:
        volumes: (n_elements,) element measures V_el
        gradients: (n_elements, dim + 1, dim) shape-function gradients
        centroids: (n_elements, dim) element centroids
        sizes: (n_elements,) average edge length h_fem
    """

    volumes: np.ndarray
    gradients: np.ndarray
    centroids: np.ndarray
    sizes: np.ndarray

    @property
    def total_volume(self) -> float:
        return float(self.volumes.sum())

    def element_gradient(self, mesh: SimplexMesh, nodal: np.ndarray) -> np.ndarray:
        """Constant gradient of a nodal P1 field on every element, (n_elements, dim)."""
        return np.einsum("eid,ei->ed", self.gradients, np.asarray(nodal)[mesh.elements])


def _signed_volumes(nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
    dim = nodes.shape[1]
    coords = nodes[elements]
    edges = coords[:, 1:, :] - coords[:, :1, :]
    return np.linalg.det(edges) / factorial(dim)


def _face_normals(nodes: np.ndarray, faces: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Unit normals (unoriented) and measures of (n, dim)-node faces."""
    dim = nodes.shape[1]
    if dim == 1:
        return np.ones((faces.shape[0], 1)), np.ones(faces.shape[0])
    coords = nodes[faces]
    if dim == 2:
        t = coords[:, 1, :] - coords[:, 0, :]
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
        measure = np.linalg.norm(n, axis=1)
    else:
        n = np.cross(coords[:, 1, :] - coords[:, 0, :], coords[:, 2, :] - coords[:, 0, :])
        measure = 0.5 * np.linalg.norm(n, axis=1)
    norm = np.linalg.norm(n, axis=1)
    if np.any(norm <= 0):
        bad = int(np.flatnonzero(norm <= 0)[0])
        raise MeshError(f"Boundary face {bad} has zero measure")
    return n / norm[:, None], measure


def find_boundary_faces(nodes: np.ndarray, elements: np.ndarray):
    """Locate boundary faces of a simplex mesh.

    Returns:
        (face_nodes, face_elements, face_normals, face_measures), faces ordered by
        their sorted node tuples

    Raises:
        MeshError: If a face is shared by more than two elements
    """
    n_el, n_vert = elements.shape
    # Face j of an element omits local vertex j
    local = [tuple(i for i in range(n_vert) if i != j) for j in range(n_vert)]
    faces = np.concatenate([elements[:, idx] for idx in local], axis=0)
    owners = np.tile(np.arange(n_el), n_vert)
    keys = np.sort(faces, axis=1)

    _, first, counts = np.unique(keys, axis=0, return_index=True, return_counts=True)
    if np.any(counts > 2):
        bad = keys[first[np.flatnonzero(counts > 2)[0]]]
        raise MeshError(
            f"Non-conforming mesh: face {tuple(int(v) for v in bad)} is shared by more than two elements"
        )

    boundary = first[counts == 1]
    face_nodes = faces[boundary]
    face_elements = owners[boundary]

    normals, measures = _face_normals(nodes, face_nodes)
    elem_centroids = nodes[elements[face_elements]].mean(axis=1)
    outward = nodes[face_nodes].mean(axis=1) - elem_centroids
    flip = np.einsum("fd,fd->f", normals, outward) < 0
    normals[flip] *= -1.0
    return face_nodes, face_elements, normals, measures


def build_mesh(nodes, elements, orient: bool = True) -> SimplexMesh:
    """Build a SimplexMesh from coordinates and connectivity.

    Args:
        nodes: (n_nodes, dim) coordinates
        elements: (n_elements, dim + 1) node indices (0-based)
        orient: Swap the last two nodes of negatively oriented elements

    Raises:
        MeshError: For inconsistent shapes, out-of-range indices, degenerate
            elements or non-conforming connectivity
    """
    nodes = np.array(nodes, dtype=float)
    elements = np.array(elements, dtype=np.int64)
    if nodes.ndim == 1:
        nodes = nodes[:, None]
    if nodes.ndim != 2 or nodes.shape[1] not in (1, 2, 3):
        raise MeshError(f"Node array must have shape (n, dim) with dim 1-3, got {nodes.shape}")
    dim = nodes.shape[1]
    if elements.ndim != 2 or elements.shape[1] != dim + 1:
        raise MeshError(
            f"Elements of a {dim}-D mesh need {dim + 1} nodes, got shape {elements.shape}"
        )
    if elements.size == 0:
        raise MeshError("Mesh has no elements")
    if elements.min() < 0 or elements.max() >= nodes.shape[0]:
        raise MeshError(f"Element connectivity references nodes outside 0..{nodes.shape[0] - 1}")
    if not np.all(np.isfinite(nodes)):
        raise MeshError("Node coordinates must be finite")

    if orient:
        negative = _signed_volumes(nodes, elements) < 0
        if np.any(negative):
            elements[np.ix_(negative, [dim - 1, dim])] = elements[np.ix_(negative, [dim, dim - 1])]
            logger.debug("Reoriented %d elements", int(negative.sum()))

    face_nodes, face_elements, normals, measures = find_boundary_faces(nodes, elements)
    for array in (nodes, elements, face_nodes, face_elements, normals, measures):
        array.setflags(write=False)
    return SimplexMesh(nodes, elements, face_nodes, face_elements, normals, measures)


def _cell_simplices(dim: int) -> List[List[Sequence[int]]]:
    """Corner offsets of the simplices splitting one unit grid cell."""
    if dim == 1:
        return [[(0,), (1,)]]
    if dim == 2:
        return [[(0, 0), (1, 0), (1, 1)], [(0, 0), (1, 1), (0, 1)]]
    # Kuhn split: one tetrahedron per axis ordering, all sharing the main diagonal
    simplices = []
    for perm in itertools.permutations(range(3)):
        corner = [0, 0, 0]
        path = [tuple(corner)]
        for axis in perm:
            corner[axis] = 1
            path.append(tuple(corner))
        simplices.append(path)
    return simplices


def generate_box_mesh(lower, upper, divisions) -> SimplexMesh:
    """Generate a structured simplex mesh of an axis-aligned box.

    Each grid cell is a segment in 1-D, two triangles in 2-D (split along the
    (0,0)-(1,1) diagonal) and six tetrahedra in 3-D (Kuhn split along the main
    diagonal).

    Args:
        lower: Lower corner, one coordinate per axis
        upper: Upper corner
        divisions: Number of cells per axis

    Raises:
        MeshError: For mismatched lengths, divisions < 1 or a degenerate box
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    divisions = np.atleast_1d(np.asarray(divisions))
    if not (lower.size == upper.size == divisions.size):
        raise MeshError(
            f"lower, upper and divisions must have the same length "
            f"({lower.size}, {upper.size}, {divisions.size})"
        )
    if lower.size not in (1, 2, 3):
        raise MeshError(f"Box dimension must be 1, 2 or 3, got {lower.size}")
    if np.any(divisions != np.round(divisions)) or np.any(divisions < 1):
        raise MeshError(f"Divisions must be positive integers, got {divisions.tolist()}")
    if np.any(upper <= lower):
        raise MeshError(f"Degenerate box: upper {upper.tolist()} must exceed lower {lower.tolist()}")

    dim = lower.size
    divisions = divisions.astype(int)
    shape = tuple(divisions + 1)
    axes = [np.linspace(lower[a], upper[a], divisions[a] + 1) for a in range(dim)]
    grid = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.ravel() for g in grid], axis=1)

    cells = np.indices(tuple(divisions)).reshape(dim, -1).T
    per_cell = []
    for simplex in _cell_simplices(dim):
        ids = [np.ravel_multi_index(tuple((cells + np.array(off)).T), shape) for off in simplex]
        per_cell.append(np.stack(ids, axis=1))
    elements = np.stack(per_cell, axis=1).reshape(-1, dim + 1)

    mesh = build_mesh(nodes, elements, orient=True)
    logger.info(
        "Generated %d-D box mesh: %d nodes, %d elements, %d boundary faces",
        dim, mesh.n_nodes, mesh.n_elements, mesh.n_faces,
    )
    return mesh


def compute_geometry(mesh: SimplexMesh) -> ElementGeometry:
    """Compute volumes, shape-function gradients, centroids and sizes.

    Raises:
        MeshError: If an element is inverted or has (near) zero volume
    """
    dim = mesh.dim
    coords = mesh.nodes[mesh.elements]
    edges = coords[:, 1:, :] - coords[:, :1, :]
    det = np.linalg.det(edges)
    volumes = det / factorial(dim)

    pairs = list(itertools.combinations(range(dim + 1), 2))
    lengths = np.stack(
        [np.linalg.norm(coords[:, i, :] - coords[:, j, :], axis=1) for i, j in pairs], axis=1
    )
    sizes = lengths.mean(axis=1)

    bad = np.flatnonzero(volumes <= _DEGENERATE_TOL * sizes ** dim)
    if bad.size:
        e = int(bad[0])
        kind = "inverted" if volumes[e] < 0 else "zero-volume"
        raise MeshError(f"Element {e} is {kind} (signed volume {volumes[e]:.3e})")

    # Rows of the inverse Jacobian are the gradients of the barycentric coordinates 1..dim
    inv = np.linalg.inv(edges)
    tail = np.transpose(inv, (0, 2, 1))
    head = -tail.sum(axis=1, keepdims=True)
    gradients = np.concatenate([head, tail], axis=1)

    return ElementGeometry(
        volumes=volumes,
        gradients=gradients,
        centroids=coords.mean(axis=1),
        sizes=sizes,
    )
