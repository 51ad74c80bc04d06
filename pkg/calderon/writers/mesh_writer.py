"""
ASCII mesh file writer (format documented in readers.mesh_reader).
"""

import logging

from ..exceptions import MeshError
from ..mesh import SimplexMesh
from .utils import ensure_parent, format_float


class MeshWriter:
    """Writes SimplexMesh objects in the ASCII mesh format.

    Coordinates are written with full repr precision so a write/read cycle
    reproduces them exactly.
    """

    def __init__(self, logger: logging.Logger = None):
        self.logger = logger or logging.getLogger(__name__)

    def format(self, mesh: SimplexMesh) -> str:
        lines = [f"{mesh.dim} {mesh.n_nodes} {mesh.n_elements} {mesh.n_faces}"]
        lines.extend(" ".join(format_float(x) for x in node) for node in mesh.nodes)
        lines.extend(" ".join(str(int(i) + 1) for i in element) for element in mesh.elements)
        for nodes, element in zip(mesh.face_nodes, mesh.face_elements):
            lines.append(" ".join(str(int(i) + 1) for i in nodes) + f" {int(element) + 1}")
        return "\n".join(lines) + "\n"

    def write(self, mesh: SimplexMesh, path: str) -> None:
        ensure_parent(path)
        try:
            with open(path, "w") as f:
                f.write(self.format(mesh))
        except OSError as e:
            raise MeshError(f"Cannot write mesh file {path}: {e}")
        self.logger.info(
            "Wrote mesh (%d nodes, %d elements) to %s", mesh.n_nodes, mesh.n_elements, path
        )


def write_mesh(mesh: SimplexMesh, path: str) -> None:
    """Write a mesh file; see MeshWriter."""
    MeshWriter().write(mesh, path)
