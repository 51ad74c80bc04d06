"""
Legacy ASCII VTK unstructured-grid writer.

Layout::

    # vtk DataFile Version 3.0
    <title>
    ASCII
    DATASET UNSTRUCTURED_GRID
    POINTS <n_nodes> double          # coordinates padded to 3-D
    CELLS <n_elements> <n_elements * (dim + 2)>
    CELL_TYPES <n_elements>          # 3 line, 5 triangle, 10 tetrahedron
    POINT_DATA <n_nodes>             # one SCALARS block per nodal field (u, adjoint)
    CELL_DATA <n_elements>           # one SCALARS block per element field (k, gradient)
"""

import logging
from typing import Dict, Optional

import numpy as np

from ..constants import CalderonConstants
from ..exceptions import CalderonError
from ..mesh import SimplexMesh
from .utils import ensure_parent, format_float


class VTKWriter:
    """Writes mesh snapshots with nodal and element fields."""

    def __init__(self, logger: logging.Logger = None):
        self.logger = logger or logging.getLogger(__name__)

    def _scalars(self, name: str, values) -> list:
        lines = [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines.extend(format_float(v) for v in values)
        return lines

    def format(
        self,
        mesh: SimplexMesh,
        point_data: Optional[Dict[str, np.ndarray]] = None,
        cell_data: Optional[Dict[str, np.ndarray]] = None,
        title: str = "pycalderon snapshot",
    ) -> str:
        point_data = point_data or {}
        cell_data = cell_data or {}
        for name, values in point_data.items():
            if np.shape(values) != (mesh.n_nodes,):
                raise CalderonError(f"Point field '{name}' must have {mesh.n_nodes} values")
        for name, values in cell_data.items():
            if np.shape(values) != (mesh.n_elements,):
                raise CalderonError(f"Cell field '{name}' must have {mesh.n_elements} values")

        padded = np.zeros((mesh.n_nodes, 3))
        padded[:, : mesh.dim] = mesh.nodes
        n_vert = mesh.dim + 1
        cell_type = CalderonConstants.VTK_CELL_TYPES[mesh.dim]

        lines = [
            "# vtk DataFile Version 3.0",
            title.replace("\n", " ")[:255],
            "ASCII",
            "DATASET UNSTRUCTURED_GRID",
            f"POINTS {mesh.n_nodes} double",
        ]
        lines.extend(" ".join(format_float(c) for c in p) for p in padded)
        lines.append(f"CELLS {mesh.n_elements} {mesh.n_elements * (n_vert + 1)}")
        lines.extend(f"{n_vert} " + " ".join(str(int(i)) for i in e) for e in mesh.elements)
        lines.append(f"CELL_TYPES {mesh.n_elements}")
        lines.extend(str(cell_type) for _ in range(mesh.n_elements))
        if point_data:
            lines.append(f"POINT_DATA {mesh.n_nodes}")
            for name, values in point_data.items():
                lines.extend(self._scalars(name, values))
        if cell_data:
            lines.append(f"CELL_DATA {mesh.n_elements}")
            for name, values in cell_data.items():
                lines.extend(self._scalars(name, values))
        return "\n".join(lines) + "\n"

    def write(
        self,
        path: str,
        mesh: SimplexMesh,
        point_data: Optional[Dict[str, np.ndarray]] = None,
        cell_data: Optional[Dict[str, np.ndarray]] = None,
        title: str = "pycalderon snapshot",
    ) -> None:
        ensure_parent(path)
        try:
            with open(path, "w") as f:
                f.write(self.format(mesh, point_data, cell_data, title))
        except OSError as e:
            raise CalderonError(f"Cannot write VTK file {path}: {e}")
        self.logger.debug("Wrote VTK snapshot %s", path)
