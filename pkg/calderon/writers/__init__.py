"""
pycalderon writers

This package contains writer classes for the artifacts pycalderon emits:
- MeshWriter: ASCII simplex mesh files
- VTKWriter: legacy VTK snapshots of nodal and element fields
- CSVWriter: convergence histories, gradient checks, flux tables, 1-D families
"""

from .mesh_writer import MeshWriter, write_mesh
from .vtk_writer import VTKWriter
from .csv_writer import CSVWriter

__all__ = ["MeshWriter", "write_mesh", "VTKWriter", "CSVWriter"]
