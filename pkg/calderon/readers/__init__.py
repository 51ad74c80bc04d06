"""
pycalderon readers

This package contains readers for the file formats pycalderon consumes:
- MeshReader: ASCII simplex mesh files
"""

from .mesh_reader import MeshReader, read_mesh

__all__ = ["MeshReader", "read_mesh"]
