"""
CSV reports: convergence histories, gradient checks, boundary fluxes and
1-D non-uniqueness families.
"""

import csv
import logging
from typing import Dict, Iterable, List, Sequence

import numpy as np

from ..exceptions import CalderonError
from ..inversion import ConvergenceHistory
from ..mesh import SimplexMesh
from .utils import ensure_parent, format_float, format_optional

HISTORY_COLUMNS = ["iter", "cost", "flux_error", "k_l2_error", "alpha"]
GRADCHECK_COLUMNS = ["element_id", "adjoint_grad", "fd_grad", "rel_error"]
PARAMETRIC_COLUMNS = ["iter", "x0", "y0", "r0", "k_disk"]


class CSVWriter:
    """Writes pycalderon reports as comma separated files."""

    def __init__(self, logger: logging.Logger = None):
        self.logger = logger or logging.getLogger(__name__)

    def write_rows(self, path: str, header: Sequence[str], rows: Iterable[Sequence]) -> int:
        ensure_parent(path)
        count = 0
        try:
            with open(path, "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(header)
                for row in rows:
                    writer.writerow(row)
                    count += 1
        except OSError as e:
            raise CalderonError(f"Cannot write CSV file {path}: {e}")
        self.logger.debug("Wrote %d rows to %s", count, path)
        return count

    def write_history(self, path: str, history: ConvergenceHistory) -> int:
        rows = (
            [str(i), format_float(c), format_float(f), format_optional(k), format_float(a)]
            for i, c, f, k, a in history.rows()
        )
        return self.write_rows(path, HISTORY_COLUMNS, rows)

    def write_parameters(self, path: str, history: ConvergenceHistory) -> int:
        rows = (
            [str(i)] + [format_float(p) for p in params]
            for i, params in zip(history.iterations, history.parameters)
        )
        return self.write_rows(path, PARAMETRIC_COLUMNS, rows)

    def write_gradcheck(self, path: str, ids, adjoint, fd, rel_error, id_column: str = "element_id") -> int:
        rows = (
            [str(int(e)), format_float(a), format_float(f), format_float(r)]
            for e, a, f, r in zip(ids, adjoint, fd, rel_error)
        )
        return self.write_rows(path, [id_column] + GRADCHECK_COLUMNS[1:], rows)

    def write_fluxes(self, path: str, mesh: SimplexMesh, fluxes: Dict[str, np.ndarray]) -> int:
        """One row per boundary face: face id, centroid, measure, one column per flux field."""
        axes = ["x", "y", "z"][: mesh.dim]
        header = ["face_id"] + [f"c{a}" for a in axes] + ["measure"] + list(fluxes)
        centroids = mesh.face_centroids
        rows = (
            [str(f)]
            + [format_float(c) for c in centroids[f]]
            + [format_float(mesh.face_measures[f])]
            + [format_float(values[f]) for values in fluxes.values()]
            for f in range(mesh.n_faces)
        )
        return self.write_rows(path, header, rows)

    def write_family(self, path: str, rows: List[Sequence]) -> int:
        """Rows of (profile, interval_values, resistance, f_c, u at breakpoints)."""
        header = ["profile", "k_values", "resistance", "f_c", "u_breakpoints"]
        return self.write_rows(path, header, rows)
