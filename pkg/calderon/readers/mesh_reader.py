"""
ASCII mesh file reader.

File layout (blank lines and lines starting with '#' are ignored)::

    dim n_nodes n_elements n_bfaces
    x [y [z]]                        # n_nodes lines
    i_1 ... i_{dim+1}                # n_elements lines, 1-based node indices
    j_1 ... j_dim e                  # n_bfaces lines, 1-based nodes + adjacent element

Every problem found is reported as a MeshError naming the file line.
"""

import logging
from typing import Dict, List, Tuple

import numpy as np

from ..exceptions import MeshError
from ..mesh import SimplexMesh, build_mesh


class MeshReader:
    """Reads SimplexMesh objects from the ASCII mesh format.

    Element orientation is taken as written; inverted elements are reported
    when geometry is computed.
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    def read(self, path: str) -> SimplexMesh:
        """Read a mesh file.

        Raises:
            MeshError: On I/O errors or malformed contents
        """
        self.logger.info("Reading mesh file: %s", path)
        try:
            with open(path, "r") as f:
                content = f.read()
        except OSError as e:
            raise MeshError(f"Cannot read mesh file {path}: {e}")
        mesh = self.parse_text(content)
        self.logger.info(
            "Read %d-D mesh: %d nodes, %d elements", mesh.dim, mesh.n_nodes, mesh.n_elements
        )
        return mesh

    def _content_lines(self, content: str) -> List[Tuple[int, List[str]]]:
        lines = []
        for number, line in enumerate(content.splitlines(), start=1):
            line = line.strip()
            if line and not line.startswith("#"):
                lines.append((number, line.split()))
        return lines

    def _take(self, lines, cursor: int, count: int, what: str):
        if cursor + count > len(lines):
            last = lines[-1][0] if lines else 1
            raise MeshError(
                f"unexpected end of file: expected {count} {what} lines, found {len(lines) - cursor}",
                line=last,
            )
        return lines[cursor:cursor + count]

    def _parse_numbers(self, number: int, tokens: List[str], expected: int, kind, what: str):
        if len(tokens) != expected:
            raise MeshError(f"{what} needs {expected} values, got {len(tokens)}", line=number)
        try:
            return [kind(t) for t in tokens]
        except ValueError:
            raise MeshError(f"malformed {what}: '{' '.join(tokens)}'", line=number)

    def _parse_indices(self, number, tokens, expected, limit, what) -> List[int]:
        values = self._parse_numbers(number, tokens, expected, int, what)
        for v in values:
            if v < 1 or v > limit:
                raise MeshError(f"{what} index {v} outside 1..{limit}", line=number)
        return [v - 1 for v in values]

    def parse_text(self, content: str) -> SimplexMesh:
        """Parse mesh file contents.

        Raises:
            MeshError: With the offending line for malformed counts, values,
                out-of-range indices or a boundary that does not match the
                element connectivity
        """
        lines = self._content_lines(content)
        if not lines:
            raise MeshError("empty mesh file", line=1)

        header_line, header = lines[0]
        dim, n_nodes, n_elements, n_faces = self._parse_numbers(
            header_line, header, 4, int, "header (dim n_nodes n_elements n_bfaces)"
        )
        if dim not in (1, 2, 3):
            raise MeshError(f"dimension must be 1, 2 or 3, got {dim}", line=header_line)
        if n_nodes < dim + 1 or n_elements < 1 or n_faces < 1:
            raise MeshError(
                f"invalid counts: {n_nodes} nodes, {n_elements} elements, {n_faces} faces",
                line=header_line,
            )

        cursor = 1
        nodes = [
            self._parse_numbers(num, tok, dim, float, "node coordinate")
            for num, tok in self._take(lines, cursor, n_nodes, "node")
        ]
        cursor += n_nodes
        element_rows = self._take(lines, cursor, n_elements, "element")
        elements = [
            self._parse_indices(num, tok, dim + 1, n_nodes, "element node")
            for num, tok in element_rows
        ]
        cursor += n_elements
        face_rows = self._take(lines, cursor, n_faces, "boundary face")
        faces = []
        for num, tok in face_rows:
            if len(tok) != dim + 1:
                raise MeshError(
                    f"boundary face needs {dim} node indices and an element index, got {len(tok)} values",
                    line=num,
                )
            face_nodes = self._parse_indices(num, tok[:dim], dim, n_nodes, "face node")
            (element,) = self._parse_indices(num, tok[dim:], 1, n_elements, "face element")
            faces.append((num, face_nodes, element))
        cursor += n_faces
        if cursor < len(lines):
            raise MeshError("unexpected data after the boundary faces", line=lines[cursor][0])

        try:
            mesh = build_mesh(np.array(nodes), np.array(elements), orient=False)
        except MeshError as e:
            bad = self._offending_element(elements)
            raise MeshError(f"invalid element connectivity: {e}", line=element_rows[bad][0])

        self._check_faces(mesh, faces, header_line)
        return mesh

    @staticmethod
    def _offending_element(elements: List[List[int]]) -> int:
        """First element that repeats a node or is the third to share a face."""
        shared: Dict[Tuple[int, ...], int] = {}
        for i, element in enumerate(elements):
            if len(set(element)) < len(element):
                return i
            for j in range(len(element)):
                key = tuple(sorted(element[:j] + element[j + 1:]))
                shared[key] = shared.get(key, 0) + 1
                if shared[key] > 2:
                    return i
        return 0

    def _check_faces(self, mesh: SimplexMesh, faces, header_line: int) -> None:
        expected = {
            tuple(sorted(int(n) for n in nodes)): int(e)
            for nodes, e in zip(mesh.face_nodes, mesh.face_elements)
        }
        seen = set()
        for number, nodes, element in faces:
            key = tuple(sorted(nodes))
            if key not in expected:
                raise MeshError(
                    f"face {tuple(n + 1 for n in nodes)} is not on the boundary of the elements",
                    line=number,
                )
            if expected[key] != element:
                raise MeshError(
                    f"face {tuple(n + 1 for n in nodes)} belongs to element {expected[key] + 1}, "
                    f"not {element + 1}",
                    line=number,
                )
            if key in seen:
                raise MeshError(f"duplicate face {tuple(n + 1 for n in nodes)}", line=number)
            seen.add(key)
        if len(seen) != len(expected):
            raise MeshError(
                f"file lists {len(seen)} boundary faces, elements have {len(expected)}",
                line=header_line,
            )


def read_mesh(path: str) -> SimplexMesh:
    """Read a mesh file; see MeshReader."""
    return MeshReader().read(path)
