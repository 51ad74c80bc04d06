"""
Exception classes for Calderon problem operations.

This module defines the exception hierarchy used throughout the pycalderon
library for consistent error handling.
"""

from .config import ErrorCode


class CalderonError(Exception):
    """Base exception class for all pycalderon errors.

    This exception is raised for all library failures including:
    - Invalid meshes, fields and configuration values
    - Mesh and experiment file parsing errors
    - Linear solver failures
    - Failed gradient acceptance checks

    The ``code`` attribute classifies the failure and maps onto the CLI exit
    code, so callers should catch CalderonError rather than generic exceptions.
    """

    def __init__(self, message: str, code: ErrorCode = ErrorCode.VALIDATION):
        super().__init__(message)
        self.code = code


class MeshError(CalderonError):
    """Invalid mesh data, optionally tied to a line of a mesh file."""

    def __init__(self, message: str, line: int = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, ErrorCode.VALIDATION)
        self.line = line


class SolverError(CalderonError):
    """A linear solve did not converge or a run failed part way through.

    ``history`` is filled in by the descent driver with the iterations that
    completed before the failure.
    """

    def __init__(
        self,
        message: str,
        residual: float = float("nan"),
        iterations: int = 0,
        measurement_id: int = None,
    ):
        super().__init__(message, ErrorCode.SOLVER_FAILURE)
        self.residual = residual
        self.iterations = iterations
        self.measurement_id = measurement_id
        self.history = None
