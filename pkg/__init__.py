"""
pycalderon

Finite element toolkit for the inverse conductivity (Calderon) problem:
adjoint gradients of boundary flux misfits, smoothing, region projection and
steepest-descent recovery of a conductivity from boundary measurements.
"""

from .calderon import (
    ExperimentRunner,
    ExperimentConfig,
    ExperimentConfigParser,
    SimplexMesh,
    FieldSolver,
    DescentDriver,
    CalderonError,
    ErrorCode,
    CalderonConstants,
    TargetSpec,
    SourceSpec,
    DescentConfig,
    SolverConfig,
    DomainConfig,
)

__all__ = [
    "ExperimentRunner",
    "ExperimentConfig",
    "ExperimentConfigParser",
    "SimplexMesh",
    "FieldSolver",
    "DescentDriver",
    "CalderonError",
    "ErrorCode",
    "CalderonConstants",
    "TargetSpec",
    "SourceSpec",
    "DescentConfig",
    "SolverConfig",
    "DomainConfig",
]
