"""
Calderon Inverse Conductivity Library

This module provides a finite element toolkit for recovering a conductivity
k(x) from boundary measurements: forward and adjoint Dirichlet solves on
simplex meshes, adjoint gradients of the boundary flux misfit, smoothing and
region projection, and steepest-descent optimizers.

Main Classes:
    ExperimentRunner: High-level experiment interface
    ExperimentConfig: Experiment description
    ExperimentConfigParser: Experiment configuration file parser
    SimplexMesh / ElementGeometry: Mesh topology and element geometry
    FieldSolver: Forward Dirichlet solver
    DescentDriver: Gradient descent optimizer

Exceptions:
    CalderonError: Base exception for pycalderon operations

Enums:
    ErrorCode: Error classification codes
"""

from .constants import CalderonConstants
from .exceptions import CalderonError, MeshError, SolverError
from .config import (
    DescentConfig,
    DomainConfig,
    ErrorCode,
    ExperimentConfig,
    ExperimentMode,
    GradientMode,
    SmoothingKind,
    SmoothingTarget,
    SolverConfig,
    Source,
    SourceSpec,
    TargetKind,
    TargetSpec,
)
from .mesh import ElementGeometry, SimplexMesh, build_mesh, compute_geometry, generate_box_mesh
from .solver import DirichletData, FieldSolver, boundary_normal_flux, solve_forward
from .adjoint import Measurement, evaluate_cost, solve_adjoint, cost_gradient, fd_element_gradient
from .regularization import (
    GradientSmoother,
    build_region_map,
    elements_to_points,
    points_to_elements,
    project_gradient,
    smooth_h1,
    smooth_pseudo_laplacian,
    smooth_spea,
)
from .inversion import ConvergenceHistory, DescentDriver, run_descent, run_parametric_disk
from .analytic1d import PiecewiseConductivity1D, boundary_data, nonuniqueness_family
from .parser import ExperimentConfigParser
from .presets import get_preset, list_presets
from .readers import read_mesh
from .writers import write_mesh
from .experiment import ExperimentRunner

__all__ = [
    "CalderonConstants",
    "CalderonError",
    "MeshError",
    "SolverError",
    "DescentConfig",
    "DomainConfig",
    "ErrorCode",
    "ExperimentConfig",
    "ExperimentMode",
    "GradientMode",
    "SmoothingKind",
    "SmoothingTarget",
    "SolverConfig",
    "Source",
    "SourceSpec",
    "TargetKind",
    "TargetSpec",
    "ElementGeometry",
    "SimplexMesh",
    "build_mesh",
    "compute_geometry",
    "generate_box_mesh",
    "DirichletData",
    "FieldSolver",
    "boundary_normal_flux",
    "solve_forward",
    "Measurement",
    "evaluate_cost",
    "solve_adjoint",
    "cost_gradient",
    "fd_element_gradient",
    "GradientSmoother",
    "build_region_map",
    "elements_to_points",
    "points_to_elements",
    "project_gradient",
    "smooth_h1",
    "smooth_pseudo_laplacian",
    "smooth_spea",
    "ConvergenceHistory",
    "DescentDriver",
    "run_descent",
    "run_parametric_disk",
    "PiecewiseConductivity1D",
    "boundary_data",
    "nonuniqueness_family",
    "ExperimentConfigParser",
    "get_preset",
    "list_presets",
    "read_mesh",
    "write_mesh",
    "ExperimentRunner",
]
