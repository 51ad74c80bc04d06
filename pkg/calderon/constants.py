"""
Constants for Calderon problem experiments.

This module contains the defaults used throughout the pycalderon library,
including solver tolerances, smoothing parameters, optimizer settings and
the environment variables the CLI honours.
"""


class CalderonConstants:
    """Constants for field solves, smoothing and optimization."""

    # Linear solver
    SOLVER_RTOL = 1e-12  # Relative residual tolerance for CG on reduced systems
    SOLVER_MAXITER_FACTOR = 10  # Iteration cap = factor * node count
    SOLVER_METHODS = ("cg", "direct")

    # Gradient smoothing (operating point used for all square/cube runs)
    PSEUDO_LAPLACIAN_LAMBDA = 0.05
    RELAX_DTAU = 0.8
    RELAX_STEPS = 10
    RELAX_DIVERGENCE_STEPS = 3  # Consecutive residual increases treated as divergence
    SPEA_PASSES = 1

    # Optimizer
    K_MIN = 1e-3  # Conductivity clamp after each update
    EPS_R = 1e-3  # Relative design-parameter range for termination
    DEFAULT_ALPHA = 0.5
    DEFAULT_MAX_ITERS = 50
    MAX_BACKTRACKS = 12
    ALPHA_GROWTH = 2.0  # Step growth after an accepted step, capped at the configured alpha
    COST_ATOL = 1e-16
    PARAMETRIC_STEP = 0.05  # Initial line-search length in scaled parameter units
    PARAMETRIC_MAX_STEP = 0.4
    PARAMETRIC_K_SCALE = 10.0  # Conductivity unit of the scaled disk parameters
    PARAMETRIC_RESTART = 4  # Conjugate directions before a steepest-descent restart

    # Finite differences
    FD_REL_STEP = 1e-6
    GRADCHECK_THRESHOLD = 1e-3
    GRADCHECK_SAMPLES = 10
    GRADCHECK_FLOOR = 1e-4  # Relative-error floor as a fraction of the largest adjoint entry

    # Analytic 1-D family generation
    FAMILY_MAX_ATTEMPTS = 1000
    FAMILY_K_RANGE = (0.2, 10.0)

    # Environment
    OUTPUT_DIR_ENV = "CALDERON_OUTPUT_DIR"
    DEFAULT_OUTPUT_DIR = "calderon-output"

    # Mesh file / VTK cell types per spatial dimension
    VTK_CELL_TYPES = {1: 3, 2: 5, 3: 10}  # VTK_LINE, VTK_TRIANGLE, VTK_TETRA
