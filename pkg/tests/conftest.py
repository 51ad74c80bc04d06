"""
Pytest configuration and shared fixtures for pycalderon tests.
"""

import pytest
import sys
from pathlib import Path

import numpy as np

# Add the package to Python path for testing
test_dir = Path(__file__).parent
package_root = test_dir.parent
sys.path.insert(0, str(package_root))

from calderon.config import SolverConfig, Source, SourceSpec  # noqa: E402
from calderon.inversion import build_measurement  # noqa: E402
from calderon.mesh import compute_geometry, generate_box_mesh  # noqa: E402
from calderon.presets import SQUARE_MEASUREMENTS  # noqa: E402
from calderon.solver import FieldSolver  # noqa: E402


@pytest.fixture(scope="session")
def project_root():
    """Path to the project root directory."""
    return Path(__file__).parent.parent


@pytest.fixture
def square_mesh():
    """Unit square, 4 x 4 cells, 32 triangles."""
    return generate_box_mesh((0.0, 0.0), (1.0, 1.0), (4, 4))


@pytest.fixture
def square_geom(square_mesh):
    return compute_geometry(square_mesh)


@pytest.fixture
def fine_mesh():
    """Unit square, 8 x 8 cells, 128 triangles."""
    return generate_box_mesh((0.0, 0.0), (1.0, 1.0), (8, 8))


@pytest.fixture
def fine_geom(fine_mesh):
    return compute_geometry(fine_mesh)


@pytest.fixture
def direct_solver(fine_mesh, fine_geom):
    """Sparse direct solver on the 8 x 8 square."""
    return FieldSolver(fine_mesh, fine_geom, SolverConfig(method="direct"))


def source_specs(count=2):
    """Source/sink pairs of the square experiments."""
    return [
        SourceSpec(
            id=i,
            sources=[
                Source(center=SQUARE_MEASUREMENTS[i][0], radius=0.5, amplitude=1.0),
                Source(center=SQUARE_MEASUREMENTS[i][1], radius=0.5, amplitude=-1.0),
            ],
        )
        for i in range(1, count + 1)
    ]


@pytest.fixture
def constant_measurements(fine_mesh, fine_geom, direct_solver):
    """Two measurements synthesized from k = 2 on the 8 x 8 square."""
    k_target = np.full(fine_mesh.n_elements, 2.0)
    return [
        build_measurement(fine_mesh, fine_geom, k_target, spec, direct_solver)
        for spec in source_specs(2)
    ]


@pytest.fixture
def sample_config_text():
    """Return a small explicit experiment configuration as text."""
    return """
    # Small Gaussian recovery
    name = small-gaussian
    seed 7

    DOMAIN {
        lower 0,0
        upper 1,1
        divisions 6,6
    }

    TARGET gaussian {
        center 0.5,0.5
        radius 0.2
        amplitude 4
        base 1
    }

    MEASUREMENT 1 {
        SOURCE 0.5,0 {
            radius 0.5
            amplitude 1
        }
        SOURCE 0.5,1 {
            amplitude -1
        }
    }

    DESCENT {
        alpha 0.5
        max_iters 3
        smoothing pseudo_laplacian
    }

    SOLVER {
        method direct
    }
    """
