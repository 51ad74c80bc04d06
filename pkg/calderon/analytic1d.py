"""
Closed-form 1-D conduction through piecewise-constant conductivity.

In 1-D the flux f_c = k du/dx is constant, so the boundary data fix only
the resistance integral of 1/k. Every profile with the same resistance
produces the same boundary data, which this module constructs, checks and
cross-validates against the finite element path.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .config import SolverConfig
from .constants import CalderonConstants
from .exceptions import CalderonError
from .mesh import build_mesh, compute_geometry
from .solver import DirichletData, FieldSolver, boundary_normal_flux

logger = logging.getLogger(__name__)


@dataclass
class PiecewiseConductivity1D:
    """Conductivity k_i on the intervals [breakpoints[i], breakpoints[i + 1]]."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.breakpoints = np.asarray(self.breakpoints, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.breakpoints.ndim != 1 or self.breakpoints.size < 2:
            raise ValueError("A profile needs at least two breakpoints")
        if self.values.shape != (self.breakpoints.size - 1,):
            raise ValueError(
                f"{self.breakpoints.size} breakpoints need {self.breakpoints.size - 1} values, "
                f"got {self.values.size}"
            )
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("Breakpoints must be strictly increasing")
        if np.any(~np.isfinite(self.values)) or np.any(self.values <= 0):
            raise ValueError("Conductivity values must be positive")

    @classmethod
    def uniform(cls, values, length: float = 1.0) -> "PiecewiseConductivity1D":
        """Profile of equal-width intervals over [0, length]."""
        values = np.asarray(values, dtype=float)
        return cls(np.linspace(0.0, length, values.size + 1), values)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def length(self) -> float:
        return float(self.breakpoints[-1] - self.breakpoints[0])


def resistance(profile: PiecewiseConductivity1D) -> float:
    """Integral of 1/k, i.e. sum of dx_i / k_i."""
    return float(np.sum(profile.widths / profile.values))


def boundary_data(
    profile: PiecewiseConductivity1D, u0: float, uL: float
) -> Tuple[float, np.ndarray]:
    """Flux and breakpoint temperatures for u(0) = u0, u(L) = uL.

    Returns:
        (f_c, u) with f_c = (uL - u0) / resistance and u at every breakpoint
    """
    f_c = (uL - u0) / resistance(profile)
    steps = f_c * profile.widths / profile.values
    u = u0 + np.concatenate([[0.0], np.cumsum(steps)])
    # Pin the far end so rounding in the cumulative sum does not leak into uL
    u[-1] = uL
    return f_c, u


def nonuniqueness_family(
    resistance_target: float,
    n_intervals: int,
    seed: int = 0,
    length: float = 1.0,
    k_range: Tuple[float, float] = CalderonConstants.FAMILY_K_RANGE,
    max_attempts: int = CalderonConstants.FAMILY_MAX_ATTEMPTS,
) -> PiecewiseConductivity1D:
    """Random equal-width profile with a prescribed resistance.

    The first n - 1 conductivities are drawn uniformly from ``k_range``; the
    last one is solved from the resistance constraint. Draws forcing a
    non-positive last value are repeated up to ``max_attempts`` times.

    Raises:
        CalderonError: For n < 2, a non-positive target, or when no valid
            draw is found
    """
    if n_intervals < 2:
        raise CalderonError(
            "A single interval is uniquely determined by its resistance; need n_intervals >= 2"
        )
    if not resistance_target > 0:
        raise CalderonError(f"Resistance must be positive, got {resistance_target}")
    rng = np.random.default_rng(seed)
    width = length / n_intervals
    for attempt in range(max_attempts):
        head = rng.uniform(k_range[0], k_range[1], size=n_intervals - 1)
        remainder = resistance_target - np.sum(width / head)
        if remainder > 0:
            last = width / remainder
            logger.debug("Family member found after %d draws", attempt + 1)
            return PiecewiseConductivity1D.uniform(np.append(head, last), length)
    raise CalderonError(
        f"No positive profile with resistance {resistance_target} found in {max_attempts} draws"
    )


def reference_profiles() -> Dict[str, PiecewiseConductivity1D]:
    """The three four-interval profiles on [0, 1] with sum(1/k_i) = 4."""
    return {
        "a": PiecewiseConductivity1D.uniform([1.0, 1.0, 1.0, 1.0]),
        "b": PiecewiseConductivity1D.uniform([2.0, 2.0, 2.0 / 3.0, 2.0 / 3.0]),
        "c": PiecewiseConductivity1D.uniform([10.0, 5.0, 2.0, 10.0 / 32.0]),
    }


def fem_boundary_data(
    profile: PiecewiseConductivity1D,
    u0: float,
    uL: float,
    refine: int = 1,
    solver_config: Optional[SolverConfig] = None,
) -> Tuple[float, np.ndarray]:
    """Same quantities as boundary_data, from a finite element solve.

    The segment mesh places nodes at every breakpoint (and ``refine`` - 1
    equally spaced nodes inside each interval), so linear elements reproduce
    the exact solution.

    Returns:
        (f_c, u at the breakpoints); f_c is the outward flux at x = L
    """
    if refine < 1:
        raise CalderonError("refine must be at least 1")
    pieces = [
        np.linspace(a, b, refine + 1)[:-1]
        for a, b in zip(profile.breakpoints[:-1], profile.breakpoints[1:])
    ]
    x = np.append(np.concatenate(pieces), profile.breakpoints[-1])
    elements = np.stack([np.arange(x.size - 1), np.arange(1, x.size)], axis=1)
    mesh = build_mesh(x[:, None], elements)
    geom = compute_geometry(mesh)
    k = np.repeat(profile.values, refine)

    solver = FieldSolver(mesh, geom, solver_config or SolverConfig(method="direct"))
    nodal = np.zeros(mesh.n_nodes)
    nodal[0], nodal[-1] = u0, uL
    u = solver.solve(k, DirichletData.from_nodal(mesh, nodal))
    flux = boundary_normal_flux(mesh, geom, k, u, method="element")
    right = int(np.argmax(mesh.face_centroids[:, 0]))
    return float(flux[right]), u[::refine]
