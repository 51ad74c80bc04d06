"""
Conductivity recovery.

Target conductivity and measurement synthesis, error norms, the
gradient-descent cycle (forward, adjoint, gradient, smoothing, update),
finite-difference region gradients, and the four-parameter disk model.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .adjoint import Measurement, evaluate_all, total_cost
from .config import (
    DescentConfig,
    GradientMode,
    SmoothingTarget,
    SolverConfig,
    Source,
    SourceSpec,
    TargetKind,
    TargetSpec,
)
from .constants import CalderonConstants
from .exceptions import CalderonError, SolverError
from .mesh import ElementGeometry, SimplexMesh
from .regularization import (
    GradientSmoother,
    RegionMap,
    inject_regions,
    project_gradient,
    smooth_spea,
)
from .solver import DirichletData, FieldSolver, boundary_normal_flux, validate_conductivity

logger = logging.getLogger(__name__)

PARAMETER_NAMES = ("x0", "y0", "r0", "k_disk")


@dataclass
class ConvergenceHistory:
    """Per-iteration record of an optimization run.

    ``k_l2_error`` entries are None when no target conductivity is known.
    ``parameters`` is filled by the parametric optimizer only.
    """

    iterations: List[int] = field(default_factory=list)
    cost: List[float] = field(default_factory=list)
    flux_error: List[float] = field(default_factory=list)
    k_l2_error: List[Optional[float]] = field(default_factory=list)
    alpha: List[float] = field(default_factory=list)
    parameters: List[Tuple[float, ...]] = field(default_factory=list)
    clamped: List[Tuple[int, str]] = field(default_factory=list)
    termination: str = ""

    def record(self, iteration, cost, flux_error, k_error, alpha, parameters=None) -> None:
        self.iterations.append(int(iteration))
        self.cost.append(float(cost))
        self.flux_error.append(float(flux_error))
        self.k_l2_error.append(None if k_error is None else float(k_error))
        self.alpha.append(float(alpha))
        if parameters is not None:
            self.parameters.append(tuple(float(p) for p in parameters))

    def __len__(self) -> int:
        return len(self.iterations)

    def rows(self):
        """(iter, cost, flux_error, k_l2_error, alpha) tuples."""
        return list(zip(self.iterations, self.cost, self.flux_error, self.k_l2_error, self.alpha))

    @property
    def final_cost(self) -> float:
        return self.cost[-1]


# Target conductivities


def disk_conductivity(
    geom: ElementGeometry, center, radius: float, k_disk: float, k_exte: float = 1.0
) -> np.ndarray:
    """Disk conductivity with a linear ramp of one element size across the edge.

    Elements whose centroid lies more than h_el / 2 inside (outside) the
    circle take k_disk (k_exte); in between the value varies linearly with the
    centroid distance, so the field is continuous in center and radius. In
    3-D the disk extends along the last axis.
    """
    if geom.centroids.shape[1] < 2:
        raise CalderonError("Disk conductivity needs a 2-D or 3-D mesh")
    if not radius > 0:
        raise CalderonError(f"Disk radius must be positive, got {radius}")
    center = np.asarray(center, dtype=float)[:2]
    dist = np.linalg.norm(geom.centroids[:, :2] - center, axis=1)
    inside = np.clip((radius - dist) / geom.sizes + 0.5, 0.0, 1.0)
    return k_exte + (k_disk - k_exte) * inside


def _center_for(spec_center, dim: int) -> np.ndarray:
    center = np.asarray(spec_center, dtype=float)
    if center.size < dim:
        raise CalderonError(f"Target center {tuple(center)} has fewer than {dim} coordinates")
    return center[:dim]


def build_target(mesh: SimplexMesh, geom: ElementGeometry, spec: TargetSpec) -> np.ndarray:
    """Element conductivity of a target description, evaluated at element centroids.

    Raises:
        CalderonError: If the target does not fit the mesh dimension or is not positive
    """
    x = geom.centroids
    kind = spec.kind
    if kind == TargetKind.CONSTANT:
        k = np.full(mesh.n_elements, spec.value)
    elif kind == TargetKind.LINEAR:
        if spec.axis >= mesh.dim:
            raise CalderonError(f"Linear target axis {spec.axis} exceeds mesh dimension {mesh.dim}")
        k = spec.intercept - spec.slope * x[:, spec.axis]
    elif kind == TargetKind.GAUSSIAN:
        center = _center_for(spec.center, mesh.dim)
        r = np.linalg.norm(x - center, axis=1) / spec.radius
        k = spec.base + spec.amplitude * np.exp(-(r ** 2))
    elif kind == TargetKind.DISK:
        if mesh.dim < 2:
            raise CalderonError("Disk target is not defined on a 1-D mesh")
        # Sharp edge by centroid; only the parametric model carries the ramp
        center = _center_for(spec.center, 2)
        dist = np.linalg.norm(x[:, :2] - center, axis=1)
        k = np.where(dist <= spec.radius, spec.k_disk, spec.k_exte)
    else:
        if kind == TargetKind.THREE_REGION_2D and mesh.dim < 2:
            raise CalderonError("Three-region target needs a 2-D or 3-D mesh")
        idx = np.searchsorted(np.asarray(spec.breakpoints), x[:, 0], side="right")
        k = np.asarray(spec.values)[idx]

    if np.any(k <= 0):
        raise CalderonError(f"Target '{kind.value}' is not positive on this mesh")
    return k


# Measurements


def source_field(points, sources: Sequence[Source]) -> np.ndarray:
    """Superposition of localized sources a exp(-|x - x_i|^2 / r_i^2).

    A source center with fewer coordinates than the points is compared
    against the leading coordinates only (a line source through a slab).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.zeros(points.shape[0])
    for s in sources:
        center = np.asarray(s.center, dtype=float)
        if center.size > points.shape[1]:
            raise CalderonError(
                f"Source center {tuple(center)} has more coordinates than the mesh dimension"
            )
        d2 = np.sum((points[:, : center.size] - center) ** 2, axis=1)
        values += s.amplitude * np.exp(-d2 / s.radius ** 2)
    return values


def three_region_boundary(points) -> np.ndarray:
    """Boundary data (y - 0.5)(x - 1)^2 for x <= 1, zero elsewhere."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = points[:, 0], points[:, 1]
    return np.where(x <= 1.0, (y - 0.5) * (x - 1.0) ** 2, 0.0)


def insulated_face_mask(mesh: SimplexMesh, axes: Sequence[int]) -> Optional[np.ndarray]:
    """0/1 face mask excluding faces whose normal lies along one of ``axes``."""
    if not axes:
        return None
    mask = np.ones(mesh.n_faces)
    for axis in axes:
        mask[np.abs(mesh.face_normals[:, axis]) > 1.0 - 1e-9] = 0.0
    return mask


def build_measurement(
    mesh: SimplexMesh,
    geom: ElementGeometry,
    k_target,
    sources: SourceSpec,
    solver: Optional[FieldSolver] = None,
    face_weights: Optional[np.ndarray] = None,
    boundary: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> Measurement:
    """Synthesize one measurement from a known conductivity.

    The Dirichlet data is the source superposition (or ``boundary``) sampled
    at the boundary nodes; the target flux is the consistent boundary flux of
    the forward solution with ``k_target``.
    """
    k_target = validate_conductivity(mesh, k_target)
    solver = solver or FieldSolver(mesh, geom)
    func = boundary or (lambda p: source_field(p, sources.sources))
    bc = DirichletData.from_function(mesh, func)
    A = solver.stiffness(k_target)
    try:
        u = solver.solve_dirichlet(A, bc)
    except SolverError as e:
        raise SolverError(
            f"Measurement {sources.id}: {e}", e.residual, e.iterations, sources.id
        ) from e
    flux = boundary_normal_flux(mesh, geom, k_target, u, A=A)
    logger.debug("Measurement %d: |f|_max = %.4g", sources.id, float(np.max(np.abs(flux))))
    return Measurement(id=sources.id, dirichlet=bc, target_flux=flux, face_weights=face_weights)


# Error norms


def flux_error_norm(computed, target, mesh: SimplexMesh, face_weights=None) -> float:
    """Relative L2 flux error sqrt(sum (f - f_m)^2 |f| / sum f_m^2 |f|).

    ``computed`` and ``target`` are a single flux array or sequences of them
    (one per measurement); sums run over all measurements.

    Raises:
        CalderonError: On length mismatch or a zero target norm
    """
    if isinstance(computed, np.ndarray) and computed.ndim == 1:
        computed, target = [computed], [target]
        face_weights = [face_weights]
    if face_weights is None:
        face_weights = [None] * len(computed)
    if not (len(computed) == len(target) == len(face_weights)):
        raise CalderonError("Flux error needs one target per computed flux")

    num = den = 0.0
    for f, f_m, w in zip(computed, target, face_weights):
        f = np.asarray(f, dtype=float)
        f_m = np.asarray(f_m, dtype=float)
        if f.shape != (mesh.n_faces,) or f_m.shape != (mesh.n_faces,):
            raise CalderonError("Flux arrays must have one value per boundary face")
        measure = mesh.face_measures if w is None else mesh.face_measures * w
        num += float(np.sum(measure * (f - f_m) ** 2))
        den += float(np.sum(measure * f_m ** 2))
    if den == 0:
        raise CalderonError("Flux error is undefined for an all-zero target flux")
    return float(np.sqrt(num / den))


def k_l2_error(k, k_target, geom: ElementGeometry) -> float:
    """Volume-weighted relative L2 error of a conductivity field."""
    k = np.asarray(k, dtype=float)
    k_target = np.asarray(k_target, dtype=float)
    if k.shape != k_target.shape or k.shape != geom.volumes.shape:
        raise CalderonError("Conductivity fields must have one value per element")
    den = float(np.sum(geom.volumes * k_target ** 2))
    if den == 0:
        raise CalderonError("k error is undefined for an all-zero target")
    return float(np.sqrt(np.sum(geom.volumes * (k - k_target) ** 2) / den))


# Finite-difference region gradients


def fd_gradient_regions(
    mesh: SimplexMesh,
    geom: ElementGeometry,
    k_base,
    regions: RegionMap,
    measurements: Sequence[Measurement],
    step: float = CalderonConstants.FD_REL_STEP,
    solver: Optional[FieldSolver] = None,
) -> np.ndarray:
    """Central differences of the total cost w.r.t. each region's conductivity.

    Every region value is perturbed by +-step times its mean conductivity;
    the result is dI/dk_region (not a density). Costs use forward solves
    only, 2 * regions * measurements in total.
    """
    if not step > 0:
        raise CalderonError(f"Finite-difference step must be positive, got {step}")
    k_base = validate_conductivity(mesh, k_base)
    solver = solver or FieldSolver(mesh, geom, SolverConfig(method="direct"))
    grad = np.zeros(regions.n_regions)
    for r, mask in regions.masks():
        h = step * float(np.mean(k_base[mask]))
        k_plus = k_base.copy()
        k_minus = k_base.copy()
        k_plus[mask] += h
        k_minus[mask] -= h
        c_plus = total_cost(mesh, geom, k_plus, measurements, solver)
        c_minus = total_cost(mesh, geom, k_minus, measurements, solver)
        grad[r] = (c_plus - c_minus) / (2.0 * h)
    return grad


# Gradient descent


@dataclass
class _Evaluation:
    cost: float
    flux_error: float
    gradient: Optional[np.ndarray]


class DescentDriver:
    """Gradient-descent cycle over element or region conductivities.

    Each iteration solves the forward and adjoint problems of every
    measurement, sums the gradients, regularizes them (smoothing, or
    projection when a region map is given), and updates
    k_new = max(k_old - alpha * s, k_min). With backtracking the step length
    is halved until the cost decreases; after an accepted step it grows by
    ``alpha_growth`` again, never beyond the configured alpha.
    """

    def __init__(
        self,
        mesh: SimplexMesh,
        geom: ElementGeometry,
        measurements: Sequence[Measurement],
        config: DescentConfig,
        solver: Optional[FieldSolver] = None,
        regions: Optional[RegionMap] = None,
        max_workers: Optional[int] = None,
    ):
        if not measurements:
            raise CalderonError("Descent needs at least one measurement")
        if config.gradient_mode == GradientMode.FD and regions is None:
            raise CalderonError("Finite-difference descent needs a region lattice")
        self.mesh = mesh
        self.geom = geom
        self.measurements = list(measurements)
        self.config = config
        self.solver = solver or FieldSolver(mesh, geom)
        self.regions = regions
        self.max_workers = max_workers
        self.smoother = GradientSmoother(mesh, geom, config, self.solver.config)
        self.logger = logging.getLogger(__name__)

    def evaluate(self, k) -> _Evaluation:
        adjoint = self.config.gradient_mode == GradientMode.ADJOINT
        results = evaluate_all(
            self.mesh, self.geom, k, self.measurements, self.solver,
            with_gradient=adjoint, max_workers=self.max_workers,
        )
        cost = 0.0
        grad = np.zeros(self.mesh.n_elements) if adjoint else None
        for r in results:
            cost += r.cost
            if adjoint:
                grad += r.gradient
        flux_error = flux_error_norm(
            [r.flux for r in results],
            [m.target_flux for m in self.measurements],
            self.mesh,
            [m.face_weights for m in self.measurements],
        )
        return _Evaluation(cost, flux_error, grad)

    def direction(self, k, evaluation: _Evaluation) -> np.ndarray:
        """Regularized gradient density per element."""
        if self.config.gradient_mode == GradientMode.FD:
            grad = fd_gradient_regions(
                self.mesh, self.geom, k, self.regions, self.measurements, solver=self.solver
            )
            return inject_regions(grad / self.regions.region_volumes, self.regions)
        if self.regions is not None:
            density = project_gradient(self.mesh, self.geom, evaluation.gradient, self.regions)
            return inject_regions(density, self.regions)
        density = evaluation.gradient / self.geom.volumes
        if self.config.smoothing_target == SmoothingTarget.GRADIENT:
            return self.smoother.smooth(density)
        return density

    def update(self, k, direction, alpha) -> np.ndarray:
        k_new = k - alpha * direction
        if self.config.smoothing_target == SmoothingTarget.CONDUCTIVITY and self.regions is None:
            k_new = smooth_spea(self.mesh, self.geom, k_new, self.config.spea_passes)
        clamped = k_new < self.config.k_min
        if np.any(clamped):
            self.logger.warning(
                "Clamped %d element conductivities at k_min=%g", int(clamped.sum()), self.config.k_min
            )
            k_new = np.maximum(k_new, self.config.k_min)
        return k_new

    def run(
        self,
        k_initial=None,
        k_target=None,
        callback: Optional[Callable[[int, np.ndarray], None]] = None,
    ) -> Tuple[np.ndarray, ConvergenceHistory]:
        config = self.config
        if k_initial is None:
            k = np.full(self.mesh.n_elements, config.k0)
        else:
            k = validate_conductivity(self.mesh, k_initial).copy()
        history = ConvergenceHistory()

        def k_error(field):
            return None if k_target is None else k_l2_error(field, k_target, self.geom)

        try:
            current = self.evaluate(k)
            alpha = config.alpha
            history.record(0, current.cost, current.flux_error, k_error(k), 0.0)
            threshold = max(config.cost_rtol * current.cost, config.cost_atol)
            self.logger.info(
                "Descent start: cost %.6e, flux error %.4e", current.cost, current.flux_error
            )
            if callback:
                callback(0, k)

            history.termination = "max_iters"
            for iteration in range(1, config.max_iters + 1):
                if current.cost <= threshold:
                    history.termination = "cost threshold"
                    break
                direction = self.direction(k, current)
                if not np.any(direction):
                    history.termination = "zero gradient"
                    break

                trial_k, trial = self._line_search(k, direction, current.cost, alpha)
                if trial is None:
                    history.termination = "line search failed"
                    self.logger.warning("No decrease after %d step halvings", config.max_backtracks)
                    break
                k, current, alpha = trial_k, trial[0], trial[1]
                history.record(iteration, current.cost, current.flux_error, k_error(k), alpha)
                self.logger.info(
                    "Iteration %d: cost %.6e, flux error %.4e, alpha %.3g",
                    iteration, current.cost, current.flux_error, alpha,
                )
                if callback:
                    callback(iteration, k)
                alpha = min(alpha * config.alpha_growth, config.alpha)
            else:
                if current.cost <= threshold:
                    history.termination = "cost threshold"
        except SolverError as e:
            self.logger.error("Descent stopped after %d recorded iterations: %s", len(history), e)
            e.history = history
            raise
        self.logger.info("Descent finished (%s) after %d iterations", history.termination, len(history) - 1)
        return k, history

    def _line_search(self, k, direction, cost, alpha):
        for _ in range(self.config.max_backtracks + 1):
            trial_k = self.update(k, direction, alpha)
            trial = self.evaluate(trial_k)
            if trial.cost < cost or not self.config.backtracking:
                return trial_k, (trial, alpha)
            self.logger.debug("Cost rose to %.6e at alpha %.3g, halving", trial.cost, alpha)
            alpha *= 0.5
        return k, None


def run_descent(
    mesh: SimplexMesh,
    geom: ElementGeometry,
    measurements: Sequence[Measurement],
    config: DescentConfig,
    k_target=None,
    solver: Optional[FieldSolver] = None,
    regions: Optional[RegionMap] = None,
    k_initial=None,
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
    max_workers: Optional[int] = None,
) -> Tuple[np.ndarray, ConvergenceHistory]:
    """Run gradient descent from a constant k0 (or ``k_initial``).

    Raises:
        SolverError: If a solve fails; the partial history is attached as
            ``history``
    """
    driver = DescentDriver(mesh, geom, measurements, config, solver, regions, max_workers)
    return driver.run(k_initial=k_initial, k_target=k_target, callback=callback)


# Parametric disk model


def run_parametric_disk(
    mesh: SimplexMesh,
    geom: ElementGeometry,
    measurements: Sequence[Measurement],
    initial,
    config: DescentConfig,
    k_exte: float = 1.0,
    k_target=None,
    solver: Optional[FieldSolver] = None,
) -> Tuple[np.ndarray, ConvergenceHistory]:
    """Fit (x0, y0, r0, k_disk) of a disk conductivity to the measurements.

    Descent with central finite-difference gradients in scaled parameters
    (domain extents for position and radius, a fixed scale for the
    conductivity). Search directions are Polak-Ribiere conjugate corrections
    of the steepest-descent direction, restarted every
    ``PARAMETRIC_RESTART`` iterations or whenever the correction stops
    descending. Along a direction the step starts at ``config.parametric_step``,
    halves until the cost decreases, and is then refined by one quadratic fit
    through the known slope; it doubles for the next iteration.

    The run stops when the scaled parameter change drops below
    ``config.eps_r``, no step of at least ``config.eps_r`` decreases the cost
    along the steepest-descent direction, the cost reaches
    ``config.cost_atol``, or after ``config.max_iters`` iterations.
    Parameters leaving their bounds are clamped and recorded.
    """
    initial = np.asarray(initial, dtype=float)
    if initial.shape != (4,):
        raise CalderonError("Parametric disk needs (x0, y0, r0, k_disk)")
    if not (initial[2] > 0 and initial[3] > 0):
        raise CalderonError("Initial radius and disk conductivity must be positive")
    if mesh.dim < 2:
        raise CalderonError("Parametric disk needs a 2-D or 3-D mesh")

    solver = solver or FieldSolver(mesh, geom)
    lower, upper = mesh.bounding_box()
    extent = upper[:2] - lower[:2]
    scale = np.array([extent[0], extent[1], extent.min(), CalderonConstants.PARAMETRIC_K_SCALE])
    lo = np.array([lower[0], lower[1], 1e-3 * extent.min(), config.k_min]) / scale
    hi = np.array([upper[0], upper[1], extent.max(), np.inf]) / scale
    history = ConvergenceHistory()

    def fields(z):
        p = z * scale
        return disk_conductivity(geom, p[:2], p[2], p[3], k_exte)

    def cost_of(z):
        return total_cost(mesh, geom, fields(z), measurements, solver)

    def gradient(z):
        h = CalderonConstants.FD_REL_STEP
        grad = np.zeros(4)
        for i in range(4):
            dz = np.zeros(4)
            dz[i] = h
            grad[i] = (cost_of(z + dz) - cost_of(z - dz)) / (2.0 * h)
        return grad

    def record(iteration, z, cost, tau):
        k = fields(z)
        results = evaluate_all(mesh, geom, k, measurements, solver, with_gradient=False)
        flux_error = flux_error_norm(
            [r.flux for r in results],
            [m.target_flux for m in measurements],
            mesh,
            [m.face_weights for m in measurements],
        )
        k_err = None if k_target is None else k_l2_error(k, k_target, geom)
        history.record(iteration, cost, flux_error, k_err, tau, parameters=z * scale)

    def clamp(z, iteration):
        clipped = np.clip(z, lo, hi)
        for i in np.flatnonzero(clipped != z):
            history.clamped.append((iteration, PARAMETER_NAMES[i]))
            logger.warning(
                "Iteration %d: %s clamped to %.6g", iteration, PARAMETER_NAMES[i], clipped[i] * scale[i]
            )
        return clipped

    def line_search(z, cost, grad, direction, tau, iteration):
        while tau >= config.eps_r:
            z_new = clamp(z + tau * direction, iteration)
            cost_new = cost_of(z_new)
            if cost_new < cost:
                break
            tau *= 0.5
        else:
            return None
        # Quadratic through cost, the directional slope and the accepted trial
        slope = float(grad @ direction)
        curvature = cost_new - cost - slope * tau
        if slope < 0 < curvature:
            tau_fit = min(-slope * tau * tau / (2.0 * curvature), 4.0 * tau)
            if tau_fit >= config.eps_r and abs(tau_fit - tau) > 1e-3 * tau:
                z_fit = clamp(z + tau_fit * direction, iteration)
                cost_fit = cost_of(z_fit)
                if cost_fit < cost_new:
                    return z_fit, cost_fit, tau_fit
        return z_new, cost_new, tau

    z = clamp(initial / scale, 0)
    tau = config.parametric_step
    grad_prev = search = None
    try:
        cost = cost_of(z)
        record(0, z, cost, 0.0)
        history.termination = "max_iters"
        for iteration in range(1, config.max_iters + 1):
            if cost <= config.cost_atol:
                history.termination = "cost threshold"
                break
            grad = gradient(z)
            if not np.any(grad):
                history.termination = "zero gradient"
                break

            restart = grad_prev is None or (iteration - 1) % CalderonConstants.PARAMETRIC_RESTART == 0
            if restart:
                search = -grad
            else:
                beta = max(0.0, float(grad @ (grad - grad_prev)) / float(grad_prev @ grad_prev))
                search = -grad + beta * search
                if grad @ search >= 0:
                    search = -grad
                    restart = True
            step = line_search(z, cost, grad, search / np.linalg.norm(search), tau, iteration)
            if step is None and not restart:
                logger.debug("Iteration %d: conjugate direction failed, restarting", iteration)
                search = -grad
                step = line_search(z, cost, grad, search / np.linalg.norm(search), tau, iteration)
            if step is None:
                history.termination = "step below eps_r"
                break

            z_new, cost_new, tau = step
            change = float(np.max(np.abs(z_new - z)))
            z, cost, grad_prev = z_new, cost_new, grad
            record(iteration, z, cost, tau)
            logger.info(
                "Parametric iteration %d: cost %.6e, parameters %s",
                iteration, cost, np.array2string(z * scale, precision=4),
            )
            tau = min(2.0 * tau, CalderonConstants.PARAMETRIC_MAX_STEP)
            if change < config.eps_r:
                history.termination = "parameter change below eps_r"
                break
    except SolverError as e:
        e.history = history
        raise

    params = z * scale
    logger.info(
        "Parametric fit finished (%s): center (%.4f, %.4f), radius %.4f, k_disk %.4f",
        history.termination, params[0], params[1], params[2], params[3],
    )
    return params, history
