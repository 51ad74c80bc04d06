"""
Configuration data structures for Calderon problem experiments.

This module defines the dataclasses that describe a run (domain, target
conductivity, measurement sources, solver and descent settings) together with
the enums used to select targets, smoothing schemes and gradient paths.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

from .constants import CalderonConstants


class ErrorCode(Enum):
    """Error classification codes; the value is the CLI exit code.

    Attributes:
        VALIDATION: Invalid input, configuration or file contents
        SOLVER_FAILURE: Linear solve failed or diverged
        ACCEPTANCE_FAILURE: A gradient check exceeded its threshold
    """

    VALIDATION = 1
    SOLVER_FAILURE = 2
    ACCEPTANCE_FAILURE = 3


class TargetKind(Enum):
    """Families of target conductivity distributions."""

    CONSTANT = "constant"
    LINEAR = "linear"
    GAUSSIAN = "gaussian"
    DISK = "disk"
    PIECEWISE_1D = "piecewise-1d"
    THREE_REGION_2D = "three-region-2d"


class SmoothingKind(Enum):
    """Gradient (or conductivity) smoothing schemes."""

    NONE = "none"
    SPEA = "spea"
    H1 = "h1"
    PSEUDO_LAPLACIAN = "pseudo_laplacian"


class SmoothingTarget(Enum):
    """What the smoother is applied to during descent."""

    GRADIENT = "gradient"
    CONDUCTIVITY = "conductivity"


class GradientMode(Enum):
    """How descent obtains its gradient."""

    ADJOINT = "adjoint"
    FD = "fd"


class ExperimentMode(Enum):
    """What an experiment runs."""

    DESCENT = "descent"
    PARAMETRIC = "parametric"
    FORWARD = "forward"
    ONED = "oned"


def parse_vector(value, name: str = "value") -> Tuple[float, ...]:
    """Parse a comma separated vector ('0.5,0.5') or pass a sequence through."""
    if isinstance(value, str):
        parts = [p for p in value.replace(" ", "").split(",") if p]
        if not parts:
            raise ValueError(f"{name} must not be empty")
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            raise ValueError(f"{name} must be a comma separated list of numbers: '{value}'")
    return tuple(float(v) for v in value)


def parse_int_vector(value, name: str = "value") -> Tuple[int, ...]:
    """Parse a comma separated integer vector ('20,20,1')."""
    floats = parse_vector(value, name)
    ints = tuple(int(round(v)) for v in floats)
    if any(abs(v - i) > 0 for v, i in zip(floats, ints)):
        raise ValueError(f"{name} must contain integers: '{value}'")
    return ints


def parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "yes", "true", "on"):
        return True
    if text in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"Not a boolean value: '{value}'")


def parse_dofs(value, dim: int) -> Optional[Tuple[int, ...]]:
    """Region lattice from 'element', a perfect-power count ('25', '125') or '5x5' / '5,5,5'.

    Returns None for one design variable per element.
    """
    if value is None:
        return None
    text = str(value).strip().lower()
    if text in ("element", "elements", "none", ""):
        return None
    if "x" in text or "," in text:
        lattice = parse_int_vector(text.replace("x", ","), "dofs")
        if len(lattice) != dim:
            raise ValueError(f"dofs lattice '{value}' does not match dimension {dim}")
        return lattice
    try:
        count = int(text)
    except ValueError:
        raise ValueError(f"dofs must be 'element', a region count or a lattice: '{value}'")
    side = int(round(count ** (1.0 / dim)))
    if side < 1 or side ** dim != count:
        raise ValueError(f"{count} regions do not form a {dim}-D lattice of equal sides")
    return (side,) * dim


@dataclass
class SolverConfig:
    """Linear solver settings for forward, adjoint and smoothing solves.

    Attributes:
        method: 'cg' (Jacobi-preconditioned CG) or 'direct' (sparse LU)
        rtol: Relative residual tolerance for CG
        maxiter_factor: CG iteration cap as a multiple of the node count
    """

    method: str = "cg"
    rtol: float = CalderonConstants.SOLVER_RTOL
    maxiter_factor: int = CalderonConstants.SOLVER_MAXITER_FACTOR

    def __post_init__(self):
        if self.method not in CalderonConstants.SOLVER_METHODS:
            raise ValueError(
                f"Unknown solver method '{self.method}', expected one of "
                f"{', '.join(CalderonConstants.SOLVER_METHODS)}"
            )
        if not self.rtol > 0:
            raise ValueError("Solver rtol must be positive")
        if self.maxiter_factor < 1:
            raise ValueError("Solver maxiter_factor must be at least 1")

    @classmethod
    def from_attributes(
        cls, attrs: Dict[str, str], base: Optional["SolverConfig"] = None
    ) -> "SolverConfig":
        """Create a SolverConfig from a SOLVER block, on top of ``base`` if given."""
        kwargs = {}
        for name, value in attrs.items():
            if name == "method":
                kwargs[name] = value
            elif name == "rtol":
                kwargs[name] = float(value)
            elif name == "maxiter_factor":
                kwargs[name] = int(value)
            else:
                raise ValueError(f"Unknown SOLVER attribute '{name}'")
        return replace(base, **kwargs) if base is not None else cls(**kwargs)


@dataclass
class DomainConfig:
    """Box domain and its structured subdivision.

    ``insulated_axes`` lists coordinate axes whose boundary faces are left out
    of the cost (the lateral faces of a thin slab standing in for a 2-D
    problem).
    """

    lower: Tuple[float, ...] = (0.0, 0.0)
    upper: Tuple[float, ...] = (1.0, 1.0)
    divisions: Tuple[int, ...] = (16, 16)
    insulated_axes: Tuple[int, ...] = ()

    def __post_init__(self):
        self.lower = parse_vector(self.lower, "lower")
        self.upper = parse_vector(self.upper, "upper")
        self.divisions = parse_int_vector(self.divisions, "divisions")
        self.insulated_axes = tuple(int(a) for a in self.insulated_axes)
        if not (len(self.lower) == len(self.upper) == len(self.divisions)):
            raise ValueError("Domain lower, upper and divisions must have equal length")
        if len(self.lower) not in (1, 2, 3):
            raise ValueError("Domain dimension must be 1, 2 or 3")
        if any(a < 0 or a >= len(self.lower) for a in self.insulated_axes):
            raise ValueError("insulated_axes out of range for the domain dimension")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @classmethod
    def from_attributes(cls, attrs: Dict[str, str]) -> "DomainConfig":
        if "divisions" not in attrs:
            raise ValueError("DOMAIN requires 'divisions'")
        return cls(
            lower=attrs.get("lower", "0,0"),
            upper=attrs.get("upper", "1,1"),
            divisions=attrs["divisions"],
            insulated_axes=parse_int_vector(attrs["insulated_axes"], "insulated_axes")
            if attrs.get("insulated_axes")
            else (),
        )


@dataclass
class TargetSpec:
    """Target conductivity description.

    Only the fields relevant to ``kind`` are used:
        constant: value
        linear: k = intercept - slope * x[axis]
        gaussian: k = base + amplitude * exp(-(|x - center| / radius)^2)
        disk: k_disk inside |x - center| <= radius, k_exte outside
        piecewise-1d / three-region-2d: values over intervals of x split at breakpoints
    """

    kind: TargetKind = TargetKind.CONSTANT
    value: float = 2.0
    intercept: float = 2.0
    slope: float = 1.0
    axis: int = 0
    center: Tuple[float, ...] = (0.5, 0.5)
    radius: float = 0.2
    amplitude: float = 4.0
    base: float = 1.0
    k_disk: float = 5.0
    k_exte: float = 1.0
    breakpoints: Tuple[float, ...] = ()
    values: Tuple[float, ...] = ()

    def __post_init__(self):
        if not isinstance(self.kind, TargetKind):
            self.kind = TargetKind(self.kind)
        self.center = parse_vector(self.center, "center")
        self.breakpoints = parse_vector(self.breakpoints, "breakpoints") if self.breakpoints else ()
        self.values = parse_vector(self.values, "values") if self.values else ()

        if self.kind == TargetKind.CONSTANT and not self.value > 0:
            raise ValueError("Constant target value must be positive")
        if self.kind == TargetKind.GAUSSIAN:
            if not self.radius > 0:
                raise ValueError("Gaussian radius must be positive")
            if not self.base > 0 or self.base + min(self.amplitude, 0.0) <= 0:
                raise ValueError("Gaussian target must stay positive")
        if self.kind == TargetKind.DISK:
            if not self.radius > 0:
                raise ValueError("Disk radius must be positive")
            if not (self.k_disk > 0 and self.k_exte > 0):
                raise ValueError("Disk conductivities must be positive")
        if self.kind in (TargetKind.PIECEWISE_1D, TargetKind.THREE_REGION_2D):
            if not self.values:
                self.values = (1.0, 10.1, 1.0)
                self.breakpoints = self.breakpoints or (1.0, 2.0)
            if len(self.values) != len(self.breakpoints) + 1:
                raise ValueError("Piecewise target needs one more value than breakpoints")
            if any(v <= 0 for v in self.values):
                raise ValueError("Piecewise target values must be positive")
            if any(b >= c for b, c in zip(self.breakpoints, self.breakpoints[1:])):
                raise ValueError("Piecewise breakpoints must be strictly increasing")

    @classmethod
    def from_attributes(cls, kind: str, attrs: Dict[str, str]) -> "TargetSpec":
        """Create a TargetSpec from a TARGET block's flat attribute dict."""
        kwargs = {"kind": TargetKind(kind)}
        for name in (
            "value", "intercept", "slope", "radius", "amplitude", "base", "k_disk", "k_exte",
        ):
            if name in attrs:
                kwargs[name] = float(attrs[name])
        if "axis" in attrs:
            kwargs["axis"] = int(attrs["axis"])
        for name in ("center", "breakpoints", "values"):
            if name in attrs:
                kwargs[name] = parse_vector(attrs[name], name)
        return cls(**kwargs)


@dataclass
class Source:
    """One localized source/sink a * exp(-|x - center|^2 / radius^2)."""

    center: Tuple[float, ...]
    radius: float = 0.5
    amplitude: float = 1.0

    def __post_init__(self):
        self.center = parse_vector(self.center, "source center")
        if not self.radius > 0:
            raise ValueError("Source radius must be positive")


@dataclass
class SourceSpec:
    """The sources that make up the Dirichlet data of one measurement."""

    id: int
    sources: List[Source] = field(default_factory=list)

    def __post_init__(self):
        if not self.sources:
            raise ValueError(f"Measurement {self.id} has no sources")


@dataclass
class DescentConfig:
    """Settings of the gradient-descent cycle.

    Attributes:
        alpha: Step length applied to the gradient density
        max_iters: Iteration cap
        smoothing: Smoother applied each iteration
        smoothing_target: Smooth the gradient (default) or k itself
        lambda_l: Length^2 parameter of H1 smoothing (None: mean h_fem^2)
        lambda_pl: Pseudo-Laplacian parameter
        use_relaxation: Solve smoothing systems by explicit relaxation
        dtau, relax_steps: Relaxation pseudo-time step and step count
        spea_passes: Passes of point/element/point averaging
        k_min: Conductivity clamp
        k0: Initial constant conductivity
        cost_rtol, cost_atol: Stop when cost <= max(cost_rtol * initial, cost_atol)
        eps_r: Relative design-parameter range for termination
        backtracking: Halve alpha while the cost increases
        max_backtracks: Halvings before giving up on an iteration
        alpha_growth: Factor applied to alpha after an accepted step (1 keeps
            the halved value); the grown step never exceeds alpha
        gradient_mode: Adjoint or finite-difference gradients
    """

    alpha: float = CalderonConstants.DEFAULT_ALPHA
    max_iters: int = CalderonConstants.DEFAULT_MAX_ITERS
    smoothing: SmoothingKind = SmoothingKind.PSEUDO_LAPLACIAN
    smoothing_target: SmoothingTarget = SmoothingTarget.GRADIENT
    lambda_l: Optional[float] = None
    lambda_pl: float = CalderonConstants.PSEUDO_LAPLACIAN_LAMBDA
    use_relaxation: bool = True
    dtau: float = CalderonConstants.RELAX_DTAU
    relax_steps: int = CalderonConstants.RELAX_STEPS
    spea_passes: int = CalderonConstants.SPEA_PASSES
    k_min: float = CalderonConstants.K_MIN
    k0: float = 1.0
    cost_rtol: float = 1e-10
    cost_atol: float = CalderonConstants.COST_ATOL
    eps_r: float = CalderonConstants.EPS_R
    backtracking: bool = True
    max_backtracks: int = CalderonConstants.MAX_BACKTRACKS
    alpha_growth: float = CalderonConstants.ALPHA_GROWTH
    gradient_mode: GradientMode = GradientMode.ADJOINT
    parametric_step: float = CalderonConstants.PARAMETRIC_STEP

    def __post_init__(self):
        if not isinstance(self.smoothing, SmoothingKind):
            self.smoothing = SmoothingKind(self.smoothing)
        if not isinstance(self.smoothing_target, SmoothingTarget):
            self.smoothing_target = SmoothingTarget(self.smoothing_target)
        if not isinstance(self.gradient_mode, GradientMode):
            self.gradient_mode = GradientMode(self.gradient_mode)
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.alpha_growth >= 1:
            raise ValueError("alpha_growth must be at least 1")
        if not self.k_min > 0:
            raise ValueError("k_min must be positive")
        if not self.k0 > 0:
            raise ValueError("k0 must be positive")
        if not self.eps_r > 0:
            raise ValueError("eps_r must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must not be negative")
        if self.relax_steps < 1 or self.spea_passes < 1:
            raise ValueError("relax_steps and spea_passes must be at least 1")

    @classmethod
    def from_attributes(
        cls, attrs: Dict[str, str], base: Optional["DescentConfig"] = None
    ) -> "DescentConfig":
        """Create a DescentConfig from a DESCENT block, on top of ``base`` if given."""
        floats = (
            "alpha", "lambda_l", "lambda_pl", "dtau", "k_min", "k0",
            "cost_rtol", "cost_atol", "eps_r", "parametric_step", "alpha_growth",
        )
        ints = ("max_iters", "relax_steps", "spea_passes", "max_backtracks")
        kwargs = {}
        for name, value in attrs.items():
            if name in floats:
                kwargs[name] = float(value)
            elif name in ints:
                kwargs[name] = int(value)
            elif name in ("use_relaxation", "backtracking"):
                kwargs[name] = parse_bool(value)
            elif name == "smoothing":
                kwargs[name] = SmoothingKind(value)
            elif name == "smoothing_target":
                kwargs[name] = SmoothingTarget(value)
            elif name == "gradient_mode":
                kwargs[name] = GradientMode(value)
            else:
                raise ValueError(f"Unknown DESCENT attribute '{name}'")
        return replace(base, **kwargs) if base is not None else cls(**kwargs)


@dataclass
class ExperimentConfig:
    """Everything needed to run one experiment end to end.

    ``dofs`` is None for one design variable per element, otherwise the
    region lattice divisions used for gradient projection / FD regions.
    ``parametric_initial`` holds (x0, y0, r0, k_disk) for parametric runs.
    """

    name: str = "custom"
    mode: ExperimentMode = ExperimentMode.DESCENT
    domain: DomainConfig = field(default_factory=DomainConfig)
    target: TargetSpec = field(default_factory=TargetSpec)
    measurements: List[SourceSpec] = field(default_factory=list)
    descent: DescentConfig = field(default_factory=DescentConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    dofs: Optional[Tuple[int, ...]] = None
    output_dir: Optional[str] = None
    seed: int = 0
    snapshot_every: int = 0
    parametric_initial: Optional[Tuple[float, float, float, float]] = None
    boundary_value: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.mode, ExperimentMode):
            self.mode = ExperimentMode(self.mode)
        if self.dofs is not None:
            self.dofs = tuple(int(d) for d in self.dofs)
            if len(self.dofs) != self.domain.dim or any(d < 1 for d in self.dofs):
                raise ValueError(
                    f"Region lattice {self.dofs} does not match domain dimension {self.domain.dim}"
                )
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must not be negative")
        if self.parametric_initial is not None:
            self.parametric_initial = parse_vector(self.parametric_initial, "initial")
            if len(self.parametric_initial) != 4:
                raise ValueError("Parametric initial point needs x0, y0, r0, k_disk")
        if self.mode in (ExperimentMode.DESCENT, ExperimentMode.PARAMETRIC) and not self.measurements:
            raise ValueError(f"Experiment '{self.name}' needs at least one measurement")
