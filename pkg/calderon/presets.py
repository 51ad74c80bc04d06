"""
Experiment preset catalog.

Desk-scale versions of the standard recovery experiments: constant, linear,
Gaussian and disk conductivity on the unit square, a Gaussian in the unit
cube, the three-region illustration on [0, 3] x [0, 1], and the 1-D
non-uniqueness demo. Each preset is a factory returning a fresh
ExperimentConfig.
"""

from typing import Callable, Dict, List, Optional, Tuple

from .config import (
    DescentConfig,
    DomainConfig,
    ExperimentConfig,
    ExperimentMode,
    Source,
    SourceSpec,
    TargetKind,
    TargetSpec,
)
from .exceptions import CalderonError

SOURCE_RADIUS = 0.5

# One source (+1) and one sink (-1) per measurement
SQUARE_MEASUREMENTS: Dict[int, Tuple[Tuple[float, ...], Tuple[float, ...]]] = {
    1: ((0.5, 0.0), (0.5, 1.0)),
    2: ((0.0, 0.5), (1.0, 0.5)),
    3: ((0.0, 0.0), (1.0, 1.0)),
    4: ((1.0, 0.0), (0.0, 1.0)),
}

# Sources at opposite face centres; radius and amplitude as on the square
CUBE_MEASUREMENTS: Dict[int, Tuple[Tuple[float, ...], Tuple[float, ...]]] = {
    1: ((0.5, 0.5, 0.0), (0.5, 0.5, 1.0)),
    2: ((0.5, 0.0, 0.5), (0.5, 1.0, 0.5)),
    3: ((0.0, 0.5, 0.5), (1.0, 0.5, 0.5)),
}

SQUARE_DIVISIONS = 16
DISK_DIVISIONS = 20
CUBE_DIVISIONS = 8
SLAB_THICKNESS = 0.05
DISK_INITIAL = (0.25, 0.25, 0.1, 2.0)


def measurement_specs(table, count: int) -> List[SourceSpec]:
    """The first ``count`` source/sink pairs of a measurement table."""
    if not 1 <= count <= len(table):
        raise CalderonError(f"Measurement count must be between 1 and {len(table)}, got {count}")
    return [
        SourceSpec(
            id=i,
            sources=[
                Source(center=table[i][0], radius=SOURCE_RADIUS, amplitude=1.0),
                Source(center=table[i][1], radius=SOURCE_RADIUS, amplitude=-1.0),
            ],
        )
        for i in range(1, count + 1)
    ]


def square_domain(divisions: int = SQUARE_DIVISIONS, slab: bool = False) -> DomainConfig:
    """Unit square, or a one-layer slab of it with insulated z faces."""
    if slab:
        return DomainConfig(
            lower=(0.0, 0.0, 0.0),
            upper=(1.0, 1.0, SLAB_THICKNESS),
            divisions=(divisions, divisions, 1),
            insulated_axes=(2,),
        )
    return DomainConfig(lower=(0.0, 0.0), upper=(1.0, 1.0), divisions=(divisions, divisions))


def _square(name, target, measurements, slab, divisions=SQUARE_DIVISIONS,
            mode=ExperimentMode.DESCENT, **kwargs):
    return ExperimentConfig(
        name=name,
        mode=mode,
        domain=square_domain(divisions, slab),
        target=target,
        measurements=measurement_specs(SQUARE_MEASUREMENTS, measurements),
        **kwargs,
    )


def square_constant(measurements: int = 2, slab: bool = False) -> ExperimentConfig:
    return _square("square-constant", TargetSpec(kind=TargetKind.CONSTANT, value=2.0), measurements, slab)


def square_linear(measurements: int = 2, slab: bool = False) -> ExperimentConfig:
    target = TargetSpec(kind=TargetKind.LINEAR, intercept=2.0, slope=1.0, axis=0)
    return _square("square-linear", target, measurements, slab)


def square_gaussian(measurements: int = 2, slab: bool = False) -> ExperimentConfig:
    target = TargetSpec(
        kind=TargetKind.GAUSSIAN, center=(0.5, 0.5, SLAB_THICKNESS / 2), radius=0.2,
        amplitude=4.0, base=1.0,
    )
    return _square("square-gaussian", target, measurements, slab)


def square_disk(measurements: int = 2, slab: bool = False) -> ExperimentConfig:
    target = TargetSpec(kind=TargetKind.DISK, center=(0.5, 0.5), radius=0.25, k_disk=5.0, k_exte=1.0)
    return _square(
        "square-disk", target, measurements, slab, divisions=DISK_DIVISIONS,
        mode=ExperimentMode.PARAMETRIC, parametric_initial=DISK_INITIAL,
        descent=DescentConfig(max_iters=100),
    )


def cube_gaussian(measurements: int = 3, slab: bool = False) -> ExperimentConfig:
    if slab:
        raise CalderonError("cube-gaussian has no slab variant")
    n = CUBE_DIVISIONS
    return ExperimentConfig(
        name="cube-gaussian",
        domain=DomainConfig(lower=(0.0, 0.0, 0.0), upper=(1.0, 1.0, 1.0), divisions=(n, n, n)),
        target=TargetSpec(
            kind=TargetKind.GAUSSIAN, center=(0.5, 0.5, 0.05), radius=0.2, amplitude=4.0, base=1.0
        ),
        measurements=measurement_specs(CUBE_MEASUREMENTS, measurements),
    )


def three_region_2d(measurements: int = 1, slab: bool = False) -> ExperimentConfig:
    if slab:
        raise CalderonError("three-region-2d has no slab variant")
    return ExperimentConfig(
        name="three-region-2d",
        mode=ExperimentMode.FORWARD,
        domain=DomainConfig(lower=(0.0, 0.0), upper=(3.0, 1.0), divisions=(30, 10)),
        target=TargetSpec(
            kind=TargetKind.THREE_REGION_2D, breakpoints=(1.0, 2.0), values=(1.0, 10.1, 1.0)
        ),
        boundary_value="three-region",
    )


def oned_demo(measurements: int = 1, slab: bool = False) -> ExperimentConfig:
    return ExperimentConfig(
        name="oned-demo",
        mode=ExperimentMode.ONED,
        domain=DomainConfig(lower=(0.0,), upper=(1.0,), divisions=(4,)),
        target=TargetSpec(
            kind=TargetKind.PIECEWISE_1D, breakpoints=(0.25, 0.5, 0.75), values=(2.0, 2.0, 2.0 / 3.0, 2.0 / 3.0)
        ),
    )


PRESETS: Dict[str, Callable[..., ExperimentConfig]] = {
    "square-constant": square_constant,
    "square-linear": square_linear,
    "square-gaussian": square_gaussian,
    "square-disk": square_disk,
    "cube-gaussian": cube_gaussian,
    "three-region-2d": three_region_2d,
    "oned-demo": oned_demo,
}


def list_presets() -> List[str]:
    return sorted(PRESETS)


def get_preset(name: str, measurements: Optional[int] = None, slab: bool = False) -> ExperimentConfig:
    """Build a preset configuration.

    Raises:
        CalderonError: For unknown names or an unsupported measurement count
    """
    if name not in PRESETS:
        raise CalderonError(f"Unknown preset '{name}', expected one of: {', '.join(list_presets())}")
    factory = PRESETS[name]
    kwargs = {"slab": slab}
    if measurements is not None:
        kwargs["measurements"] = measurements
    try:
        return factory(**kwargs)
    except ValueError as e:
        raise CalderonError(f"Invalid preset '{name}': {e}") from e
