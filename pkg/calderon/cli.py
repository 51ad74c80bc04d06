"""
Command-line front end for pycalderon.

Usage:
    pycalderon mesh --box 0,0:1,1 --div 16,16 --output square.mesh
    pycalderon forward --preset three-region-2d
    pycalderon gradcheck --preset square-constant --samples 10
    pycalderon invert --preset square-gaussian --dofs 25
    pycalderon oned-demo --seed 3

Exit codes: 0 success, 1 validation error, 2 solver failure, 3 failed
gradient check.
"""

import argparse
import logging
import sys
from dataclasses import replace
from typing import List, Optional

from .config import (
    ErrorCode,
    ExperimentConfig,
    ExperimentMode,
    GradientMode,
    parse_dofs,
    parse_int_vector,
    parse_vector,
)
from .constants import CalderonConstants
from .exceptions import CalderonError
from .experiment import ExperimentResult, ExperimentRunner
from .presets import get_preset, list_presets

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class CalderonArgumentParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with the validation code.

    argparse exits with 2 by default, which pycalderon reserves for solver
    failures.
    """

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ErrorCode.VALIDATION.value, f"{self.prog}: error: {message}\n")


def parse_box(value: str):
    """'0,0,0:1,1,0.05' -> ((0, 0, 0), (1, 1, 0.05))."""
    if value.count(":") != 1:
        raise CalderonError(f"--box must be LOWER:UPPER, got '{value}'")
    lower, upper = value.split(":")
    try:
        return parse_vector(lower, "lower corner"), parse_vector(upper, "upper corner")
    except ValueError as e:
        raise CalderonError(f"Invalid --box: {e}") from e


def load_config(runner: ExperimentRunner, args) -> ExperimentConfig:
    """Resolve --config / --preset and apply command-line overrides."""
    if args.config and args.preset:
        raise CalderonError("Use either --config or --preset, not both")
    if args.config:
        config = runner.parser.parse_config_file(args.config)
        if args.measurements is not None:
            if not 1 <= args.measurements <= len(config.measurements):
                raise CalderonError(
                    f"--measurements must be between 1 and {len(config.measurements)}"
                )
            config = replace(config, measurements=config.measurements[: args.measurements])
    elif args.preset:
        config = get_preset(args.preset, measurements=args.measurements, slab=args.slab)
    else:
        raise CalderonError(f"Need --config or --preset ({', '.join(list_presets())})")

    descent = {}
    if getattr(args, "k0", None) is not None:
        descent["k0"] = args.k0
    if getattr(args, "max_iters", None) is not None:
        descent["max_iters"] = args.max_iters
    if getattr(args, "alpha", None) is not None:
        descent["alpha"] = args.alpha
    if getattr(args, "gradient", None) is not None:
        descent["gradient_mode"] = GradientMode(args.gradient)

    overrides = {}
    try:
        if descent:
            overrides["descent"] = replace(config.descent, **descent)
        if args.dofs is not None:
            overrides["dofs"] = parse_dofs(args.dofs, config.domain.dim)
        if args.seed is not None:
            overrides["seed"] = args.seed
        if getattr(args, "snapshot_every", None) is not None:
            overrides["snapshot_every"] = args.snapshot_every
        return replace(config, **overrides) if overrides else config
    except ValueError as e:
        raise CalderonError(f"Invalid option: {e}") from e


def print_result(result: ExperimentResult) -> None:
    print(f"experiment: {result.name} ({result.mode.value})")
    for key, value in result.summary.items():
        if key == "rows":
            continue
        print(f"{key}: {value}")
    print(f"output: {result.output_dir}")
    for path in result.artifacts:
        print(f"  {path}")


def cmd_mesh(runner: ExperimentRunner, args) -> int:
    lower, upper = parse_box(args.box)
    try:
        divisions = parse_int_vector(args.div, "--div")
    except ValueError as e:
        raise CalderonError(str(e)) from e
    mesh = runner.generate_mesh(lower, upper, divisions, args.output)
    print(f"{args.output}: {mesh.n_nodes} nodes, {mesh.n_elements} elements, {mesh.n_faces} boundary faces")
    return 0


def cmd_forward(runner: ExperimentRunner, args) -> int:
    config = load_config(runner, args)
    result = runner.run_forward(replace(config, mode=ExperimentMode.FORWARD))
    print_result(result)
    return 0


def cmd_gradcheck(runner: ExperimentRunner, args) -> int:
    config = load_config(runner, args)
    report = runner.gradcheck(
        config, samples=args.samples, threshold=args.threshold, corrupt=args.corrupt_gradient
    )
    print(f"checked: {report.ids.size}")
    print(f"max_rel_error: {report.max_error:.3e}")
    print(f"report: {report.artifacts[0]}")
    if not report.passed:
        print(
            f"Error: gradient check failed, max relative error {report.max_error:.3e} "
            f"exceeds {report.threshold:.1e}",
            file=sys.stderr,
        )
        return ErrorCode.ACCEPTANCE_FAILURE.value
    return 0


def cmd_invert(runner: ExperimentRunner, args) -> int:
    config = load_config(runner, args)
    if config.mode == ExperimentMode.ONED:
        return cmd_oned_demo(runner, args, config)
    print_result(runner.run(config))
    return 0


def cmd_oned_demo(runner: ExperimentRunner, args, config: Optional[ExperimentConfig] = None) -> int:
    if config is None:
        config = get_preset("oned-demo")
        if args.seed is not None:
            config = replace(config, seed=args.seed)
    result = runner.run_oned(config)
    print("profile,k_values,resistance,f_c,u_breakpoints")
    for row in result.summary["rows"]:
        print(",".join(row))
    return 0


def add_output_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--output",
        help=f"Output directory (overrides ${CalderonConstants.OUTPUT_DIR_ENV} and the config file)",
    )


def add_experiment_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", choices=list_presets(), help="Preset experiment")
    parser.add_argument("--config", help="Experiment configuration file")
    parser.add_argument("--measurements", type=int, help="Number of measurements to use")
    parser.add_argument("--dofs", help="Design variables: 'element', a region count (25, 49, 125) or NxM[xK]")
    parser.add_argument("--slab", action="store_true", help="Run square presets on a 3-D slab")
    parser.add_argument("--seed", type=int, help="Random seed")
    add_output_argument(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = CalderonArgumentParser(
        prog="pycalderon",
        description="Finite element experiments for the inverse conductivity problem",
    )
    parser.add_argument(
        "--log-level", default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Logging level (default: WARNING)",
    )
    parser.add_argument("--version", action="version", version=ExperimentRunner.VERSION)
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    mesh_parser = subparsers.add_parser("mesh", help="Generate a box mesh file")
    mesh_parser.add_argument("--box", required=True, help="LOWER:UPPER corners, e.g. 0,0:1,1")
    mesh_parser.add_argument("--div", required=True, help="Divisions per axis, e.g. 16,16")
    mesh_parser.add_argument("--output", default="box.mesh", help="Mesh file to write")

    forward_parser = subparsers.add_parser("forward", help="Forward solves with the target conductivity")
    add_experiment_arguments(forward_parser)

    gradcheck_parser = subparsers.add_parser("gradcheck", help="Compare adjoint and finite-difference gradients")
    add_experiment_arguments(gradcheck_parser)
    gradcheck_parser.add_argument("--samples", type=int, default=CalderonConstants.GRADCHECK_SAMPLES,
                                  help="Elements to sample")
    gradcheck_parser.add_argument("--threshold", type=float, default=CalderonConstants.GRADCHECK_THRESHOLD,
                                  help="Maximum accepted relative error")
    gradcheck_parser.add_argument("--k0", type=float, help="Mean conductivity of the random check point")
    gradcheck_parser.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)

    invert_parser = subparsers.add_parser("invert", help="Recover a conductivity from boundary data")
    add_experiment_arguments(invert_parser)
    invert_parser.add_argument("--workers", type=int, help="Threads for per-measurement solves")
    invert_parser.add_argument("--k0", type=float, help="Initial constant conductivity")
    invert_parser.add_argument("--max-iters", type=int, help="Iteration cap")
    invert_parser.add_argument("--alpha", type=float, help="Initial step length")
    invert_parser.add_argument("--gradient", choices=[m.value for m in GradientMode], help="Gradient source")
    invert_parser.add_argument("--snapshot-every", type=int, help="Write k snapshots every N iterations")

    oned_parser = subparsers.add_parser("oned-demo", help="Print the 1-D non-uniqueness family as CSV")
    oned_parser.add_argument("--seed", type=int, help="Seed of the random family member")
    add_output_argument(oned_parser)
    return parser


COMMANDS = {
    "mesh": cmd_mesh,
    "forward": cmd_forward,
    "gradcheck": cmd_gradcheck,
    "invert": cmd_invert,
    "oned-demo": cmd_oned_demo,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return ErrorCode.VALIDATION.value

    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    output_dir = None if args.command == "mesh" else args.output
    runner = ExperimentRunner(
        log_level=args.log_level, output_dir=output_dir, max_workers=getattr(args, "workers", None)
    )

    try:
        return COMMANDS[args.command](runner, args)
    except CalderonError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.code.value
    except KeyboardInterrupt:
        print("Interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
