#!/usr/bin/env python3
"""
Development helper for pycalderon.

Usage:
    python dev.py test                  # Full suite
    python dev.py test --fast           # Skip end-to-end inversions
    python dev.py test --file adjoint   # tests/test_adjoint.py only
    python dev.py test --coverage       # HTML + terminal coverage of calderon/
    python dev.py smoke                 # Exercise each CLI subcommand once
    python dev.py lint                  # flake8
    python dev.py clean                 # Caches, coverage and run outputs
"""

import argparse
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent

# Generated files and directories removed by `clean`, relative to ROOT
CLEAN_GLOBS = ["**/__pycache__", "**/*.pyc", "**/.pytest_cache", "htmlcov", ".coverage", "calderon-output"]


def run(cmd, description):
    """Run cmd (an argument list) from the repository root; True on success."""
    print(f"🔄 {description}: {' '.join(cmd)}")
    result = subprocess.run(cmd, cwd=ROOT)
    if result.returncode != 0:
        print(f"❌ {description} failed with exit code {result.returncode}")
        return False
    return True


def cmd_test(args):
    cmd = [sys.executable, "-m", "pytest"]
    if args.file:
        target = ROOT / "tests" / f"test_{args.file}.py"
        if not target.exists():
            print(f"❌ No test module {target.relative_to(ROOT)}")
            return False
        cmd.append(str(target.relative_to(ROOT)))
    if args.fast:
        cmd += ["-m", "not slow"]
    if args.coverage:
        cmd += ["--cov=calderon", "--cov-report=html", "--cov-report=term"]
    return run(cmd, "Tests")


def cmd_smoke(args):
    """One cheap invocation per subcommand, written to a scratch directory."""
    with tempfile.TemporaryDirectory(prefix="calderon-smoke-") as out:
        cli = [sys.executable, str(ROOT / "pycalderon")]
        checks = [
            (["mesh", "--box", "0,0:1,1", "--div", "8,8", "--output", f"{out}/square.mesh"], "mesh"),
            (["oned-demo", "--output", out], "oned-demo"),
            (["forward", "--preset", "three-region-2d", "--output", out], "forward"),
            (["gradcheck", "--preset", "square-constant", "--samples", "3", "--output", out], "gradcheck"),
            (["invert", "--preset", "square-gaussian", "--max-iters", "2", "--output", out], "invert"),
        ]
        failed = [name for argv, name in checks if not run(cli + argv, f"Smoke {name}")]
    if failed:
        print(f"❌ Smoke checks failed: {', '.join(failed)}")
        return False
    print("✅ All smoke checks passed")
    return True


def cmd_lint(args):
    return run([sys.executable, "-m", "flake8", "--max-line-length=120", "calderon", "tests", "dev.py"], "Lint")


def cmd_clean(args):
    print("🧹 Cleaning generated files...")
    for pattern in CLEAN_GLOBS:
        for path in ROOT.glob(pattern):
            if path.is_dir():
                shutil.rmtree(path)
            else:
                path.unlink()
            print(f"   Removed {path.relative_to(ROOT)}")
    print("✅ Clean")
    return True


COMMANDS = {
    "test": cmd_test,
    "smoke": cmd_smoke,
    "lint": cmd_lint,
    "clean": cmd_clean,
}


def main():
    parser = argparse.ArgumentParser(description="Development helper for pycalderon")
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    test_parser = subparsers.add_parser("test", help="Run the pytest suite")
    test_parser.add_argument("--file", help="Module name, e.g. 'solver' for tests/test_solver.py")
    test_parser.add_argument("--fast", action="store_true", help="Deselect tests marked slow")
    test_parser.add_argument("--coverage", action="store_true", help="Collect coverage for calderon/")

    subparsers.add_parser("smoke", help="Run each CLI subcommand once")
    subparsers.add_parser("lint", help="Run flake8")
    subparsers.add_parser("clean", help="Remove caches and run outputs")

    args = parser.parse_args()
    if not args.command:
        parser.print_help()
        return 1
    return 0 if COMMANDS[args.command](args) else 1


if __name__ == "__main__":
    sys.exit(main())
