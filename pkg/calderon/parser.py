"""
Experiment configuration file parser.

This module provides the ExperimentConfigParser class for parsing experiment
files and text into ExperimentConfig objects. The format is a plain-text
block grammar:

    # comment
    preset square-gaussian          # optional starting point
    seed = 7
    dofs 5x5

    DOMAIN {
        lower 0,0
        upper 1,1
        divisions 20,20
    }
    TARGET gaussian {
        center 0.5,0.5
        radius 0.2
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
        smoothing pseudo_laplacian
    }
    SOLVER {
        method cg
    }
    PARAMETRIC {
        initial 0.25,0.25,0.1,2
    }

Attributes are written 'key value' or 'key = value'. Blocks replace the
corresponding part of the preset; DESCENT and SOLVER attributes are merged
into it. Errors are reported with the line number of the offending text.
"""

import logging
from dataclasses import replace
from typing import Dict, List, Tuple

from .config import (
    DescentConfig,
    DomainConfig,
    ExperimentConfig,
    ExperimentMode,
    SolverConfig,
    Source,
    SourceSpec,
    TargetSpec,
    parse_dofs,
    parse_vector,
)
from .exceptions import CalderonError
from .presets import get_preset

GLOBAL_KEYS = (
    "preset", "name", "mode", "seed", "dofs", "output_dir",
    "snapshot_every", "measurements", "boundary", "slab",
)

Line = Tuple[int, str]


class ExperimentConfigParser:
    """Parser for experiment configuration files.

    Lines keep their original numbers through comment and blank-line
    removal, so every error can point at the source line.
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    def _strip_quotes(self, value: str) -> str:
        """Strip surrounding quotes from a value if present"""
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in ("'", '"'):
            return value[1:-1]
        return value

    def parse_config_file(self, filename: str) -> ExperimentConfig:
        """Parse an experiment configuration file.

        Raises:
            CalderonError: On file access errors or parsing failures
        """
        self.logger.info("Parsing experiment file: %s", filename)
        try:
            with open(filename, "r") as f:
                content = f.read()
        except OSError as e:
            raise CalderonError(f"Cannot read config file {filename}: {e}")
        return self.parse_config_text(content)

    def parse_config_text(self, content: str) -> ExperimentConfig:
        """Parse experiment configuration text.

        Raises:
            CalderonError: On parsing failures with line number context
        """
        lines: List[Line] = []
        for number, line in enumerate(content.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if line:
                lines.append((number, line))

        sections = self._parse_blocks(lines)
        try:
            config = self._build_config(sections)
        except CalderonError:
            raise
        except ValueError as e:
            self.logger.error("Configuration validation failed: %s", e)
            raise CalderonError(f"Invalid configuration: {e}") from e
        self.logger.info("Parsed experiment '%s' (%s)", config.name, config.mode.value)
        return config

    def _parse_blocks(self, lines: List[Line]) -> Dict:
        """Split lines into global attributes and top-level blocks."""
        sections = {"global": {}, "blocks": {}, "measurements": [], "lines": {}}
        i = 0
        while i < len(lines):
            number, line = lines[i]
            keyword = line.split()[0]
            if keyword in ("DOMAIN", "DESCENT", "SOLVER", "PARAMETRIC"):
                _, start, end = self._parse_block_generic(lines, i, keyword, named=False)
                attrs = {}
                self._parse_attributes_in_block(lines, start, end, attrs, keyword)
                self._store_block(sections, keyword, attrs, number)
                i = end + 1
            elif keyword == "TARGET":
                kind, start, end = self._parse_block_generic(lines, i, keyword, named=True)
                attrs = {}
                self._parse_attributes_in_block(lines, start, end, attrs, keyword)
                self._store_block(sections, keyword, (kind, attrs), number)
                i = end + 1
            elif keyword == "MEASUREMENT":
                i = self._parse_measurement_block(lines, i, sections["measurements"])
            elif line == "{" or line == "}":
                raise CalderonError(f"Unexpected brace at line {number}")
            else:
                key, value = self._parse_single_attribute_line(lines[i])
                if key not in GLOBAL_KEYS:
                    raise CalderonError(
                        f"Unknown setting '{key}' at line {number}; "
                        f"expected one of {', '.join(GLOBAL_KEYS)}"
                    )
                sections["global"][key] = value
                sections["lines"][key] = number
                i += 1
        return sections

    def _store_block(self, sections: Dict, keyword: str, value, number: int) -> None:
        if keyword in sections["blocks"]:
            raise CalderonError(f"Duplicate {keyword} block at line {number}")
        sections["blocks"][keyword] = value
        sections["lines"][keyword] = number

    def _parse_block_generic(
        self, lines: List[Line], start: int, block_type: str, named: bool
    ) -> Tuple[str, int, int]:
        """Locate a block's name and the lines between its braces.

        Handles the opening brace on the block line or on the next line, and
        nested blocks by counting braces.

        Returns:
            Tuple of (block_name, content_start_index, closing_brace_index)
        """
        number, line = lines[start]
        head = line[:-1].strip() if line.endswith("{") else line
        parts = head.split()
        expected = f"{block_type} <name> {{" if named else f"{block_type} {{"
        if len(parts) != (2 if named else 1):
            raise CalderonError(f"Malformed {block_type} line at {number}: '{line}' - expected '{expected}'")
        block_name = parts[1] if named else block_type

        if line.endswith("{"):
            content_start = start + 1
        elif start + 1 < len(lines) and lines[start + 1][1] == "{":
            content_start = start + 2
        else:
            raise CalderonError(f"Missing '{{' after {block_type} at line {number}")

        brace_count = 1
        i = content_start
        while i < len(lines) and brace_count > 0:
            content = lines[i][1]
            if content.endswith("{"):
                brace_count += 1
            elif content.endswith("}"):
                brace_count -= 1
            i += 1
        if brace_count != 0:
            raise CalderonError(f"Unmatched braces in {block_type} {block_name} starting at line {number}")
        return block_name, content_start, i - 1

    def _parse_single_attribute_line(self, line: Line) -> Tuple[str, str]:
        """Parse 'key value' or 'key = value'."""
        number, text = line
        if "=" in text:
            key, value = text.split("=", 1)
        else:
            parts = text.split(None, 1)
            if len(parts) != 2:
                raise CalderonError(f"Malformed attribute at line {number}: '{text}' - expected 'key value'")
            key, value = parts
        key = key.strip()
        value = self._strip_quotes(value)
        if not key or not value:
            raise CalderonError(f"Malformed attribute at line {number}: '{text}'")
        return key, value

    def _parse_attributes_in_block(
        self, lines: List[Line], start: int, end: int, attributes: Dict[str, str], block_type: str
    ) -> None:
        for i in range(start, end):
            number, text = lines[i]
            if text.endswith("{") or text == "}":
                raise CalderonError(f"Nested block not allowed in {block_type} at line {number}")
            key, value = self._parse_single_attribute_line(lines[i])
            if key in attributes:
                raise CalderonError(f"Duplicate attribute '{key}' in {block_type} at line {number}")
            attributes[key] = value

    def _parse_measurement_block(self, lines: List[Line], start: int, measurements: List) -> int:
        """Parse a MEASUREMENT block of SOURCE sub-blocks.

        Returns:
            Index of the line after the closing brace
        """
        number = lines[start][0]
        name, content_start, end = self._parse_block_generic(lines, start, "MEASUREMENT", named=True)
        try:
            measurement_id = int(name)
        except ValueError:
            raise CalderonError(f"Measurement id must be an integer at line {number}: '{name}'")

        sources = []
        i = content_start
        while i < end:
            src_number, text = lines[i]
            if not text.startswith("SOURCE"):
                raise CalderonError(f"Expected SOURCE block at line {src_number}, got '{text}'")
            head = text[:-1].strip() if text.endswith("{") else text
            parts = head.split()
            if len(parts) != 2:
                raise CalderonError(f"Malformed SOURCE line at {src_number}: expected 'SOURCE x,y {{'")
            attrs = {}
            if text.endswith("{") or (i + 1 < end and lines[i + 1][1] == "{"):
                _, s_start, s_end = self._parse_block_generic(lines, i, "SOURCE", named=True)
                self._parse_attributes_in_block(lines, s_start, s_end, attrs, "SOURCE")
                i = s_end + 1
            else:
                i += 1
            unknown = set(attrs) - {"radius", "amplitude"}
            if unknown:
                raise CalderonError(f"Unknown SOURCE attribute '{sorted(unknown)[0]}' at line {src_number}")
            try:
                sources.append(
                    Source(
                        center=parse_vector(parts[1], "source center"),
                        radius=float(attrs.get("radius", 0.5)),
                        amplitude=float(attrs.get("amplitude", 1.0)),
                    )
                )
            except ValueError as e:
                raise CalderonError(f"Invalid SOURCE at line {src_number}: {e}") from e

        try:
            measurements.append((number, SourceSpec(id=measurement_id, sources=sources)))
        except ValueError as e:
            raise CalderonError(f"Invalid MEASUREMENT at line {number}: {e}") from e
        return end + 1

    def _build_config(self, sections: Dict) -> ExperimentConfig:
        """Assemble an ExperimentConfig from parsed sections."""
        glob = sections["global"]
        blocks = sections["blocks"]
        line_of = sections["lines"]

        def at(key):
            return f" (line {line_of[key]})" if key in line_of else ""

        count = int(glob["measurements"]) if "measurements" in glob else None
        slab = glob.get("slab", "no").lower() in ("1", "yes", "true", "on")
        config = get_preset(glob["preset"], measurements=count, slab=slab) if "preset" in glob else None

        domain = config.domain if config else DomainConfig()
        target = config.target if config else TargetSpec()
        descent = config.descent if config else DescentConfig()
        solver = config.solver if config else SolverConfig()
        measurements = list(config.measurements) if config else []

        if "DOMAIN" in blocks:
            try:
                domain = DomainConfig.from_attributes(blocks["DOMAIN"])
            except ValueError as e:
                raise CalderonError(f"Invalid DOMAIN{at('DOMAIN')}: {e}") from e
        if "TARGET" in blocks:
            kind, attrs = blocks["TARGET"]
            try:
                target = TargetSpec.from_attributes(kind, attrs)
            except ValueError as e:
                raise CalderonError(f"Invalid TARGET{at('TARGET')}: {e}") from e
        if "DESCENT" in blocks:
            try:
                descent = DescentConfig.from_attributes(blocks["DESCENT"], base=descent)
            except ValueError as e:
                raise CalderonError(f"Invalid DESCENT{at('DESCENT')}: {e}") from e
        if "SOLVER" in blocks:
            try:
                solver = SolverConfig.from_attributes(blocks["SOLVER"], base=solver)
            except ValueError as e:
                raise CalderonError(f"Invalid SOLVER{at('SOLVER')}: {e}") from e
        if sections["measurements"]:
            ids = [spec.id for _, spec in sections["measurements"]]
            if len(set(ids)) != len(ids):
                number = sections["measurements"][-1][0]
                raise CalderonError(f"Duplicate measurement id at line {number}")
            measurements = [spec for _, spec in sections["measurements"]]

        parametric_initial = config.parametric_initial if config else None
        if "PARAMETRIC" in blocks:
            attrs = blocks["PARAMETRIC"]
            if set(attrs) - {"initial"}:
                raise CalderonError(f"Unknown PARAMETRIC attribute{at('PARAMETRIC')}")
            if "initial" in attrs:
                parametric_initial = parse_vector(attrs["initial"], "initial")

        mode = config.mode if config else ExperimentMode.DESCENT
        if "mode" in glob:
            mode = ExperimentMode(glob["mode"])
        dofs = config.dofs if config else None
        if "dofs" in glob:
            try:
                dofs = parse_dofs(glob["dofs"], domain.dim)
            except ValueError as e:
                raise CalderonError(f"Invalid dofs{at('dofs')}: {e}") from e

        fields = dict(
            name=glob.get("name", config.name if config else "custom"),
            mode=mode,
            domain=domain,
            target=target,
            measurements=measurements,
            descent=descent,
            solver=solver,
            dofs=dofs,
            output_dir=glob.get("output_dir", config.output_dir if config else None),
            seed=int(glob.get("seed", config.seed if config else 0)),
            snapshot_every=int(glob.get("snapshot_every", config.snapshot_every if config else 0)),
            parametric_initial=parametric_initial,
            boundary_value=glob.get("boundary", config.boundary_value if config else None),
        )
        if config is not None:
            return replace(config, **fields)
        return ExperimentConfig(**fields)
