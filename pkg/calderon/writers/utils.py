"""
Utility functions for pycalderon writers
"""

import logging
import os
from typing import Optional

from ..constants import CalderonConstants
from ..exceptions import CalderonError

logger = logging.getLogger("calderon.writers.utils")


def format_float(value) -> str:
    """Shortest text that reads back to the same float."""
    return repr(float(value))


def format_optional(value) -> str:
    """Float text, or an empty field for None."""
    return "" if value is None else format_float(value)


def resolve_output_dir(explicit: Optional[str] = None, configured: Optional[str] = None) -> str:
    """Pick the output directory.

    An explicit (command-line) directory wins, then the CALDERON_OUTPUT_DIR
    environment variable, then the configured value, then the default.
    """
    env_value = os.environ.get(CalderonConstants.OUTPUT_DIR_ENV)
    for candidate in (explicit, env_value, configured):
        if candidate:
            return candidate
    return CalderonConstants.DEFAULT_OUTPUT_DIR


def ensure_dir(path: str) -> str:
    """Create ``path`` if needed and return it."""
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise CalderonError(f"Cannot create output directory {path}: {e}")
    return path


def ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        logger.debug("Creating directory %s", parent)
        ensure_dir(parent)
