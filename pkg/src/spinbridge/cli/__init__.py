"""Batch command-line front end."""

from .config import RunConfig, parse_config
from .runner import compare, run

__all__ = ["RunConfig", "compare", "parse_config", "run"]
