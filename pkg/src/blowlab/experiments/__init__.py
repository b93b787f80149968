"""Configured experiments with CSV, JSON, text and SVG output."""

from .config import KINDS, ConfigError, effective_config, load_config
from .report import emit_report
from .runner import run_experiment

__all__ = ["KINDS", "ConfigError", "effective_config", "load_config", "emit_report", "run_experiment"]
