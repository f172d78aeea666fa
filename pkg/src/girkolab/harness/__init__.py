"""Experiment configuration, execution and reporting."""

from .config import EXPERIMENT_KINDS, ExperimentConfig, load_config, validate_config
from .report import report
from .runner import SCHEMA_VERSION, RunSummary, run

__all__ = ["EXPERIMENT_KINDS", "ExperimentConfig", "load_config", "validate_config", "report", "run",
           "RunSummary", "SCHEMA_VERSION"]
