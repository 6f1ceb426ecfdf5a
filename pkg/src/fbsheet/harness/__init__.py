"""Configuration, orchestration, regression and serialization around the numerical core."""

from .config import ExperimentConfig, load_config, parse_config
from .fitting import FitResult, ScalingFit, fit_exponent
from .runner import RunReport, run

__all__ = ["ExperimentConfig", "FitResult", "RunReport", "ScalingFit", "fit_exponent", "load_config", "parse_config", "run"]
