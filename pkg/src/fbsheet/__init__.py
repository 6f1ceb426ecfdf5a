"""Simulation and verification toolkit for anisotropic fractional Brownian sheets."""

from .errors import ArityError, ConfigError, DegenerateInputError, DomainError, FBSheetError, NumericalError
from .field_model import Box, HurstVector, fbs_cov, kappa, liouville_cov, validate_hurst
from .gaussian_engine import FieldSample, Grid, sample_field
from .rng import SeedSpec

__version__ = "0.1.0"

__all__ = [
    "ArityError", "Box", "ConfigError", "DegenerateInputError", "DomainError", "FBSheetError",
    "FieldSample", "Grid", "HurstVector", "NumericalError", "SeedSpec", "fbs_cov", "kappa",
    "liouville_cov", "sample_field", "validate_hurst",
]
