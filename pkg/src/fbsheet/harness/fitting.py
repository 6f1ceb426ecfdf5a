"""Re-export of the log-log regression used by the harness."""

from ..fitting import FitResult, ScalingFit, fit_exponent

__all__ = ["FitResult", "ScalingFit", "fit_exponent"]
