"""Exception hierarchy shared by every module."""


class FBSheetError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(FBSheetError, ValueError):
    """An argument lies outside the region where the quantity is defined."""


class ArityError(FBSheetError, ValueError):
    """Wrong number of coordinates / empty input."""


class DegenerateInputError(FBSheetError, ValueError):
    """Input is formally valid but degenerate (duplicated points, zero gaps)."""


class NumericalError(FBSheetError, ArithmeticError):
    """A numerical routine failed to reach the requested accuracy.

    ``achieved`` carries the error estimate (or jitter level) reached before
    giving up.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ConfigError(FBSheetError, ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class InsufficientReplicasError(FBSheetError, ValueError):
    """A Monte Carlo average came out nonpositive; more replicas are needed."""
