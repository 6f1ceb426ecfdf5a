"""Power-law regression on log-log axes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    stderr: float

    def to_json(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "stderr": self.stderr}


def fit_exponent(pairs: Sequence[tuple], weights: Sequence[float] | None = None) -> FitResult:
    """Weighted least squares of ``log value`` on ``log r``.

    ``stderr`` is the usual standard error of the slope, with the residual
    variance estimated from the weighted residuals (``n - 2`` degrees of
    freedom).  Weights are relative; ``None`` means equal weights.
    """
    if len(pairs) < 3:
        raise DomainError("need at least three (r, value) pairs")
    r = np.array([p[0] for p in pairs], dtype=float)
    v = np.array([p[1] for p in pairs], dtype=float)
    if np.any(r <= 0) or np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise DomainError("radii and values must be positive and finite")
    w = np.ones_like(r) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != r.shape or np.any(w <= 0):
        raise DomainError("need one positive weight per pair")
    x, y = np.log(r), np.log(v)
    xm = np.sum(w * x) / np.sum(w)
    ym = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xm) ** 2)
    if sxx == 0:
        raise DomainError("radii must not all be equal")
    slope = float(np.sum(w * (x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - intercept - slope * x
    sigma2 = float(np.sum(w * resid**2)) / (r.size - 2)
    return FitResult(slope, intercept, math.sqrt(sigma2 / sxx))


def slope_sampling_stderr(radii: Sequence[float], values: Sequence[float], standard_errors: Sequence[float]) -> float:
    """Standard error of the unweighted log-log slope due to noise in ``values``.

    Delta method: ``log v_k`` has standard error ``se_k / v_k`` and the slope is
    the linear combination ``sum_k c_k log v_k`` with ``c_k = (x_k - mean x) / Sxx``.
    Unlike :attr:`FitResult.stderr` this does not rely on residual scatter, so
    it stays meaningful with three or four radii.
    """
    x = np.log(np.asarray(radii, dtype=float))
    rel = np.asarray(standard_errors, dtype=float) / np.asarray(values, dtype=float)
    c = (x - x.mean()) / np.sum((x - x.mean()) ** 2)
    return float(math.sqrt(np.sum(c**2 * rel**2)))


@dataclass(frozen=True)
class ScalingFit:
    """A fitted power law ``value ~ r^slope`` together with the data behind it.

    ``values`` are per-radius summaries (means or medians, see ``summary``);
    ``expected`` is the exponent the fit is compared with.
    """

    name: str
    radii: tuple
    values: tuple
    fit: FitResult
    expected: float
    summary: str = "mean"
    extra: dict = field(default_factory=dict)

    @property
    def slope(self) -> float:
        return self.fit.slope

    @property
    def stderr(self) -> float:
        return self.fit.stderr

    def within(self, tol: float) -> bool:
        return abs(self.slope - self.expected) <= tol

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "radii": list(self.radii),
            "values": list(self.values),
            "summary": self.summary,
            **self.fit.to_json(),
            "expected": self.expected,
            **self.extra,
        }
