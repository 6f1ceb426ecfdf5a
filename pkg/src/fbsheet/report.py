"""Uniform result record for every identity / inequality / fit check."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field


def _clean(value):
    # JSON has no inf/nan; encode them as strings so reports stay valid JSON
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


@dataclass
class CheckResult:
    """One verdict.

    ``slack`` is a margin: the allowed error minus the observed one for
    identities, ``lhs - rhs`` for inequalities ``lhs >= rhs``.  Negative slack
    within the stated tolerance still passes for inequalities.
    ``asserted`` checks fail a run when ``passed`` is false; report-only checks
    (fitted constants, asymptotic ratios) never do.
    """

    check_id: str
    paper_ref: str
    lhs: float
    rhs: float
    slack: float
    passed: bool
    asserted: bool = True
    inputs: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        if not self.asserted:
            return "report"
        return "pass" if self.passed else "fail"

    def to_json(self) -> dict:
        out = asdict(self)
        out["verdict"] = self.verdict
        out["passed"] = bool(self.passed)
        return _clean(out)
