"""Randomised identity, inequality and exponent-arithmetic suites.

Configurations are drawn from a ``numpy`` generator seeded by the caller, so a
suite run is reproducible.  Every draw yields :class:`CheckResult` objects;
:class:`SuiteResult` keeps the failures and a per-check summary.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .. import field_model as fm
from ..analytic import cuzick_identity_check
from ..errors import DomainError
from ..exponents import construct_weights, delta_threshold, dirichlet_integral, tau_index, weight_violations
from ..gaussian_engine import FBS, LIOUVILLE, CovModel, conditional_variance, det_cov_dual, slab_model, \
    variance_domination_check
from ..report import CheckResult

SUITES = ("identities", "inequalities", "exponents")

# coarse grid of Hurst values so the kappa cache is reused across draws
H_GRID = np.round(np.arange(0.1, 0.95, 0.05), 2)


@dataclass
class SuiteResult:
    name: str
    checks: list = field(default_factory=list)

    def add(self, result: CheckResult) -> None:
        self.checks.append(result)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if c.asserted and not c.passed]

    def summary(self) -> dict:
        out = {}
        for c in self.checks:
            s = out.setdefault(c.check_id, {"paper_ref": c.paper_ref, "count": 0, "failed": 0, "min_slack": math.inf})
            s["count"] += 1
            s["failed"] += int(c.asserted and not c.passed)
            s["min_slack"] = min(s["min_slack"], c.slack)
        return out

    def to_json(self) -> dict:
        return {
            "suite": self.name,
            "summary": {k: _finite(v) for k, v in self.summary().items()},
            "failures": [c.to_json() for c in self.failures],
        }


def _finite(d: dict) -> dict:
    return {k: (str(v) if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}


def _rel_check(check_id, ref, lhs, rhs, tol, inputs) -> CheckResult:
    allowed = tol * max(abs(lhs), abs(rhs), 1e-300)
    slack = allowed - abs(lhs - rhs)
    return CheckResult(check_id, ref, lhs, rhs, slack, bool(slack >= 0), True, inputs)


def _random_points(rng, n, N, lo=0.2, hi=2.0):
    pts = rng.uniform(lo, hi, size=(n, N))
    return pts


# --- identities ----------------------------------------------------------------

CUZICK_CASES = (
    ([[1.0]], (0.5,)),
    ([[0.7, 1.6]], (0.3, 0.8)),
    ([[1.0], [2.0]], (0.5,)),
    ([[1.0], [1.5]], (0.3,)),
    ([[0.6], [1.9]], (0.8,)),
    ([[1.0, 1.5], [2.0, 1.2]], (0.4, 0.7)),
    ([[0.5, 0.8], [1.2, 1.9]], (0.6, 0.6)),
)


def remainder_direct(s, t, H, eps, tol=fm.DEFAULT_TOL) -> float:
    """Sum of per-box axis-integral products over the remainder boxes of ``[0, s ^ t]``."""
    h = fm._hurst_array(H)
    m = np.minimum(s, t)
    total = 0.0
    for box, kind in fm.partition_boxes(eps, m):
        if kind != "remainder":
            continue
        total += math.prod(
            fm.axis_integral(hl, sl, tl, lo, hi, tol)[0]
            for hl, sl, tl, lo, hi in zip(h, s, t, box.lower, box.upper)
        )
    return total


def additivity_check(s, t, H, eps, tol=fm.DEFAULT_TOL) -> CheckResult:
    """Corner, slabs and directly integrated remainder boxes against the full Liouville covariance."""
    h = fm._hurst_array(H)
    s, t = np.asarray(s, float), np.asarray(t, float)
    parts = fm.component_cov(fm.RegionComponent("corner", eps), s, t, h, tol)
    parts += sum(fm.component_cov(fm.RegionComponent("slab", eps, l), s, t, h, tol) for l in range(h.size))
    parts += remainder_direct(s, t, h, eps, tol)
    full = fm.liouville_cov(s, t, h, tol)
    allowed = 10 * tol * max(abs(full), 1.0)
    slack = allowed - abs(parts - full)
    return CheckResult("decomposition-additivity", "disjoint-region decomposition of the Liouville sheet",
                       parts, full, slack, bool(slack >= 0), True,
                       {"s": s.tolist(), "t": t.tolist(), "H": h.tolist(), "eps": eps})


def self_similarity_check(A, s, t, H) -> CheckResult:
    h = fm._hurst_array(H)
    A = np.asarray(A, float)
    lhs = float(fm.fbs_cov(A * s, A * t, h))
    rhs = float(np.prod(A ** (2 * h)) * fm.fbs_cov(s, t, h))
    return _rel_check("self-similarity", "operator self-similarity of the covariance", lhs, rhs, 1e-12,
                      {"A": A.tolist(), "s": list(s), "t": list(t), "H": h.tolist()})


def identity_suite(seed: int = 0, n_det: int = 500, n_selfsim: int = 1000, n_additivity: int = 40) -> SuiteResult:
    rng = np.random.default_rng(seed)
    out = SuiteResult("identities")
    for _ in range(n_det):
        N = int(rng.integers(1, 4))
        n = int(rng.integers(2, 6))
        h = rng.choice(H_GRID, size=N)
        pts = _random_points(rng, n, N)
        model = FBS if rng.random() < 0.8 else LIOUVILLE
        chol, seq = det_cov_dual(pts, model, h)
        out.add(_rel_check("det-dual", "determinant as product of sequential conditional variances",
                           chol, seq, 1e-8, {"points": pts.tolist(), "H": h.tolist(), "model": model.kind}))
    for (pts, h), gamma in itertools.product(CUZICK_CASES, (0.0, 0.5, 1.0)):
        for model in (FBS, LIOUVILLE):
            out.add(cuzick_identity_check(pts, model, h, gamma))
    for alpha in (0.3, 0.5, 0.7):
        for a, r, s0 in ((1.0, 0.5, 0.25), (2.0, 0.1, 0.0), (0.5, 1.0, 0.1)):
            res = dirichlet_integral(2, a, r, s0, alpha)
            out.add(_rel_check("simplex-integral", "Gamma-function reduction of the ordered-simplex integral",
                               res.lhs, res.rhs_exact, 1e-6, {"n": 2, "a": a, "r": r, "s0": s0, "alpha": alpha}))
    for _ in range(n_additivity):
        N = int(rng.integers(1, 4))
        h = rng.choice(H_GRID, size=N)
        s = rng.uniform(0.5, 2.0, N)
        t = s.copy() if rng.random() < 0.5 else rng.uniform(0.5, 2.0, N)
        eps = float(rng.uniform(0.05, 0.45))
        out.add(additivity_check(s, t, h, eps))
    for _ in range(n_selfsim):
        N = int(rng.integers(1, 5))
        h = rng.uniform(0.05, 0.95, N)
        out.add(self_similarity_check(rng.uniform(0.1, 10.0, N), rng.uniform(0.0, 3.0, N),
                                      rng.uniform(0.0, 3.0, N), h))
    return out


# --- inequalities ----------------------------------------------------------------


def slab_bound_check(points, H, axis, eps, tol=fm.DEFAULT_TOL) -> CheckResult:
    """Conditional variance of a slab component at the last point against its certified lower bound.

    ``points`` must be sorted along ``axis``.
    """
    h = fm._hurst_array(H)
    pts = np.asarray(points, float)
    lhs = conditional_variance(len(pts) - 1, pts, slab_model(axis, eps, tol), h)
    rhs = fm.slab_lower_bound(axis, eps, pts[-1], float(pts[-2, axis]), h)
    slack = lhs - rhs
    allowed = (1e-9 + 10 * tol) * max(abs(lhs), abs(rhs), 1.0)
    return CheckResult("slab-bound", "certified lower bound for the slab conditional variance",
                       lhs, rhs, slack, bool(slack >= -allowed), True,
                       {"points": pts.tolist(), "H": h.tolist(), "axis": axis, "eps": eps})


def kappa_check(H) -> CheckResult:
    h = fm._hurst_array(H)
    k = fm.kappa(h)
    lhs = k.value**2
    rhs = float(np.prod(1.0 / (2 * h)))
    slack = lhs - rhs
    return CheckResult("kappa-single-point", "kappa^2 dominates prod 1/(2H)", lhs, rhs, slack,
                       bool(slack >= -10 * k.quad_error), True, {"H": h.tolist()})


def inequality_suite(seed: int = 0, n: int = 10_000, n_slab: int | None = None) -> SuiteResult:
    rng = np.random.default_rng(seed)
    out = SuiteResult("inequalities")
    for _ in range(n):
        N = int(rng.integers(1, 4))
        k = int(rng.integers(2, 5))
        h = rng.choice(H_GRID, size=N)
        pts = _random_points(rng, k, N, 0.3, 2.0)
        eps = float(rng.uniform(0.02, 0.95)) * float(pts.min())
        for res in variance_domination_check(pts, rng.normal(size=k), h, eps):
            out.add(res)
    for _ in range(n if n_slab is None else n_slab):
        N = int(rng.integers(1, 4))
        k = int(rng.integers(2, 5))
        h = rng.choice(H_GRID, size=N)
        axis = int(rng.integers(0, N))
        eps = float(rng.uniform(0.05, 0.25))
        pts = _random_points(rng, k, N, 0.3, 2.0)
        pts = pts[np.argsort(pts[:, axis], kind="stable")]
        out.add(slab_bound_check(pts, h, axis, eps))
    for hv in np.linspace(0.05, 0.95, 20):
        out.add(kappa_check([hv]))
    for hv in zip(np.linspace(0.05, 0.95, 20), np.linspace(0.95, 0.05, 20)[::3].tolist() * 3):
        out.add(kappa_check(hv))
    return out


# --- exponent arithmetic ---------------------------------------------------------------


def random_admissible(rng, max_axes: int = 5):
    """Random sorted ``H``, ``q`` inside the local-time regime and ``delta`` in ``(0, delta_tau)``."""
    N = int(rng.integers(1, max_axes + 1))
    h = np.sort(rng.uniform(0.05, 0.95, N))
    total = float(np.sum(1.0 / h))
    q = float(rng.uniform(0.0, total)) * (1 - 1e-9)
    d_tau = delta_threshold(h, q)
    delta = float(rng.uniform(0.0, d_tau))
    if delta == 0.0:
        delta = d_tau / 2
    return h, q, delta


def weights_check(h, q, delta) -> CheckResult:
    w = construct_weights(h, q, delta)
    bad = weight_violations(h, w)
    alpha = float(np.sum(1.0 / h[: w.tau]) - q)
    lhs = float(np.sum(np.asarray(w.eps) / h[: w.tau]))
    return CheckResult("holder-weights", "Hoelder weight construction invariants", lhs, alpha, abs(lhs - alpha),
                       not bad, True, {"H": list(map(float, h)), "q": q, "delta": delta},
                       {"violations": bad, "tau": w.tau})


def worked_example_checks() -> list:
    """The two-axis example with unequal indices: ``H = (0.4, 0.6)``, ``q = 3``, ``delta = 0.1``."""
    h = np.array([0.4, 0.6])
    w = construct_weights(h, 3.0, 0.1)
    inv1 = float(w.inv_p[0])
    expected = (1 / 0.9) * (1 / 1.2) - (0.1 / 0.9) * 3
    lhs = (1 - 0.1) * float(np.sum(h * 3.0 * w.inv_p))
    rhs = float(h[1] * 3.0 + 2 - np.sum(h[1] / h))
    return [
        _rel_check("worked-example-p1", "two-axis weight example, 1/p_1", inv1, expected, 1e-12, {"H": [0.4, 0.6]}),
        _rel_check("worked-example-equality", "two-axis weight example, equality case", lhs, rhs, 1e-12,
                   {"H": [0.4, 0.6]}),
    ]


def exponent_suite(seed: int = 0, n: int = 10_000) -> SuiteResult:
    rng = np.random.default_rng(seed)
    out = SuiteResult("exponents")
    for _ in range(n):
        h, q, delta = random_admissible(rng)
        out.add(weights_check(h, q, delta))
    for c in worked_example_checks():
        out.add(c)
    return out


def run_suite(name: str, seed: int = 0, scale: float = 1.0) -> SuiteResult:
    """Run one suite; ``scale`` shrinks the random-configuration counts (for quick checks)."""
    if name == "identities":
        return identity_suite(seed, max(1, int(500 * scale)), max(1, int(1000 * scale)), max(1, int(40 * scale)))
    if name == "inequalities":
        return inequality_suite(seed, max(1, int(10_000 * scale)))
    if name == "exponents":
        return exponent_suite(seed, max(1, int(10_000 * scale)))
    raise DomainError(f"unknown suite {name!r}")
