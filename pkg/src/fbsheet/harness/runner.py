"""Scenario pipeline: simulate, estimate, verify, fit.

Each replica is a pure function of ``(scenario, config, replica index)``; the
runner merges replica results in index order, so the report does not depend on
the worker count.  The report itself holds no timing; wall-clock figures go to
a separate file.
"""

from __future__ import annotations

import json
import math
import os
import platform
import time
from dataclasses import dataclass, field
from functools import lru_cache, partial
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..analytic import corner_first_moment, first_moment, histogram_expectation
from ..exponents import beta_and_dim
from ..field_model import Box
from ..gaussian_engine import Grid, kron_factors, sample_field
from ..local_time import LatticeSpec, occupation_histogram, max_local_time, oscillation_floor, oscillation_stats, \
    range_chain, restrict, OscillationRecord
from ..report import CheckResult
from ..rng import SeedSpec
from .config import ExperimentConfig, ScenarioSpec
from .fitting import fit_exponent
from .parallel import ordered_map
from .schemas import SCHEMA_VERSION

OUT_DIR_ENV = "FBSHEET_OUT_DIR"
REPLICA_COLUMNS = ("replica", "mass_error", "indicator_direct", "indicator_density", "value_at_x",
                   "max_local_time", "chain_lhs", "chain_rhs")


@lru_cache(maxsize=8)
def _factors(axes: tuple, H: tuple):
    grid = Grid(tuple(np.asarray(a) for a in axes))
    return grid, kron_factors(grid, H)


def _grid_for(spec: ScenarioSpec, cfg: ExperimentConfig) -> Grid:
    return Grid.uniform(spec.lower, spec.upper, cfg.cells_for(len(spec.H)))


def oscillation_radii(grid: Grid) -> tuple:
    """Center grid index and four dyadic radii that fit inside the grid around it."""
    center = tuple(a.size // 2 for a in grid.per_axis)
    reach = min(min(a[c] - a[0], a[-1] - a[c]) for a, c in zip(grid.per_axis, center))
    return center, tuple(reach / 2**k for k in range(4))


def replica_stats(spec: ScenarioSpec, cfg: ExperimentConfig, index: int) -> dict:
    """Per-replica numbers for one scenario; pure in its arguments."""
    grid = _grid_for(spec, cfg)
    grid, factors = _factors(tuple(tuple(a) for a in grid.per_axis), tuple(spec.H))
    seed = SeedSpec(cfg.master_seed, index)
    sample = sample_field(grid, spec.H, spec.d, seed, factors=factors)
    T = Box(spec.lower, spec.upper)
    w = cfg.bin_width_for(spec)
    ltf = occupation_histogram(sample, T, LatticeSpec(w, origin=-w / 2))
    # occupation formula for the indicator of the bin holding the first grid value
    vals, weights = restrict(sample, T)
    k = np.floor((vals + w / 2) / w)
    inside = np.all(k == k[0], axis=1)
    direct = float(np.sum(weights[inside]))
    density = ltf.value_at(vals[0]) * ltf.bin_volume
    lstar, _ = max_local_time(ltf)
    chain_lhs, chain_rhs = range_chain(sample, T, ltf)
    center, radii = oscillation_radii(grid)
    s = np.array([a[c] for a, c in zip(grid.per_axis, center)])
    osc = oscillation_stats(sample, s, radii)
    return {
        "replica": index,
        "mass_error": ltf.mass_error(),
        "indicator_direct": direct,
        "indicator_density": density,
        "value_at_x": ltf.value_at(np.zeros(spec.d)),
        "max_local_time": lstar,
        "chain_lhs": chain_lhs,
        "chain_rhs": chain_rhs,
        "osc_radii": osc.radii.tolist(),
        "osc": osc.sup_osc.tolist(),
    }


@dataclass
class ScenarioReport:
    spec: ScenarioSpec
    checks: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "scenario": self.spec.to_json(),
            "checks": [c.to_json() for c in self.checks],
            "fits": self.fits,
            "constants": self.constants,
        }


@dataclass
class RunReport:
    config: ExperimentConfig
    scenarios: list = field(default_factory=list)
    wall_clock: dict = field(default_factory=dict)

    @property
    def checks(self) -> list:
        return [c for s in self.scenarios for c in s.checks]

    @property
    def failed(self) -> list:
        return [c for c in self.checks if c.asserted and not c.passed]

    @property
    def ok(self) -> bool:
        return not self.failed

    def to_json(self) -> dict:
        asserted = [c for c in self.checks if c.asserted]
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "run-report",
            "config": self.config.to_json(),
            "scenarios": [s.to_json() for s in self.scenarios],
            "summary": {"asserted": len(asserted), "failed": len(self.failed), "ok": self.ok},
            "versions": {
                "fbsheet": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def _check(check_id, ref, lhs, rhs, slack, passed, asserted=True, **extra) -> CheckResult:
    return CheckResult(check_id, ref, float(lhs), float(rhs), float(slack), bool(passed), asserted, {}, extra)


def verify_scenario(spec: ScenarioSpec, cfg: ExperimentConfig, stats: list) -> ScenarioReport:
    rep = ScenarioReport(spec)
    tol = cfg.tolerances
    T = Box(spec.lower, spec.upper)
    vol = T.volume
    w = cfg.bin_width_for(spec)

    mass = max(abs(s["mass_error"]) for s in stats)
    rep.checks.append(_check("mass-conservation", "occupation measure has total mass equal to the box volume",
                             mass, tol["mass_rel"] * vol, tol["mass_rel"] * vol - mass, mass <= tol["mass_rel"] * vol))
    ind = max(abs(s["indicator_direct"] - s["indicator_density"]) for s in stats)
    rep.checks.append(_check("occupation-indicator", "occupation density formula for a bin indicator",
                             ind, 1e-12 * vol, 1e-12 * vol - ind, ind <= 1e-12 * vol))
    gap = min(s["chain_rhs"] - s["chain_lhs"] for s in stats)
    rep.checks.append(_check("max-local-time-chain", "box volume bounded by L* times the padded range",
                             max(s["chain_lhs"] for s in stats), min(s["chain_rhs"] for s in stats), gap, gap >= 0))
    mono = all(np.all(np.diff(s["osc"]) <= 0) for s in stats)
    rep.checks.append(_check("oscillation-monotone", "sup oscillation nondecreasing in the radius",
                             float(mono), 1.0, 0.0, mono))

    vals = np.array([s["value_at_x"] for s in stats])
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(vals.size))
    exact = first_moment(np.zeros(spec.d), T, spec.H, spec.d).value
    grid = _grid_for(spec, cfg)
    expected = histogram_expectation(grid.per_axis, T, spec.H, spec.d, -w / 2, w / 2)
    allowance = abs(expected - exact)
    gap = abs(mean - exact)
    limit = tol["moment_se"] * se + allowance
    rep.checks.append(_check("first-moment", "mean histogram local time at 0 matches the first moment",
                             mean, exact, limit - gap, gap <= limit, standard_error=se,
                             discretization_allowance=allowance, estimator_expectation=expected))

    prof = beta_and_dim(spec.H, spec.d)
    rep.constants["beta"] = prof.beta_tau
    rep.constants["tau"] = prof.tau
    rep.constants["bin_width"] = w
    radii = np.asarray(stats[0]["osc_radii"])
    med = np.median(np.array([s["osc"] for s in stats]), axis=0)
    if np.all(med > 0):
        fit = fit_exponent(list(zip(radii, med)))
        rep.fits["oscillation"] = {**fit.to_json(), "expected": float(min(spec.H))}
    h1 = float(min(spec.H))
    small = radii < math.exp(-math.e)
    if np.any(small):
        floors = [oscillation_floor(OscillationRecord(np.zeros(1), radii[small], np.asarray(s["osc"])[small]), h1)
                  for s in stats]
        rep.constants["oscillation_floor"] = float(min(floors))
    if cfg.radii:
        a = np.asarray(spec.lower)
        moments = [corner_first_moment(np.zeros(spec.d), a, r, spec.H, spec.d).value for r in cfg.radii]
        fit = fit_exponent(list(zip(cfg.radii, moments)))
        rep.fits["corner-first-moment"] = {**fit.to_json(), "expected": prof.beta_tau}
    return rep


def _write_csv(path: Path, rows: list, columns) -> None:
    lines = [",".join(columns)]
    for r in rows:
        lines.append(",".join(str(r[c]) if isinstance(r[c], int) else f"{r[c]:.17g}" for c in columns))
    path.write_text("\n".join(lines) + "\n")


def run(cfg: ExperimentConfig, out_dir: str | os.PathLike | None = None) -> RunReport:
    """Execute every scenario in ``cfg``; write artifacts when an output directory is known.

    The directory is ``out_dir``, else the ``FBSHEET_OUT_DIR`` environment
    variable, else ``cfg.out_dir``; with none of them nothing is written.
    """
    started = time.perf_counter()
    report = RunReport(cfg)
    target = out_dir or os.environ.get(OUT_DIR_ENV) or cfg.out_dir
    for spec in cfg.scenario_specs():
        t0 = time.perf_counter()
        stats = ordered_map(partial(replica_stats, spec, cfg), range(cfg.replicas), cfg.workers)
        rep = verify_scenario(spec, cfg, stats)
        report.scenarios.append(rep)
        report.wall_clock[spec.name] = time.perf_counter() - t0
        if target:
            sdir = Path(target) / spec.name
            sdir.mkdir(parents=True, exist_ok=True)
            _write_csv(sdir / "replicas.csv", stats, REPLICA_COLUMNS)
            grid = _grid_for(spec, cfg)
            grid, factors = _factors(tuple(tuple(a) for a in grid.per_axis), tuple(spec.H))
            sample = sample_field(grid, spec.H, spec.d, SeedSpec(cfg.master_seed, 0), factors=factors)
            w = cfg.bin_width_for(spec)
            ltf = occupation_histogram(sample, Box(spec.lower, spec.upper), LatticeSpec(w, origin=-w / 2))
            (sdir / "localtime.csv").write_text(ltf.to_csv())
            (sdir / "localtime.json").write_text(
                json.dumps({"schema_version": SCHEMA_VERSION, "kind": "localtime", **ltf.sidecar()},
                           indent=2, sort_keys=True) + "\n")
    report.wall_clock["total"] = time.perf_counter() - started
    if target:
        Path(target).mkdir(parents=True, exist_ok=True)
        (Path(target) / "report.json").write_text(report.dumps())
        (Path(target) / "timing.json").write_text(
            json.dumps({"schema_version": SCHEMA_VERSION, "kind": "timing", "wall_clock_s": report.wall_clock,
                        "execution": {"workers": cfg.workers, "out_dir": str(target)}},
                       indent=2, sort_keys=True) + "\n")
    return report
