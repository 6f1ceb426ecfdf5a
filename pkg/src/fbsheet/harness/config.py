"""Flat ``key = value`` experiment configuration with dotted sections.

Example::

    scenarios = brownian-sheet-baseline, custom
    field.H = 0.4, 0.6
    field.d = 1
    interval.lower = 1, 1
    interval.upper = 2, 2
    grid.cells = 48
    bins.width = auto
    run.replicas = 200
    run.seed = 20240601
    fit.radii = 0.25, 0.125, 0.0625, 0.03125

Lines starting with ``#`` are comments.  ``field.*`` and ``interval.*`` only
describe the ``custom`` scenario; named scenarios bring their own field.
Validation happens before any computation and reports the offending key.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError

SCENARIO_PRESETS = {
    "brownian-sheet-baseline": {"H": (0.5, 0.5), "d": 1, "lower": (1.0, 1.0), "upper": (2.0, 2.0)},
    "anisotropic-sheet": {"H": (0.4, 0.6), "d": 1, "lower": (1.0, 1.0), "upper": (2.0, 2.0)},
    "brownian-motion": {"H": (0.5,), "d": 1, "lower": (1.0,), "upper": (2.0,)},
}

DEFAULT_TOLERANCES = {"moment_se": 4.0, "mass_rel": 1e-12, "quad": 1e-8}


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    H: tuple
    d: int
    lower: tuple
    upper: tuple

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ExperimentConfig:
    scenarios: tuple = ()
    H: tuple | None = None
    d: int = 1
    lower: tuple | None = None
    upper: tuple | None = None
    cells: tuple = (48,)
    bin_width: float | None = None
    replicas: int = 200
    master_seed: int = 0
    workers: int = 1
    radii: tuple = ()
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    out_dir: str | None = None

    def scenario_specs(self) -> list:
        out = []
        for name in self.scenarios:
            if name == "custom":
                out.append(ScenarioSpec("custom", self.H, self.d, self.lower, self.upper))
            else:
                out.append(ScenarioSpec(name, **SCENARIO_PRESETS[name]))
        return out

    def cells_for(self, n_axes: int) -> tuple:
        return self.cells * n_axes if len(self.cells) == 1 else self.cells

    def bin_width_for(self, spec: ScenarioSpec) -> float:
        """Bin width, derived from the resolution coupling when not given."""
        cells = self.cells_for(len(spec.H))
        dt = max((hi - lo) / m for lo, hi, m in zip(spec.lower, spec.upper, cells))
        floor = 4 * dt ** min(spec.H)
        return floor if self.bin_width is None else self.bin_width

    def to_json(self, execution: bool = False) -> dict:
        """Echo of the settings; ``workers`` and ``out_dir`` only with ``execution=True``.

        Those two do not change any number, so reports leave them out to stay
        byte-identical across worker counts and destinations.
        """
        out = dataclasses.asdict(self)
        out["scenarios"] = list(self.scenarios)
        if not execution:
            del out["workers"], out["out_dir"]
        return out


def _floats(path: str, raw: str) -> tuple:
    try:
        vals = tuple(float(x) for x in raw.split(","))
    except ValueError:
        raise ConfigError(path, f"expected comma-separated numbers, got {raw!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(path, "values must be finite")
    return vals


def _int(path: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(path, f"expected an integer, got {raw!r}") from None


def _ints(path: str, raw: str) -> tuple:
    return tuple(_int(path, x.strip()) for x in raw.split(","))


def _float(path: str, raw: str) -> float:
    vals = _floats(path, raw)
    if len(vals) != 1:
        raise ConfigError(path, "expected a single number")
    return vals[0]


def _names(path: str, raw: str) -> tuple:
    return tuple(x.strip() for x in raw.split(",") if x.strip())


_KEYS = {
    "scenarios": ("scenarios", _names),
    "field.H": ("H", _floats),
    "field.d": ("d", _int),
    "interval.lower": ("lower", _floats),
    "interval.upper": ("upper", _floats),
    "grid.cells": ("cells", _ints),
    "bins.width": ("bin_width", lambda p, r: None if r == "auto" else _float(p, r)),
    "run.replicas": ("replicas", _int),
    "run.seed": ("master_seed", _int),
    "run.workers": ("workers", _int),
    "fit.radii": ("radii", _floats),
    "output.dir": ("out_dir", lambda p, r: r),
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a configuration; raises :class:`ConfigError` on the first problem."""
    values: dict = {}
    tolerances = dict(DEFAULT_TOLERANCES)
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise ConfigError(key, "given more than once")
        seen.add(key)
        if key.startswith("tolerance."):
            name = key.split(".", 1)[1]
            if name not in DEFAULT_TOLERANCES:
                raise ConfigError(key, "unknown tolerance")
            tolerances[name] = _float(key, raw)
            continue
        if key not in _KEYS:
            raise ConfigError(key, "unknown key")
        attr, conv = _KEYS[key]
        values[attr] = conv(key, raw)
    cfg = ExperimentConfig(tolerances=tolerances, **values)
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def _validate_field(prefix: str, spec: ScenarioSpec) -> None:
    if spec.H is None:
        raise ConfigError(f"{prefix}H", "required for the custom scenario")
    if not all(0 < h < 1 for h in spec.H):
        raise ConfigError(f"{prefix}H", "Hurst indices must lie in (0, 1)")
    if spec.d < 1:
        raise ConfigError(f"{prefix}d", "must be a positive integer")
    if spec.d >= sum(1 / h for h in spec.H):
        raise ConfigError(f"{prefix}d", "local time needs d < sum 1/H")
    if spec.lower is None or spec.upper is None:
        raise ConfigError("interval", "lower and upper corners are required for the custom scenario")
    if len(spec.lower) != len(spec.H) or len(spec.upper) != len(spec.H):
        raise ConfigError("interval", "corners must have one coordinate per Hurst index")
    if any(lo <= 0 for lo in spec.lower):
        raise ConfigError("interval.lower", "interval must lie in (0, inf)^N")
    if any(hi <= lo for lo, hi in zip(spec.lower, spec.upper)):
        raise ConfigError("interval.upper", "upper corner must exceed the lower one")


def validate(cfg: ExperimentConfig) -> None:
    for name in cfg.scenarios:
        if name != "custom" and name not in SCENARIO_PRESETS:
            raise ConfigError("scenarios", f"unknown scenario {name!r}")
    if cfg.replicas < 2:
        raise ConfigError("run.replicas", "need at least two replicas")
    if cfg.workers < 1:
        raise ConfigError("run.workers", "must be at least 1")
    if not 0 <= cfg.master_seed < 2**64:
        raise ConfigError("run.seed", "must be an unsigned 64-bit integer")
    if any(c < 2 for c in cfg.cells):
        raise ConfigError("grid.cells", "need at least two cells per axis")
    if cfg.bin_width is not None and cfg.bin_width <= 0:
        raise ConfigError("bins.width", "must be positive")
    if any(r <= 0 for r in cfg.radii):
        raise ConfigError("fit.radii", "radii must be positive")
    if cfg.radii and len(cfg.radii) < 3:
        raise ConfigError("fit.radii", "need at least three radii for a fit")
    for name, tol in cfg.tolerances.items():
        if tol <= 0:
            raise ConfigError(f"tolerance.{name}", "must be positive")
    for spec in cfg.scenario_specs():
        prefix = "field." if spec.name == "custom" else f"scenarios[{spec.name}]."
        _validate_field(prefix, spec)
        if len(cfg.cells) not in (1, len(spec.H)):
            raise ConfigError("grid.cells", "give one cell count or one per axis")
        w = cfg.bin_width_for(spec)
        cells = cfg.cells_for(len(spec.H))
        dt = max((hi - lo) / m for lo, hi, m in zip(spec.lower, spec.upper, cells))
        if dt ** min(spec.H) > w / 4 * (1 + 1e-12):
            raise ConfigError("bins.width", f"resolution coupling needs width >= {4 * dt ** min(spec.H):.6g}")
        if cfg.radii:
            span = min(hi - lo for lo, hi in zip(spec.lower, spec.upper))
            if max(cfg.radii) > span:
                raise ConfigError("fit.radii", "largest radius must fit inside the interval")
