"""Local-time estimators on sampled fields.

A grid point stands for the cell around it: per axis, cell edges sit halfway
between neighbouring grid coordinates and are clipped to the time box ``T``,
so the cell volumes inside ``T`` add up to its Lebesgue measure.  The
histogram estimator then spreads each cell's volume into the spatial bin that
contains the field value at the grid point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .field_model import Box
from .gaussian_engine import FieldSample, Grid

WINDOW_PAD_BINS = 3


def axis_cells(coords: np.ndarray, lo: float, hi: float):
    """Indices of grid coordinates inside ``[lo, hi]`` and their clipped cell widths."""
    idx = np.nonzero((coords >= lo) & (coords <= hi))[0]
    if idx.size == 0:
        return idx, np.empty(0)
    c = coords[idx]
    edges = np.concatenate([[lo], 0.5 * (c[1:] + c[:-1]), [hi]])
    return idx, np.diff(edges)


def restrict(sample: FieldSample, T: Box):
    """Field values inside ``T`` (shape ``(M, d)``) and matching cell volumes."""
    grid = sample.grid
    if len(T.lower) != grid.n_axes:
        raise DomainError("box and grid differ in dimension")
    sel, widths = [], []
    for coords, lo, hi in zip(grid.per_axis, T.lower, T.upper):
        idx, w = axis_cells(coords, lo, hi)
        if idx.size == 0:
            raise DomainError(f"box [{lo}, {hi}] contains no grid coordinate")
        sel.append(idx)
        widths.append(w)
    vals = sample.values[np.ix_(*sel)]
    weights = widths[0]
    for w in widths[1:]:
        weights = np.multiply.outer(weights, w)
    return vals.reshape(-1, sample.d), np.asarray(weights).ravel()


def _spacing(sample: FieldSample) -> tuple:
    return tuple(float(np.max(np.diff(c))) if c.size > 1 else 0.0 for c in sample.grid.per_axis)


@dataclass(frozen=True)
class LatticeSpec:
    """Regular spatial bins of side ``width`` anchored at ``origin``.

    Bin ``k`` along a channel is ``[origin + k w, origin + (k + 1) w)``.  With
    no ``window`` the bin range is fitted to each sample (padded by three
    bins); an explicit window ``((k_lo, k_hi), ...)`` fixes it and values
    falling outside are booked as overflow.
    """

    width: float
    origin: float | tuple = 0.0
    window: tuple | None = None


@dataclass
class LocalTimeField:
    box: Box
    origin: np.ndarray
    width: np.ndarray
    k_lo: np.ndarray
    values: np.ndarray
    grid_spacing: tuple
    overflow_mass: float = 0.0

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def bin_volume(self) -> float:
        return float(np.prod(self.width))

    @property
    def total_mass(self) -> float:
        return float(self.values.sum() * self.bin_volume)

    def mass_error(self) -> float:
        return self.total_mass + self.overflow_mass - self.box.volume

    def bin_centers(self) -> list:
        return [
            self.origin[k] + self.width[k] * (self.k_lo[k] + np.arange(self.values.shape[k]) + 0.5)
            for k in range(self.d)
        ]

    def bin_index(self, x) -> tuple | None:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k = np.floor((x - self.origin) / self.width).astype(int) - self.k_lo
        if np.any(k < 0) or np.any(k >= self.values.shape):
            return None
        return tuple(k)

    def value_at(self, x) -> float:
        idx = self.bin_index(x)
        return 0.0 if idx is None else float(self.values[idx])

    def to_csv(self) -> str:
        centers = np.meshgrid(*self.bin_centers(), indexing="ij")
        cols = [f"x_{k + 1}" for k in range(self.d)] + ["value"]
        lines = [",".join(cols)]
        flat = [c.ravel() for c in centers] + [self.values.ravel()]
        for row in zip(*flat):
            lines.append(",".join(f"{v:.17g}" for v in row))
        return "\n".join(lines) + "\n"

    def sidecar(self) -> dict:
        return {
            "box": {"lower": list(self.box.lower), "upper": list(self.box.upper)},
            "bins": {
                "origin": self.origin.tolist(),
                "width": self.width.tolist(),
                "k_lo": self.k_lo.tolist(),
                "shape": list(self.values.shape),
                "bin_volume": self.bin_volume,
            },
            "grid_spacing": list(self.grid_spacing),
            "mass": {
                "box_volume": self.box.volume,
                "histogram_mass": self.total_mass,
                "overflow_mass": self.overflow_mass,
                "error": self.mass_error(),
            },
        }


def _lattice_arrays(spec: LatticeSpec, d: int):
    width = np.broadcast_to(np.asarray(spec.width, dtype=float), (d,)).copy()
    origin = np.broadcast_to(np.asarray(spec.origin, dtype=float), (d,)).copy()
    if np.any(width <= 0):
        raise DomainError("bin width must be positive")
    return width, origin


def occupation_histogram(sample: FieldSample, T: Box, lattice: LatticeSpec) -> LocalTimeField:
    """Histogram estimate of ``x -> L(x, T)``; total mass equals the volume of ``T``."""
    vals, weights = restrict(sample, T)
    d = sample.d
    width, origin = _lattice_arrays(lattice, d)
    k = np.floor((vals - origin) / width).astype(np.int64)
    if lattice.window is None:
        k_lo = k.min(axis=0) - WINDOW_PAD_BINS
        k_hi = k.max(axis=0) + WINDOW_PAD_BINS
    else:
        win = np.asarray(lattice.window, dtype=np.int64).reshape(d, 2)
        k_lo, k_hi = win[:, 0], win[:, 1]
    shape = tuple(int(x) for x in (k_hi - k_lo + 1))
    rel = k - k_lo
    inside = np.all((rel >= 0) & (rel < np.asarray(shape)), axis=1)
    flat = np.ravel_multi_index(tuple(rel[inside].T), shape) if d > 1 else rel[inside, 0]
    mass = np.bincount(flat, weights=weights[inside], minlength=math.prod(shape))
    bin_volume = float(np.prod(width))
    values = (mass / bin_volume).reshape(shape)
    overflow = float(weights[~inside].sum())
    return LocalTimeField(T, origin, width, np.asarray(k_lo), values, _spacing(sample), overflow)


def kernel_local_time(sample: FieldSample, T: Box, x, k: float) -> float:
    """Gaussian-smoothed local time: Riemann sum of a normal density with variance ``1/k``."""
    if k <= 0:
        raise DomainError("k must be positive")
    vals, weights = restrict(sample, T)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = vals.shape[1]
    sq = np.sum((vals - x) ** 2, axis=1)
    return float(np.sum(weights * (k / (2 * math.pi)) ** (d / 2) * np.exp(-0.5 * k * sq)))


@dataclass(frozen=True)
class ProbeFunction:
    """Members of the fixed family used by :func:`occupation_check`.

    ``kind`` is ``constant`` (params: value), ``indicator`` (params: lower,
    upper; half-open like the bins), ``gaussian`` (params: center, scale) or
    ``poly`` (params: coefficients, lower, upper; evaluated on the first
    channel and zero outside the window).
    """

    kind: str
    params: tuple = ()

    def __call__(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_2d(y)
        if self.kind == "constant":
            return np.full(y.shape[0], float(self.params[0]))
        if self.kind == "indicator":
            lo = np.atleast_1d(self.params[0])
            hi = np.atleast_1d(self.params[1])
            return np.all((y >= lo) & (y < hi), axis=1).astype(float)
        if self.kind == "gaussian":
            c = np.atleast_1d(self.params[0])
            s = float(self.params[1])
            return np.exp(-0.5 * np.sum((y - c) ** 2, axis=1) / s**2)
        if self.kind == "poly":
            coeffs, lo, hi = self.params
            x = y[:, 0]
            return np.where((x >= lo) & (x < hi), np.polyval(coeffs, x), 0.0)
        raise DomainError(f"unknown test function kind {self.kind!r}")


def occupation_check(sample: FieldSample, T: Box, f: ProbeFunction, lattice: LatticeSpec):
    """Time integral of ``f(B)`` computed directly and through the histogram density."""
    vals, weights = restrict(sample, T)
    direct = float(np.sum(weights * f(vals)))
    ltf = occupation_histogram(sample, T, lattice)
    centers = np.meshgrid(*ltf.bin_centers(), indexing="ij")
    pts = np.stack([c.ravel() for c in centers], axis=-1)
    via = float(np.sum(f(pts) * ltf.values.ravel()) * ltf.bin_volume)
    return direct, via


def max_local_time(ltf: LocalTimeField):
    """``(max value, center of the maximising bin)``."""
    flat = int(np.argmax(ltf.values))
    idx = np.unravel_index(flat, ltf.values.shape)
    center = np.array([ltf.bin_centers()[k][i] for k, i in enumerate(idx)])
    return float(ltf.values[idx]), center


def field_range(sample: FieldSample, T: Box) -> np.ndarray:
    """Per-channel ``max - min`` of the field over grid points in ``T``."""
    vals, _ = restrict(sample, T)
    return vals.max(axis=0) - vals.min(axis=0)


def range_chain(sample: FieldSample, T: Box, ltf: LocalTimeField):
    """``(lambda(T), L* x prod(range + bin width))``; the first never exceeds the second."""
    lstar, _ = max_local_time(ltf)
    spread = np.prod(field_range(sample, T) + ltf.width)
    return T.volume, lstar * float(spread)


def level_set_points(sample: FieldSample, x, tol: float, T: Box | None = None) -> np.ndarray:
    """Grid points (optionally restricted to ``T``) where ``|B(t) - x| <= tol``."""
    if tol < 0:
        raise DomainError("tol must be nonnegative")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    pts = sample.grid.points()
    vals = sample.values.reshape(-1, sample.d)
    dist = np.sqrt(np.sum((vals - x) ** 2, axis=1))
    keep = dist <= tol
    if T is not None:
        keep &= T.contains(pts)
    return pts[keep]


def box_counts(points: np.ndarray, box: Box, divisions: Sequence[int]) -> np.ndarray:
    """Number of occupied cells when ``box`` is cut into ``m^N`` equal cells, per ``m``."""
    pts = np.atleast_2d(points)
    lo = np.asarray(box.lower)
    span = np.asarray(box.upper) - lo
    out = []
    for m in divisions:
        if pts.size == 0:
            out.append(0)
            continue
        idx = np.clip(np.floor((pts - lo) / span * m).astype(np.int64), 0, m - 1)
        out.append(np.unique(np.ravel_multi_index(tuple(idx.T), (m,) * pts.shape[1])).size)
    return np.asarray(out)


def box_counting_dimension(points: np.ndarray, box: Box, divisions: Sequence[int]):
    """Least-squares slope of ``log count`` against ``log m``; returns ``(slope, counts)``."""
    counts = box_counts(points, box, divisions)
    return count_slope(divisions, counts), counts


def _block_extreme(v: np.ndarray, axis: int, m: int, fn) -> np.ndarray:
    # extreme over m windows of b + 1 points that share their end points
    n = v.shape[axis] - 1
    b = n // m
    body = np.moveaxis(v, axis, 0)
    left = fn(body[: m * b].reshape((m, b) + body.shape[1:]), axis=1)
    right = body[b :: b][:m]
    return np.moveaxis(fn(np.stack([left, right]), axis=0), 0, axis)


def straddle_box_counts(sample: FieldSample, x: float, divisions: Sequence[int], channel: int = 0) -> np.ndarray:
    """Boxes meeting the level set ``{B = x}``, counted at each number of divisions per axis.

    The sample must sit on a vertex grid whose cell count per axis is a
    multiple of every division.  A box counts when the field values on its
    grid points (faces included) lie on both sides of ``x``; with a
    continuous field this means the level set passes through the box.
    """
    v = sample.values[..., channel]
    cells = [s - 1 for s in v.shape]
    out = []
    for m in divisions:
        if any(c % m for c in cells):
            raise DomainError(f"{m} divisions do not split {cells} cells evenly")
        lo, hi = v, v
        for axis in range(v.ndim):
            lo = _block_extreme(lo, axis, m, np.min)
            hi = _block_extreme(hi, axis, m, np.max)
        out.append(int(np.count_nonzero((lo <= x) & (hi >= x))))
    return np.asarray(out)


def count_slope(divisions: Sequence[int], counts) -> float:
    """Least-squares slope of ``log count`` against ``log divisions``; ``nan`` if a count is 0."""
    counts = np.asarray(counts, dtype=float)
    if np.any(counts <= 0):
        return float("nan")
    return float(np.polyfit(np.log(np.asarray(divisions, dtype=float)), np.log(counts), 1)[0])


@dataclass
class OscillationRecord:
    center: np.ndarray
    radii: np.ndarray
    sup_osc: np.ndarray


def _grid_index(grid: Grid, s) -> tuple:
    s = np.atleast_1d(np.asarray(s, dtype=float))
    idx = []
    for coords, sl in zip(grid.per_axis, s):
        i = int(np.argmin(np.abs(coords - sl)))
        if abs(coords[i] - sl) > 1e-12 * max(1.0, abs(sl)):
            raise DomainError(f"center coordinate {sl} is not a grid coordinate")
        idx.append(i)
    return tuple(idx)


def oscillation_stats(sample: FieldSample, s, radii) -> OscillationRecord:
    """Largest ``|B(t) - B(s)|`` over grid points in the open ball ``U(s, r)``, per radius."""
    grid = sample.grid
    s = np.atleast_1d(np.asarray(s, dtype=float))
    radii = np.sort(np.asarray(radii, dtype=float))[::-1]
    idx = _grid_index(grid, s)
    for coords, sl in zip(grid.per_axis, s):
        if sl - radii[0] < coords[0] - 1e-12 or sl + radii[0] > coords[-1] + 1e-12:
            raise DomainError(f"radius {radii[0]} leaves the sample grid")
    center_val = sample.values[idx]
    pts = grid.points()
    dist = np.sqrt(np.sum((pts - s) ** 2, axis=1))
    osc = np.sqrt(np.sum((sample.values.reshape(-1, sample.d) - center_val) ** 2, axis=1))
    order = np.argsort(dist, kind="stable")
    running = np.maximum.accumulate(osc[order])
    sorted_dist = dist[order]
    out = []
    for r in radii:
        n_in = int(np.searchsorted(sorted_dist, r, side="left"))
        out.append(running[n_in - 1] if n_in > 0 else 0.0)
    return OscillationRecord(s, radii, np.asarray(out))


def lil_gauge_ratios(sample: FieldSample, x, t, radii, beta: float, lattice_width: float) -> np.ndarray:
    """Histogram local time at ``x`` over cubes ``[t - r, t + r]`` divided by ``phi1(r)``.

    Cubes stand in for the balls of the law of the iterated logarithm; the
    two differ only by a constant factor.  The values are reported, never
    asserted.
    """
    from .exponents import gauge

    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    N = sample.grid.n_axes
    out = []
    for r in radii:
        T = Box(tuple(t - r), tuple(t + r))
        ltf = occupation_histogram(sample, T, LatticeSpec(lattice_width, origin=tuple(x - lattice_width / 2)))
        out.append(ltf.value_at(x) / gauge("phi1", (beta, N), r))
    return np.asarray(out)


def oscillation_floor(record: OscillationRecord, h1: float) -> float:
    """Smallest ``sup_osc(r) / (r^H1 (log log 1/r)^-H1)`` over the record's radii."""
    r = record.radii
    lower = r**h1 * np.log(np.log(1.0 / r)) ** (-h1)
    return float(np.min(record.sup_osc / lower))


# --- scaling experiments over shrinking boxes -------------------------------------


def _centered_grid(s: np.ndarray, r: float, cells: int) -> Grid:
    return Grid.vertices(tuple(s - r), tuple(s + r), cells)


def max_local_time_scaling(H, d: int, s, radii, replicas: int, cells: int = 64, width_factor: float = 0.05,
                           seed=None):
    """Median of ``L*([s - r, s + r])`` against ``r``; the slope is compared with ``N - H_1 d``.

    Bins have side ``width_factor * (2r)^H_1``, so the histogram resolves the
    same fraction of the field's range at every radius.
    """
    from .fitting import ScalingFit, fit_exponent
    from .gaussian_engine import kron_factors, sample_field
    from .field_model import validate_hurst
    from .rng import SeedSpec

    seed = SeedSpec(0) if seed is None else seed
    hv = validate_hurst(H, d)
    h1 = min(hv.h)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    radii = sorted((float(r) for r in radii), reverse=True)
    medians = []
    for k, r in enumerate(radii):
        grid = _centered_grid(s, r, cells)
        factors = kron_factors(grid, hv)
        T = Box(tuple(s - r), tuple(s + r))
        lattice = LatticeSpec(width_factor * (2 * r) ** h1)
        vals = [max_local_time(occupation_histogram(sample_field(grid, hv, d, seed.replica(k * replicas + i), factors),
                                                    T, lattice))[0] for i in range(replicas)]
        medians.append(float(np.median(vals)))
    fit = fit_exponent(list(zip(radii, medians)))
    return ScalingFit("max-local-time", tuple(radii), tuple(medians), fit, hv.n_axes - h1 * d, "median",
                      {"replicas": replicas, "cells": cells})


def oscillation_scaling(H, d: int, s, radii, replicas: int, cells: int = 64, seed=None):
    """Median of the sup oscillation over ``U(s, r)`` against ``r``; compared with ``H_1``.

    Each radius gets its own grid on ``[s - r, s + r]``, so the ball always
    holds the same number of grid points.
    """
    from .fitting import ScalingFit, fit_exponent
    from .gaussian_engine import kron_factors, sample_field
    from .field_model import validate_hurst
    from .rng import SeedSpec

    seed = SeedSpec(0) if seed is None else seed
    hv = validate_hurst(H, d)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    radii = sorted((float(r) for r in radii), reverse=True)
    medians = []
    for k, r in enumerate(radii):
        grid = _centered_grid(s, r, cells)
        factors = kron_factors(grid, hv)
        vals = [oscillation_stats(sample_field(grid, hv, d, seed.replica(k * replicas + i), factors), s, [r]).sup_osc[0]
                for i in range(replicas)]
        medians.append(float(np.median(vals)))
    fit = fit_exponent(list(zip(radii, medians)))
    return ScalingFit("oscillation", tuple(radii), tuple(medians), fit, min(hv.h), "median",
                      {"replicas": replicas, "cells": cells})


@dataclass
class BoxDimensionReport:
    """Box-counting slopes of ``{t : B(t) = x}`` over replicas."""

    divisions: tuple
    slopes: list
    mean_counts: list
    mean_slope: float
    slope_of_mean: float
    skipped: int
    expected: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def level_set_dimension(H, x: float, replicas: int, lower=None, upper=None, cells: int = 1024,
                        divisions=(8, 16, 32, 64), seed=None, max_draws: int | None = None) -> BoxDimensionReport:
    """Average box-counting slope of the level set over ``replicas`` usable samples (``d = 1``).

    A sample is usable when the level set meets a box at every division;
    the others are skipped and counted.
    """
    from .exponents import beta_and_dim
    from .gaussian_engine import kron_factors, sample_field
    from .field_model import validate_hurst
    from .rng import SeedSpec

    seed = SeedSpec(0) if seed is None else seed
    hv = validate_hurst(H, 1)
    n = hv.n_axes
    lower = (1.0,) * n if lower is None else tuple(lower)
    upper = (2.0,) * n if upper is None else tuple(upper)
    grid = Grid.vertices(lower, upper, cells)
    factors = kron_factors(grid, hv)
    max_draws = 4 * replicas if max_draws is None else max_draws
    slopes, counts, i = [], [], 0
    while len(slopes) < replicas:
        if i >= max_draws:
            raise DomainError(f"only {len(slopes)} of {i} samples meet level {x} at every division")
        c = straddle_box_counts(sample_field(grid, hv, 1, seed.replica(i), factors), x, divisions)
        i += 1
        if np.all(c > 0):
            slopes.append(count_slope(divisions, c))
            counts.append(c)
    mean_counts = np.mean(counts, axis=0)
    return BoxDimensionReport(tuple(divisions), slopes, mean_counts.tolist(), float(np.mean(slopes)),
                              count_slope(divisions, mean_counts), i - len(slopes),
                              beta_and_dim(hv.h, 1).dim_level_set)
