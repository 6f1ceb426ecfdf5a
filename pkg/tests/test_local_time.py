import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fbsheet import local_time as lt
from fbsheet.errors import DomainError
from fbsheet.field_model import Box, validate_hurst
from fbsheet.gaussian_engine import FieldSample, Grid, sample_field
from fbsheet.rng import SeedSpec


def frozen(grid, values):
    """A sample with hand-set values (no randomness)."""
    v = np.asarray(values, dtype=float)
    if v.ndim == grid.n_axes:
        v = v[..., None]
    return FieldSample(grid, v, validate_hurst([0.5] * grid.n_axes))


@pytest.fixture(scope="module")
def sheet():
    grid = Grid.uniform((1, 1), (2, 2), 24)
    return sample_field(grid, [0.4, 0.6], 1, SeedSpec(3))


@pytest.fixture(scope="module")
def path():
    grid = Grid.uniform((1,), (2,), 400)
    return sample_field(grid, [0.5], 1, SeedSpec(17))


class TestCells:
    def test_widths_cover_interval(self):
        idx, w = lt.axis_cells(np.array([1.1, 1.3, 1.6, 1.9]), 1.0, 2.0)
        np.testing.assert_allclose(w, [0.2, 0.25, 0.3, 0.25])
        assert w.sum() == pytest.approx(1.0)

    def test_sub_box(self):
        idx, w = lt.axis_cells(np.linspace(0.05, 0.95, 10), 0.3, 0.6)
        assert list(idx) == [3, 4, 5]
        assert w.sum() == pytest.approx(0.3)

    def test_empty_box(self, sheet):
        with pytest.raises(DomainError):
            lt.restrict(sheet, Box((1.0, 1.0), (1.01, 1.01)))


class TestHistogram:
    @given(st.integers(0, 10_000), st.floats(0.01, 2.0), st.integers(1, 2), st.floats(-1, 1))
    @settings(max_examples=40, deadline=None)
    def test_mass_conservation(self, seed, w, d, origin):
        grid = Grid.uniform((1, 1), (2, 3), (9, 13))
        s = sample_field(grid, [0.3, 0.8], d, SeedSpec(seed))
        T = Box((1.2, 1.1), (1.9, 2.6))
        ltf = lt.occupation_histogram(s, T, lt.LatticeSpec(w, origin))
        assert abs(ltf.mass_error()) <= 1e-12 * T.volume
        assert ltf.overflow_mass == 0.0
        assert np.all(ltf.values >= 0)

    def test_window_overflow(self, sheet):
        T = Box((1, 1), (2, 2))
        ltf = lt.occupation_histogram(sheet, T, lt.LatticeSpec(0.1, 0.0, window=((0, 2),)))
        assert ltf.values.shape == (3,)
        assert ltf.overflow_mass > 0
        assert abs(ltf.mass_error()) < 1e-12

    def test_constant_field(self):
        grid = Grid.uniform((1,), (2,), 10)
        ltf = lt.occupation_histogram(frozen(grid, np.full(10, 0.25)), Box((1,), (2,)), lt.LatticeSpec(0.5))
        assert ltf.value_at(0.25) == pytest.approx(2.0)
        assert ltf.value_at(0.75) == 0.0

    def test_single_bin_max(self):
        grid = Grid.uniform((1, 1), (2, 3), 4)
        ltf = lt.occupation_histogram(frozen(grid, np.full((4, 4), 0.1)), Box((1, 1), (2, 3)), lt.LatticeSpec(0.2))
        value, center = lt.max_local_time(ltf)
        assert value == pytest.approx(2.0 / 0.2)
        assert center == pytest.approx([0.1])

    def test_bins_half_open(self):
        grid = Grid.uniform((1,), (2,), 2)
        ltf = lt.occupation_histogram(frozen(grid, [0.0, 0.5]), Box((1,), (2,)), lt.LatticeSpec(0.5))
        assert ltf.value_at(0.0) == pytest.approx(1.0)
        assert ltf.value_at(0.5) == pytest.approx(1.0)
        assert ltf.bin_index(0.5) != ltf.bin_index(0.49)

    def test_csv_roundtrip(self, sheet):
        ltf = lt.occupation_histogram(sheet, Box((1, 1), (2, 2)), lt.LatticeSpec(0.15, -0.075))
        lines = ltf.to_csv().splitlines()
        assert lines[0] == "x_1,value"
        arr = np.array([[float(v) for v in row.split(",")] for row in lines[1:]])
        np.testing.assert_array_equal(arr[:, 1], ltf.values)
        np.testing.assert_allclose(arr[:, 0], ltf.bin_centers()[0])

    def test_two_channel_csv_header(self):
        grid = Grid.uniform((1,), (2,), 30)
        s = sample_field(grid, [0.5], 2, SeedSpec(1))
        ltf = lt.occupation_histogram(s, Box((1,), (2,)), lt.LatticeSpec(0.3))
        assert ltf.to_csv().splitlines()[0] == "x_1,x_2,value"
        assert ltf.sidecar()["mass"]["box_volume"] == 1.0


class TestOccupationFormula:
    def test_constant(self, sheet):
        T = Box((1, 1), (2, 2))
        direct, via = lt.occupation_check(sheet, T, lt.ProbeFunction("constant", (1.0,)), lt.LatticeSpec(0.1))
        assert direct == pytest.approx(1.0, abs=1e-14)
        assert via == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("k", [-3, -1, 0, 2])
    def test_bin_indicator(self, sheet, k):
        w, o = 0.2, -0.1
        T = Box((1.1, 1.2), (1.9, 1.8))
        f = lt.ProbeFunction("indicator", (o + k * w, o + (k + 1) * w))
        direct, via = lt.occupation_check(sheet, T, f, lt.LatticeSpec(w, o))
        assert direct == pytest.approx(via, abs=1e-12)

    def test_gaussian_first_order(self, sheet):
        T = Box((1, 1), (2, 2))
        f = lt.ProbeFunction("gaussian", (0.1, 0.4))
        widths = np.array([0.2, 0.1, 0.05, 0.025])
        errs = []
        for w in widths:
            direct, via = lt.occupation_check(sheet, T, f, lt.LatticeSpec(w))
            errs.append(abs(direct - via))
        errs = np.array(errs)
        assert np.all(errs <= 0.5 * widths)
        assert errs[-1] < errs[0]

    def test_poly(self, sheet):
        T = Box((1, 1), (2, 2))
        f = lt.ProbeFunction("poly", ((1.0, 0.0, 0.0), -0.4, 0.4))
        direct, via = lt.occupation_check(sheet, T, f, lt.LatticeSpec(0.01))
        assert direct == pytest.approx(via, abs=0.02)

    def test_unknown_probe(self):
        with pytest.raises(DomainError):
            lt.ProbeFunction("cubic")(np.zeros((1, 1)))


class TestKernel:
    def test_single_cell(self):
        grid = Grid.uniform((1,), (2,), 1)
        c, x, k = 0.3, 0.1, 50.0
        got = lt.kernel_local_time(frozen(grid, [c]), Box((1,), (2,)), x, k)
        assert got == pytest.approx(math.sqrt(k / (2 * math.pi)) * math.exp(-k * (c - x) ** 2 / 2), rel=1e-14)

    def test_integrates_to_volume(self, path):
        T = Box((1,), (2,))
        vals = path.values[:, 0]
        lo, hi = vals.min() - 1, vals.max() + 1
        total, _ = integrate.quad(lambda x: lt.kernel_local_time(path, T, x, 100.0), lo, hi,
                                  points=list(np.linspace(lo, hi, 30)), limit=400)
        assert total == pytest.approx(1.0, rel=1e-6)

    def test_converges_to_histogram(self, path):
        T = Box((1,), (2,))
        w = 0.02
        x = float(np.median(path.values))
        hist = lt.occupation_histogram(path, T, lt.LatticeSpec(w, x - w / 2)).value_at(x)
        diffs = [abs(lt.kernel_local_time(path, T, x, k) - hist) for k in (10.0, 1e2, 1e3, 1e4)]
        assert diffs[2] < diffs[0]
        assert min(diffs) < 0.3 * max(hist, 1e-3) + 0.1

    def test_positive_k(self, path):
        with pytest.raises(DomainError):
            lt.kernel_local_time(path, Box((1,), (2,)), 0.0, 0.0)


class TestMaxAndRange:
    @given(st.integers(0, 10_000), st.floats(0.02, 1.0))
    @settings(max_examples=30, deadline=None)
    def test_chain(self, seed, w):
        grid = Grid.uniform((1, 1), (2, 2), 16)
        s = sample_field(grid, [0.4, 0.6], 1, SeedSpec(seed))
        T = Box((1, 1), (2, 2))
        lhs, rhs = lt.range_chain(s, T, lt.occupation_histogram(s, T, lt.LatticeSpec(w)))
        assert lhs <= rhs

    def test_range(self):
        grid = Grid.uniform((1,), (2,), 4)
        assert lt.field_range(frozen(grid, [0.1, -0.4, 0.3, 0.0]), Box((1,), (2,)))[0] == pytest.approx(0.7)


class TestLevelSets:
    def test_large_tol_returns_all(self, sheet):
        tol = float(np.abs(sheet.values).max()) + 1
        assert len(lt.level_set_points(sheet, 0.0, tol)) == sheet.grid.size

    def test_zero_tol_empty(self, sheet):
        assert len(lt.level_set_points(sheet, 0.123456789, 0.0)) == 0

    def test_restricted(self, sheet):
        T = Box((1.0, 1.0), (1.5, 1.5))
        pts = lt.level_set_points(sheet, 0.0, 10.0, T)
        assert np.all(T.contains(pts)) and len(pts) == 12 * 12

    def test_box_counts(self):
        pts = np.array([[0.1, 0.1], [0.15, 0.12], [0.9, 0.9]])
        counts = lt.box_counts(pts, Box((0, 0), (1, 1)), [1, 2, 4, 8])
        assert list(counts) == [1, 2, 2, 3]

    def test_box_dimension_of_plane(self):
        g = np.linspace(0.001, 0.999, 200)
        pts = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
        slope, _ = lt.box_counting_dimension(pts, Box((0, 0), (1, 1)), [4, 8, 16, 32])
        assert slope == pytest.approx(2.0, abs=1e-9)

    @pytest.mark.parametrize("seed", range(4))
    def test_straddle_counts_brute_force(self, seed):
        grid = Grid.vertices((1, 1), (2, 2), 24)
        s = sample_field(grid, [0.4, 0.6], 1, SeedSpec(seed))
        v = s.values[..., 0]
        x = float(np.median(v))
        divisions = [2, 3, 4, 6, 8, 12]
        got = lt.straddle_box_counts(s, x, divisions)
        want = []
        for m in divisions:
            b = 24 // m
            n = 0
            for i, j in itertools.product(range(m), repeat=2):
                blk = v[i * b : (i + 1) * b + 1, j * b : (j + 1) * b + 1]
                n += blk.min() <= x <= blk.max()
            want.append(n)
        assert list(got) == want

    def test_straddle_uneven(self, sheet):
        grid = Grid.vertices((1, 1), (2, 2), 10)
        s = sample_field(grid, [0.5, 0.5], 1, SeedSpec(0))
        with pytest.raises(DomainError):
            lt.straddle_box_counts(s, 0.0, [4])

    def test_count_slope_zero(self):
        assert math.isnan(lt.count_slope([2, 4, 8], [1, 0, 3]))


class TestOscillation:
    def test_below_spacing(self, sheet):
        s = [a[12] for a in sheet.grid.per_axis]
        rec = lt.oscillation_stats(sheet, s, [0.01])
        assert rec.sup_osc[0] == 0.0

    @given(st.integers(0, 10_000))
    @settings(max_examples=20, deadline=None)
    def test_monotone(self, seed):
        grid = Grid.uniform((1, 1), (2, 2), 20)
        s = sample_field(grid, [0.4, 0.6], 2, SeedSpec(seed))
        c = [a[10] for a in grid.per_axis]
        rec = lt.oscillation_stats(s, c, [0.4, 0.03, 0.2, 0.1, 0.05])
        assert np.all(np.diff(rec.radii) < 0)
        assert np.all(np.diff(rec.sup_osc) <= 0)

    def test_open_ball(self):
        grid = Grid(([1.0, 1.4, 1.5, 1.6, 2.0],))
        rec = lt.oscillation_stats(frozen(grid, [9.0, 1.0, 0.0, 3.0, 9.0]), [1.5], [0.1, 0.5])
        # points at distance exactly r are outside the open ball
        np.testing.assert_allclose(rec.radii, [0.5, 0.1])
        np.testing.assert_allclose(rec.sup_osc, [3.0, 0.0])

    def test_off_grid_center(self, sheet):
        with pytest.raises(DomainError):
            lt.oscillation_stats(sheet, [1.5, 1.5], [0.1])

    def test_radius_too_big(self, sheet):
        s = [a[12] for a in sheet.grid.per_axis]
        with pytest.raises(DomainError):
            lt.oscillation_stats(sheet, s, [0.9])

    def test_floor(self):
        r = np.array([1e-3, 1e-4])
        rec = lt.OscillationRecord(np.zeros(2), r, 2 * r**0.4 * np.log(np.log(1 / r)) ** -0.4)
        assert lt.oscillation_floor(rec, 0.4) == pytest.approx(2.0)

    def test_lil_ratios_finite(self):
        grid = Grid.uniform((0.5, 0.5), (1.5, 1.5), 64)
        s = sample_field(grid, [0.5, 0.5], 1, SeedSpec(2))
        ratios = lt.lil_gauge_ratios(s, s.values[32, 32, 0], [a[32] for a in grid.per_axis], [0.05, 0.02], 1.5, 0.05)
        assert np.all(np.isfinite(ratios)) and np.all(ratios >= 0)
