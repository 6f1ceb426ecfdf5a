import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbsheet import field_model as fm
from fbsheet import gaussian_engine as ge
from fbsheet.errors import DegenerateInputError, DomainError
from fbsheet.rng import SeedSpec


class TestAssemble:
    def test_single_point(self):
        C = ge.assemble_cov([[1.5, 1.2]], ge.FBS, [0.3, 0.7])
        assert C.shape == (1, 1)
        assert C[0, 0] == pytest.approx(1.5**0.6 * 1.2**1.4, rel=1e-14)

    def test_brownian_min(self):
        C = ge.assemble_cov([[1.0], [2.0]], ge.FBS, [0.5])
        np.testing.assert_allclose(C, [[1.0, 1.0], [1.0, 2.0]], atol=1e-15)

    @pytest.mark.parametrize("model", [ge.FBS, ge.LIOUVILLE, ge.slab_model(0, 0.5), ge.CovModel("remainder", 0.5)])
    def test_random_points_psd(self, model):
        pts = np.random.default_rng(3).uniform(1, 2, size=(3, 2))
        C = ge.assemble_cov(pts, model, [0.4, 0.6])
        np.testing.assert_array_equal(C, C.T)
        ge.cholesky_jittered(C)

    def test_unknown_model(self):
        with pytest.raises(DomainError):
            ge.CovModel("nope")


class TestSampling:
    def test_deterministic(self):
        grid = ge.Grid.uniform((1, 1), (2, 2), 6)
        a = ge.sample_field(grid, [0.4, 0.6], 2, SeedSpec(11, 4))
        b = ge.sample_field(grid, [0.4, 0.6], 2, SeedSpec(11, 4))
        assert np.array_equal(a.values, b.values)

    @pytest.mark.parametrize("H,cells", [([0.3, 0.8], (5, 7)), ([0.5], (40,)), ([0.2, 0.5, 0.9], (3, 4, 5))])
    def test_kronecker_equals_dense(self, H, cells):
        grid = ge.Grid.uniform((1,) * len(H), (2,) * len(H), cells)
        kron = ge.sample_field(grid, H, 2, SeedSpec(5)).values
        dense = ge.sample_field_dense(grid, H, 2, SeedSpec(5)).values
        np.testing.assert_allclose(kron, dense, rtol=1e-10, atol=1e-10 * np.abs(dense).max())

    def test_variance_and_channel_independence(self):
        H = [0.4, 0.6]
        grid = ge.Grid(([1.3, 1.9], [1.7]))
        factors = ge.kron_factors(grid, H)
        n = 10_000
        vals = np.array([ge.sample_field(grid, H, 2, SeedSpec(1, i), factors).values[1, 0] for i in range(n)])
        t = np.array([1.9, 1.7])
        var = np.prod(t ** (2 * np.array(H)))
        emp = vals[:, 0].var(ddof=1)
        # standard error of a Gaussian sample variance
        assert abs(emp - var) < 4 * var * math.sqrt(2 / (n - 1))
        rho = np.corrcoef(vals[:, 0], vals[:, 1])[0, 1]
        assert abs(rho) < 4 / math.sqrt(n)

    def test_scaling_covariance(self):
        # B(A t) / prod a^H has the law of B(t): compare empirical covariances
        H = np.array([0.3, 0.7])
        A = np.array([2.0, 0.5])
        base = ge.Grid(([1.0, 1.5], [1.0, 2.0]))
        scaled = ge.Grid(tuple(a * c for a, c in zip(base.per_axis, A)))
        n = 4000
        fb, fs = ge.kron_factors(base, H), ge.kron_factors(scaled, H)
        xb = np.array([ge.sample_field(base, H, 1, SeedSpec(7, i), fb).values.ravel() for i in range(n)])
        xs = np.array([ge.sample_field(scaled, H, 1, SeedSpec(8, i), fs).values.ravel() for i in range(n)])
        xs /= np.prod(A**H)
        cb, cs = np.cov(xb.T), np.cov(xs.T)
        # entrywise standard error of a sample covariance, sqrt((s_ii s_jj + s_ij^2)/n)
        se = np.sqrt((np.outer(np.diag(cb), np.diag(cb)) + cb**2) / n)
        assert np.all(np.abs(cb - cs) < 4 * math.sqrt(2) * se)

    def test_grid_validation(self):
        with pytest.raises(DomainError):
            ge.Grid(([1.0, 1.0],))
        with pytest.raises(DomainError):
            ge.Grid(([0.0, 1.0],))

    def test_vertices(self):
        g = ge.Grid.vertices((1.0,), (2.0,), 4)
        np.testing.assert_allclose(g.per_axis[0], [1, 1.25, 1.5, 1.75, 2])


class TestConditionalVariance:
    def test_bivariate(self):
        rho = 0.6
        C = np.array([[1, rho], [rho, 1.0]])
        assert ge._schur(C, 1) == pytest.approx(1 - rho**2, rel=1e-14)

    def test_brownian_increment(self):
        assert ge.conditional_variance(1, [[1.0], [2.0]], ge.FBS, [0.5]) == pytest.approx(1.0, rel=1e-12)

    def test_no_conditioning(self):
        t = [1.4, 1.1]
        assert ge.conditional_variance(0, [t], ge.FBS, [0.3, 0.8]) == pytest.approx(fm.fbs_cov(t, t, [0.3, 0.8]))

    @given(st.integers(0, 2**32 - 1), st.tuples(st.floats(0.1, 0.9), st.floats(0.1, 0.9)))
    @settings(max_examples=30)
    def test_monotone_in_conditioning(self, seed, H):
        pts = np.random.default_rng(seed).uniform(1, 2, size=(5, 2))
        prev = np.inf
        for k in range(1, 6):
            # target pts[0], conditioned on pts[1:k]
            v = ge.conditional_variance(0, pts[:k], ge.FBS, H)
            assert v <= prev * (1 + 1e-9) + 1e-12
            prev = v


class TestDeterminant:
    def test_two_by_two(self):
        rho = -0.3
        dc, ds = ge.det_dual(np.array([[1, rho], [rho, 1.0]]))
        assert dc == pytest.approx(1 - rho**2) and ds == pytest.approx(1 - rho**2)

    def test_single(self):
        dc, ds = ge.det_cov_dual([[1.5, 1.5]], ge.FBS, [0.5, 0.5])
        assert dc == pytest.approx(2.25) and ds == pytest.approx(2.25)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=50)
    def test_dual_agreement(self, seed):
        pts = np.random.default_rng(seed).uniform(1, 2, size=(6, 2))
        dc, ds = ge.det_cov_dual(pts, ge.FBS, [0.4, 0.6])
        assert abs(dc - ds) / dc < 1e-8

    def test_repeated_axis_coordinate(self):
        with pytest.raises(DegenerateInputError):
            ge.det_cov_dual([[1.0, 1.2], [1.0, 1.5]], ge.FBS, [0.5, 0.5])


class TestSectorial:
    def test_single_point(self):
        lhs, rhs, ratio = ge.sectorial_ratio([[1.0, 1.0]], [0.5, 0.5])
        assert (lhs, rhs) == pytest.approx((1.0, 2.0))
        assert ratio == pytest.approx(0.5)

    def test_brownian_pair(self):
        assert ge.sectorial_ratio([[1.0], [2.0]], [0.5]) == pytest.approx((1.0, 1.0, 1.0))

    def test_clustered_triple_bounded(self):
        ratios = []
        for delta in (1e-1, 1e-2, 1e-3, 1e-4):
            pts = [[1.0, 1.0 + 2 * delta], [1.0 + delta, 1.0], [1.0 + 2 * delta, 1.0 + delta]]
            ratios.append(ge.sectorial_ratio(pts, [0.4, 0.6])[2])
        assert min(ratios) > 0.05

    def test_duplicate(self):
        with pytest.raises(DegenerateInputError):
            ge.sectorial_ratio([[1.0, 1.0], [1.0, 1.0]], [0.5, 0.5])


class TestInequalities:
    def test_single_point(self):
        H, t = [0.3, 0.7], [1.5, 1.2]
        liou, slab = ge.variance_domination_check([t], [1.0], H, 0.5)
        k2 = fm.kappa(H).value ** 2
        assert liou.lhs == pytest.approx(fm.fbs_cov(t, t, H))
        assert liou.rhs == pytest.approx(math.prod(x ** (2 * h) / (2 * h) for h, x in zip(H, t)) / k2)
        assert liou.passed and slab.passed

    def test_zero_weights(self):
        res = ge.variance_domination_check([[1.2, 1.4], [1.7, 1.1]], [0.0, 0.0], [0.5, 0.5], 0.5)
        assert all(r.passed and r.lhs == 0 for r in res)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_random_draws(self, seed):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(1, 2, size=(4, 2))
        u = rng.normal(size=4)
        assert all(r.passed for r in ge.variance_domination_check(pts, u, [0.35, 0.75], 0.5))

    @given(st.integers(0, 2**32 - 1), st.integers(1, 4))
    @settings(max_examples=25, deadline=None)
    def test_slab_bound_certified(self, seed, n):
        rng = np.random.default_rng(seed)
        H = [0.4, 0.6]
        pts = rng.uniform(1, 2, size=(n + 1, 2))
        axis = int(rng.integers(2))
        pts = pts[np.argsort(pts[:, axis])]
        prev = pts[-2, axis] if n else 0.5
        cv = ge.conditional_variance(n, pts, ge.slab_model(axis, 0.5), H)
        assert cv >= fm.slab_lower_bound(axis, 0.5, pts[-1], prev, H) * (1 - 1e-8) - 1e-12

    def test_holder_single(self):
        r = ge.det_holder_check([[1.3, 1.6]], [0.5, 0.5], [1.0], 0.5)
        assert math.isfinite(r.extra["c_min"]) and r.extra["c_min"] > 0

    def test_holder_constant_stable(self):
        cs = []
        for shift in (0.0, 0.01, 0.02):
            pts = [[1.2 + shift, 1.5], [1.6, 1.3 + shift]]
            cs.append(ge.det_holder_check(pts, [0.5, 0.5], [2.0, 2.0], 0.5).extra["c_min"])
        assert max(cs) / min(cs) < 1.2
        assert ge.det_holder_check([[1.2, 1.5], [1.6, 1.3]], [0.5, 0.5], [2, 2], 0.5, C=max(cs) * 1.01).passed

    def test_holder_bad_exponents(self):
        with pytest.raises(DomainError):
            ge.det_holder_check([[1.2, 1.5]], [0.5, 0.5], [2.0, 3.0], 0.5)
