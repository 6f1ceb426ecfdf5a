import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from fbsheet.rng import SeedSpec, normals, uniforms


def test_reproducible():
    a = normals(SeedSpec(42, 3), 1000)
    b = normals(SeedSpec(42, 3), 1000)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("other", [SeedSpec(42, 4), SeedSpec(43, 3)])
def test_distinct_streams(other):
    assert not np.array_equal(normals(SeedSpec(42, 3), 64), normals(other, 64))


def test_channels_differ():
    s = SeedSpec(1)
    assert not np.array_equal(normals(s, 64, channel=0), normals(s, 64, channel=1))


@given(st.integers(0, 200), st.integers(1, 50))
def test_offset_consistent(start, size):
    s = SeedSpec(9, 2)
    full = uniforms(s, start + size)
    assert np.array_equal(uniforms(s, size, start=start), full[start:])


def test_open_interval():
    u = uniforms(SeedSpec(0), 100_000)
    assert u.min() > 0 and u.max() < 1


def test_normal_distribution():
    z = normals(SeedSpec(2024), 50_000)
    assert stats.kstest(z, "norm").pvalue > 1e-3


def test_replica_offsets():
    assert SeedSpec(5, 10).replica(3) == SeedSpec(5, 13)


@pytest.mark.parametrize("kw", [{"master_seed": -1}, {"master_seed": 2**64}, {"master_seed": 0, "stream_id": -1}])
def test_rejects_bad_seed(kw):
    with pytest.raises(ValueError):
        SeedSpec(**kw)
