import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from shearlab import rng

# Random123 published known-answer vectors for philox4x32-10
KATS = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF, 0xFFFFFFFF), (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


@pytest.mark.parametrize("ctr,key,expected", KATS)
def test_philox_kat(ctr, key, expected):
    out = rng.philox4x32(*ctr, *key)
    assert tuple(int(w) for w in out) == expected


def test_split_seed():
    assert rng.split_seed(2**32 + 5) == (5, 1)
    with pytest.raises(ValueError):
        rng.split_seed(-1)
    with pytest.raises(ValueError):
        rng.split_seed(2**64)


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**40), st.integers(0, 2**40))
def test_uniform_ranges(seed, step, path):
    u1, u2 = rng.uniforms(step, path, seed)
    assert 0 < u1 <= 1 and 0 <= u2 < 1


def test_counter_purity():
    steps = np.arange(100)
    a = rng.normals(steps, 7, 3)
    b = rng.normals(steps[::-1], 7, 3)
    np.testing.assert_array_equal(a[0], b[0][::-1])
    assert not np.array_equal(rng.normals(steps, 8, 3)[0], a[0])
    assert not np.array_equal(rng.normals(steps, 7, 4)[0], a[0])


def test_normals_distribution():
    z1, z2 = rng.normals(np.arange(200_000), 0, 11)
    for z in (z1, z2):
        assert abs(z.mean()) < 0.01
        assert abs(z.var() - 1) < 0.015
        assert stats.kstest(z, "norm").pvalue > 1e-3
    assert abs(np.corrcoef(z1, z2)[0, 1]) < 0.01
