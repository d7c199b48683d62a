import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freqshield.spectral import dct2, dct_basis, haar_dwt2, haar_idwt2, idct2, zigzag_order


def test_constant_plane_is_dc_only():
    c = dct2(np.full((6, 10), 3.0))
    assert c[0, 0] == pytest.approx(3.0 * np.sqrt(60))
    c[0, 0] = 0
    assert np.abs(c).max() < 1e-12


def test_small_cases():
    assert dct2(np.array([[7.0]]))[0, 0] == pytest.approx(7.0)
    assert not idct2(np.zeros((5, 5))).any()
    s = np.zeros((4, 4))
    s[0, 0] = 1
    np.testing.assert_allclose(idct2(s), 0.25)


def test_inverse_and_parseval():
    p = np.random.default_rng(0).random((128, 128)) * 255
    s = dct2(p)
    assert np.abs(idct2(s) - p).max() < 1e-5
    assert abs((s ** 2).sum() / (p ** 2).sum() - 1) < 1e-4


def test_linearity():
    rng = np.random.default_rng(1)
    p, q = rng.random((9, 7)), rng.random((9, 7))
    np.testing.assert_allclose(dct2(2.5 * p + q), 2.5 * dct2(p) + dct2(q), atol=1e-10)


def test_dct_basis():
    np.testing.assert_allclose(dct_basis(0, 0, 2, 2), [[1, np.cos(np.pi / 4)], [np.cos(np.pi / 4), 0.5]])
    b = dct_basis(3, 5, 8, 8)
    assert b[0, 0] == 1 and np.abs(b).max() <= 1
    with pytest.raises(IndexError):
        dct_basis(8, 0, 8, 8)


def test_haar_hand_cases():
    pyr = haar_dwt2(np.full((4, 4), 2.0), 1)
    np.testing.assert_allclose(pyr.band(1, "LL"), 4.0)
    for name in ("HL", "LH", "HH"):
        assert not pyr.band(1, name).any()
    a, b, c, d = 1.0, 4.0, 6.0, 11.0
    band = haar_dwt2(np.array([[a, b], [c, d]]), 1).bands[0]
    assert band["LL"][0, 0] == (a + b + c + d) / 2
    assert band["HL"][0, 0] == (a - b + c - d) / 2
    assert band["LH"][0, 0] == (a + b - c - d) / 2
    assert band["HH"][0, 0] == (a - b - c + d) / 2


def test_haar_roundtrip_and_energy():
    p = np.random.default_rng(2).random((256, 256)) * 255
    pyr = haar_dwt2(p, 2)
    assert np.abs(haar_idwt2(pyr) - p).max() < 1e-4
    energy = sum((v ** 2).sum() for name, v in pyr.bands[0].items() if name != "LL")
    energy += sum((v ** 2).sum() for v in pyr.bands[1].values())
    assert abs(energy / (p ** 2).sum() - 1) < 1e-4


def test_haar_odd_sizes_padded():
    p = np.random.default_rng(3).random((13, 7))
    pyr = haar_dwt2(p, 2)
    assert pyr.padded_shape == (16, 8)
    assert np.abs(haar_idwt2(pyr) - p).max() < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_inverse_pairs_property(h, w, seed):
    p = np.random.default_rng(seed).normal(size=(h, w)) * 50
    assert np.abs(idct2(dct2(p)) - p).max() < 1e-4
    assert np.abs(haar_idwt2(haar_dwt2(p, 2)) - p).max() < 1e-4


def test_zigzag():
    z = zigzag_order(8, 8)
    assert z[:5] == [(0, 0), (0, 1), (1, 0), (2, 0), (1, 1)]
    for h, w in [(8, 8), (3, 5), (1, 1), (7, 2)]:
        z = zigzag_order(h, w)
        assert z[0] == (0, 0) and sorted(z) == [(i, j) for i in range(h) for j in range(w)]
