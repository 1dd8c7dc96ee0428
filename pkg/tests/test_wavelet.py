import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from istd_forge.wavelet import WaveletPyramid, WmfConfig, decompose, edge_aware_filter, reconstruct, wmf

unit_images = arrays(
    np.float64,
    st.tuples(st.integers(2, 17), st.integers(2, 17)),
    elements=st.floats(0.0, 1.0, allow_nan=False),
)


def test_constant_image_bands():
    pyr = decompose(np.full((6, 8), 0.5))
    # orthonormal Haar: low = (4 * 0.5) / 2
    np.testing.assert_array_equal(pyr.low, 1.0)
    for band in pyr.high:
        np.testing.assert_array_equal(band, 0.0)


def test_two_by_two_butterfly():
    a, b, c, d = 0.1, 0.7, 0.4, 0.2
    pyr = decompose(np.array([[a, b], [c, d]]))
    assert pyr.low[0, 0] == pytest.approx((a + b + c + d) / 2)
    lh, hl, hh = (band[0, 0] for band in pyr.high)
    assert lh == pytest.approx((a + b - c - d) / 2)
    assert hl == pytest.approx((a - b + c - d) / 2)
    assert hh == pytest.approx((a - b - c + d) / 2)


def test_checkerboard_energy_in_diagonal():
    board = (np.indices((8, 8)).sum(axis=0) % 2).astype(float)
    pyr = decompose(board)
    lh, hl, hh = pyr.high
    assert np.all(lh == 0) and np.all(hl == 0)
    assert np.all(np.abs(hh) == 1.0)


def test_odd_dims_subband_shape():
    pyr = decompose(np.zeros((7, 9)))
    assert pyr.low.shape == (4, 5)
    assert pyr.parent_dims == (9, 7)


@pytest.mark.parametrize("shape", [(1, 5), (5, 1)])
def test_degenerate_rejected(shape):
    with pytest.raises(ValueError):
        decompose(np.zeros(shape))


def test_inconsistent_pyramid_rejected():
    z = np.zeros((2, 2))
    with pytest.raises(ValueError):
        WaveletPyramid(z, (z, z, z), (9, 9))


def test_epsilon_must_be_positive():
    with pytest.raises(ValueError):
        WmfConfig(epsilon=0.0)


@settings(max_examples=60, deadline=None)
@given(img=unit_images)
def test_perfect_reconstruction(img):
    assert np.abs(reconstruct(decompose(img)) - img).max() <= 1e-6


@settings(max_examples=60, deadline=None)
@given(img=unit_images)
def test_energy_preserved(img):
    pyr = decompose(img)
    padded = np.pad(img, ((0, img.shape[0] % 2), (0, img.shape[1] % 2)), mode="edge")
    energy = (pyr.low**2).sum() + sum((b**2).sum() for b in pyr.high)
    assert energy == pytest.approx((padded**2).sum(), abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(img=unit_images)
def test_filter_contracts(img):
    pyr = decompose(img)
    filt = edge_aware_filter(pyr)
    for before, after in zip(pyr.high, filt.high):
        assert np.all(np.abs(after) <= np.abs(before))
    np.testing.assert_array_equal(filt.low, pyr.low)


def test_constant_low_band_kills_detail(rng):
    high = tuple(rng.normal(size=(5, 5)) for _ in range(3))
    pyr = WaveletPyramid(np.full((5, 5), 0.8), high, (10, 10))
    for band in edge_aware_filter(pyr).high:
        assert np.all(band == 0.0)


def test_step_low_band_scale_field():
    low = np.zeros((5, 5))
    low[:, 2:] = 1.0
    ones = np.ones((5, 5))
    pyr = WaveletPyramid(low, (ones, ones, ones), (10, 10))
    # Sobel magnitude per column by hand: 0, 4, 4, 0, 0 (replicate padding)
    eps = 1e-6
    expected = np.tile([0.0, 4 / (4 + eps), 4 / (4 + eps), 0.0, 0.0], (5, 1))
    for band in edge_aware_filter(pyr, WmfConfig(epsilon=eps)).high:
        np.testing.assert_allclose(band, expected, rtol=0, atol=1e-15)


def test_constant_image_pipeline_identity():
    img = np.full((9, 12), 0.37)
    np.testing.assert_allclose(wmf(img), img, atol=1e-12)


def test_reconstruct_clamps():
    z = np.zeros((2, 2))
    pyr = WaveletPyramid(np.full((2, 2), 4.0), (z, z, z), (4, 4))
    assert reconstruct(pyr).max() == 1.0


def test_noisy_flat_variance_drops():
    g = np.random.default_rng(2024)
    img = 0.5 + g.uniform(-0.1, 0.1, (64, 64))
    assert wmf(img).var() < img.var()
