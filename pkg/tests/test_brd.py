import numpy as np
import pytest

from istd_forge.brd import (
    BrdConfig,
    GridSpec,
    background_crops,
    block_scores,
    detect_background,
    score_image,
    select_blocks,
    upsample_background,
)
from istd_forge.wavelet import wmf
from oracles import naive_block_features, naive_block_scores


def sky_over_ground(seed=0, shape=(256, 320)):
    g = np.random.default_rng(seed)
    img = np.full(shape, 0.6)
    h = shape[0] // 2
    img[h:] = np.clip(0.4 + g.uniform(-0.3, 0.3, (shape[0] - h, shape[1])), 0, 1)
    return img


def test_flat_image_scores_zero():
    pm = block_scores(np.full((128, 192), 0.4), GridSpec(64))
    assert pm.scores.shape == (2, 3)
    assert np.all(pm.scores == 0)


def test_textured_block_scores_one():
    g = np.random.default_rng(1)
    img = np.full((48, 48), 0.5)
    img[:16, :16] = g.random((16, 16))
    pm = block_scores(img, GridSpec(16))
    assert pm.scores[0, 0] == 1.0
    # blocks not touching the textured one see no gradient at all
    assert np.all(pm.scores[2, :] == 0.0) and np.all(pm.scores[:, 2] == 0.0)


def test_noisy_left_half_scores_higher():
    g = np.random.default_rng(7)
    img = np.full((128, 128), 0.5)
    img[:, :64] += g.uniform(-0.3, 0.3, (128, 64))
    pm = block_scores(img, GridSpec(64))
    np.testing.assert_allclose(pm.scores, naive_block_scores(img, 64), atol=1e-9)
    assert pm.scores[:, 0].min() > pm.scores[:, 1].max()


@pytest.mark.parametrize("seed", range(3))
def test_raw_features_match_naive(seed):
    img = np.random.default_rng(seed).random((40, 56))
    pm = block_scores(img, GridSpec(8))
    edge, lap = naive_block_features(img, 8)
    np.testing.assert_allclose(pm.raw_edge, edge, atol=1e-9)
    np.testing.assert_allclose(pm.raw_lap, lap, atol=1e-9)


def test_image_smaller_than_block():
    with pytest.raises(ValueError):
        block_scores(np.zeros((32, 32)), GridSpec(64))


def test_partial_blocks_dropped():
    assert GridSpec(64).dims(640, 512) == (8, 10)


def test_flat_image_tie_break():
    crop, rect, pm = detect_background(np.full((256, 256), 0.3))
    assert pm.argmin() == (0, 0)
    assert (rect.x, rect.y) == (0, 0)


def test_sky_over_ground_crop_in_sky():
    img = sky_over_ground()
    crop, rect, pm = detect_background(img, BrdConfig(), grid=GridSpec(64))
    i, _ = pm.argmin()
    assert i < pm.scores.shape[0] / 2
    assert rect.y + rect.h <= img.shape[0] // 2


def test_full_resolution_crop_size():
    crop, rect, _ = detect_background(sky_over_ground(shape=(512, 640)))
    assert crop.shape == (126, 126)
    assert (rect.w, rect.h) == (126, 126)


def test_crop_comes_from_original_pixels():
    img = sky_over_ground(3)
    crop, rect, _ = detect_background(img)
    np.testing.assert_array_equal(crop, img[rect.slices()])


def test_crop_too_large():
    with pytest.raises(ValueError):
        detect_background(np.zeros((100, 100)), BrdConfig(crop_size=126), grid=GridSpec(32))


def test_selected_block_is_minimal():
    for seed in range(5):
        img = np.random.default_rng(seed).random((192, 256))
        _, _, pm = detect_background(img)
        assert pm.scores[pm.argmin()] == pm.scores.min()


def test_constant_offset_invariance():
    img = sky_over_ground(4) * 0.5
    a = block_scores(img, GridSpec(64)).scores
    b = block_scores(img + 0.25, GridSpec(64)).scores
    np.testing.assert_allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("factor", [0.5, 2.0])
def test_contrast_scaling_keeps_origin(factor):
    img = sky_over_ground(5) * 0.45
    _, rect, pm = detect_background(img)
    _, rect2, pm2 = detect_background(img * factor)
    assert rect == rect2
    np.testing.assert_allclose(pm.scores, pm2.scores, atol=1e-6)


def test_wmf_lowers_winning_edge_feature():
    g = np.random.default_rng(9)
    img = np.clip(0.5 + g.uniform(-0.1, 0.1, (192, 192)), 0, 1)
    _, _, pm = detect_background(img, BrdConfig(use_wmf=True))
    raw = block_scores(img, GridSpec(64))
    assert pm.raw_edge[pm.argmin()] <= raw.raw_edge[pm.argmin()]


def test_use_wmf_false_scores_original():
    img = sky_over_ground(6)
    pm = score_image(img, BrdConfig(use_wmf=False))
    np.testing.assert_array_equal(pm.scores, block_scores(img).scores)
    pm_w = score_image(img, BrdConfig(use_wmf=True))
    np.testing.assert_array_equal(pm_w.scores, block_scores(wmf(img)).scores)


def test_random_mode_is_seeded():
    img = sky_over_ground(2)
    cfg = BrdConfig(mode="random")
    a = detect_background(img, cfg, rng=np.random.default_rng(3))[1]
    b = detect_background(img, cfg, rng=np.random.default_rng(3))[1]
    assert a == b
    with pytest.raises(ValueError):
        detect_background(img, cfg)


def test_threshold_mode():
    img = sky_over_ground(8)
    cfg = BrdConfig(mode="threshold", tau_b=0.2)
    pm = score_image(img, cfg)
    blocks = select_blocks(pm, 0.2)
    assert blocks and all(pm.scores[b] < 0.2 for b in blocks)
    assert [pm.scores[b] for b in blocks] == sorted(pm.scores[b] for b in blocks)
    crops = background_crops(img, cfg)
    assert len(crops) == len(blocks)
    with pytest.raises(ValueError):
        detect_background(img, BrdConfig(mode="threshold", tau_b=0.0))


def test_heatmap_shape():
    pm = block_scores(sky_over_ground(), GridSpec(64))
    assert pm.heatmap().shape == (256, 320)


def test_invalid_weights():
    with pytest.raises(ValueError):
        BrdConfig(edge_weight=0.7, lap_weight=0.7)


class TestUpsample:
    def test_dims(self):
        assert upsample_background(np.zeros((126, 126)), 640, 512).shape == (512, 640)

    def test_constant(self):
        np.testing.assert_allclose(upsample_background(np.full((126, 126), 0.42), 640, 512), 0.42, atol=1e-15)

    def test_ramp_rows_stay_sorted(self):
        ramp = np.tile(np.linspace(0, 1, 200), (50, 1))
        small = upsample_background(ramp, 37, 20)
        back = upsample_background(small, 200, 50)
        assert np.all(np.diff(back, axis=1) >= 0)
