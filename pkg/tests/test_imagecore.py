import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image as PILImage

from istd_forge.imagecore import (
    ImageFormatError,
    Rect,
    laplacian,
    load_image,
    make_rng,
    resize_bilinear,
    save_image,
    sobel_gradients,
    split_rng,
)
from oracles import naive_laplacian, naive_sobel

unit_images = arrays(
    np.float64,
    st.tuples(st.integers(3, 12), st.integers(3, 12)),
    elements=st.floats(0.0, 1.0, allow_nan=False),
)


def write_pgm(path, data, maxval):
    h, w = data.shape
    header = f"P5\n# comment\n{w} {h}\n{maxval}\n".encode()
    dtype = ">u2" if maxval > 255 else "u1"
    path.write_bytes(header + data.astype(dtype).tobytes())


class TestIO:
    def test_pgm_all_white(self, tmp_path):
        write_pgm(tmp_path / "w.pgm", np.full((4, 5), 255), 255)
        img = load_image(tmp_path / "w.pgm")
        assert img.shape == (4, 5)
        assert np.all(img == 1.0)

    def test_pgm_all_black(self, tmp_path):
        write_pgm(tmp_path / "b.pgm", np.zeros((3, 3)), 255)
        assert np.all(load_image(tmp_path / "b.pgm") == 0.0)

    def test_pgm_16bit(self, tmp_path):
        data = np.array([[0, 65535], [32768, 1000]])
        write_pgm(tmp_path / "d.pgm", data, 65535)
        np.testing.assert_allclose(load_image(tmp_path / "d.pgm"), data / 65535.0)

    def test_png_dimensions(self, tmp_path):
        PILImage.fromarray(np.zeros((512, 640), np.uint8)).save(tmp_path / "f.png")
        img = load_image(tmp_path / "f.png")
        assert img.shape == (512, 640)

    def test_png_16bit(self, tmp_path):
        data = np.array([[0, 65535], [12345, 40000]], dtype=np.uint16)
        PILImage.fromarray(data).save(tmp_path / "d16.png")
        np.testing.assert_allclose(load_image(tmp_path / "d16.png"), data / 65535.0)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_image(tmp_path / "nope.png")

    def test_unsupported_format(self, tmp_path):
        (tmp_path / "x.png").write_bytes(b"GIF89a....")
        with pytest.raises(ImageFormatError):
            load_image(tmp_path / "x.png")

    def test_color_png_rejected(self, tmp_path):
        PILImage.fromarray(np.zeros((4, 4, 3), np.uint8)).save(tmp_path / "c.png")
        with pytest.raises(ImageFormatError):
            load_image(tmp_path / "c.png")

    @pytest.mark.parametrize("suffix", [".png", ".pgm"])
    def test_round_trip_half(self, tmp_path, suffix):
        save_image(np.full((6, 7), 0.5), tmp_path / f"h{suffix}")
        back = load_image(tmp_path / f"h{suffix}")
        assert np.abs(back - 0.5).max() <= 1 / 255

    def test_round_trip_ramp(self, tmp_path):
        ramp = np.array([[0.0] * 3, [0.5] * 3, [1.0] * 3])
        save_image(ramp, tmp_path / "r.png")
        assert np.abs(load_image(tmp_path / "r.png") - ramp).max() <= 1 / 255

    def test_round_trip_full_size(self, tmp_path):
        save_image(np.zeros((512, 640)), tmp_path / "z.png")
        assert load_image(tmp_path / "z.png").shape == (512, 640)

    @settings(max_examples=25, deadline=None)
    @given(img=unit_images)
    def test_round_trip_property(self, tmp_path_factory, img):
        path = tmp_path_factory.mktemp("rt") / "p.png"
        save_image(img, path)
        assert np.abs(load_image(path) - img).max() <= 1 / 255 + 1e-12

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError):
            save_image(np.zeros((2, 2)), tmp_path / "missing_dir" / "a.png")


class TestResize:
    def test_constant(self):
        out = resize_bilinear(np.full((5, 7), 0.7), 13, 3)
        np.testing.assert_allclose(out, 0.7, atol=1e-15)

    def test_two_by_two_to_four(self):
        # sample centres map to -0.25, 0.25, 0.75, 1.25 -> clamped, weights by hand
        out = resize_bilinear(np.array([[0.0, 1.0], [0.0, 1.0]]), 4, 4)
        expected_row = [0.0, 0.25, 0.75, 1.0]
        for row in out:
            np.testing.assert_allclose(row, expected_row, atol=1e-15)

    def test_crop_upsample_dims(self):
        assert resize_bilinear(np.zeros((126, 126)), 640, 512).shape == (512, 640)

    def test_zero_dim(self):
        with pytest.raises(ValueError):
            resize_bilinear(np.zeros((3, 3)), 0, 4)

    @settings(max_examples=40, deadline=None)
    @given(img=unit_images, nw=st.integers(1, 20), nh=st.integers(1, 20))
    def test_monotone_envelope(self, img, nw, nh):
        out = resize_bilinear(img, nw, nh)
        assert out.min() >= img.min() and out.max() <= img.max()


class TestDerivatives:
    def test_sobel_constant(self):
        gx, gy = sobel_gradients(np.full((5, 5), 0.3))
        assert np.all(gx == 0) and np.all(gy == 0)

    def test_sobel_step(self):
        img = np.zeros((5, 5))
        img[:, 2:] = 1.0
        gx, gy = sobel_gradients(img)
        # column 1 sees (1 + 2 + 1) on its right and 0 on its left
        assert np.all(gx[1:-1, 1] == 4.0)
        assert np.all(gx[1:-1, 2] == 4.0)
        assert np.all(gy[1:-1, 1:-1] == 0.0)

    def test_sobel_transpose(self, rng):
        img = rng.random((6, 9))
        gx, gy = sobel_gradients(img)
        tx, ty = sobel_gradients(img.T)
        np.testing.assert_allclose(tx, gy.T, atol=1e-14)
        np.testing.assert_allclose(ty, gx.T, atol=1e-14)

    def test_sobel_matches_naive(self, rng):
        img = rng.random((7, 8))
        gx, gy = sobel_gradients(img)
        ox, oy = naive_sobel(img)
        np.testing.assert_allclose(gx, ox, atol=1e-12)
        np.testing.assert_allclose(gy, oy, atol=1e-12)

    def test_laplacian_constant(self):
        assert np.all(laplacian(np.full((4, 4), 0.9)) == 0)

    def test_laplacian_ramp_interior(self):
        yy, xx = np.mgrid[0:6, 0:8]
        ramp = (0.05 * xx + 0.02 * yy)
        np.testing.assert_allclose(laplacian(ramp)[1:-1, 1:-1], 0.0, atol=1e-14)

    def test_laplacian_impulse(self):
        img = np.zeros((3, 3))
        img[1, 1] = 1.0
        np.testing.assert_array_equal(laplacian(img), [[0, 1, 0], [1, -4, 1], [0, 1, 0]])

    def test_laplacian_matches_naive(self, rng):
        img = rng.random((5, 9))
        np.testing.assert_allclose(laplacian(img), naive_laplacian(img), atol=1e-12)

    @pytest.mark.parametrize("shape", [(2, 5), (5, 2)])
    def test_too_small(self, shape):
        with pytest.raises(ValueError):
            sobel_gradients(np.zeros(shape))
        with pytest.raises(ValueError):
            laplacian(np.zeros(shape))

    @settings(max_examples=30, deadline=None)
    @given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2**32 - 1))
    def test_linearity(self, a, b, seed):
        g = np.random.default_rng(seed)
        x, y = g.random((5, 6)), g.random((5, 6))
        combo = a * x + b * y
        gx, gy = sobel_gradients(combo)
        xx, xy = sobel_gradients(x)
        yx, yy = sobel_gradients(y)
        np.testing.assert_allclose(gx, a * xx + b * yx, atol=1e-10)
        np.testing.assert_allclose(gy, a * xy + b * yy, atol=1e-10)
        np.testing.assert_allclose(laplacian(combo), a * laplacian(x) + b * laplacian(y), atol=1e-10)


class TestRng:
    def test_same_seed_same_stream(self):
        assert np.array_equal(make_rng(7).random(10), make_rng(7).random(10))

    def test_different_seeds_differ(self):
        assert not np.array_equal(make_rng(7).random(10), make_rng(8).random(10))

    def test_split_is_deterministic(self):
        a = [g.random(3) for g in split_rng(make_rng(3), 4)]
        b = [g.random(3) for g in split_rng(make_rng(3), 4)]
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
        assert not np.array_equal(a[0], a[1])


def test_rect_validation():
    r = Rect(1, 2, 3, 4)
    assert r.fits(4, 6) and not r.fits(3, 6)
    with pytest.raises(ValueError):
        Rect(0, 0, 0, 1)
    with pytest.raises(ValueError):
        Rect(-1, 0, 1, 1)
