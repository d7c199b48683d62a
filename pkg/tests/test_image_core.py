import numpy as np
import pytest
from PIL import Image

from freqshield.errors import FormatError, ImageIOError, SpaceError
from freqshield.image_core import (RasterImage, load_png, resize_bilinear, rgb_to_yuv, save_png,
                                   yuv_to_rgb)

from conftest import random_image


def test_black_png(tmp_path):
    p = tmp_path / "k.png"
    Image.fromarray(np.zeros((2, 2, 3), np.uint8)).save(p)
    img = load_png(p)
    assert img.space == "RGB" and img.samples.shape == (2, 2, 3) and not img.samples.any()


def test_grayscale_replicated(tmp_path):
    p = tmp_path / "g.png"
    Image.fromarray(np.full((3, 3), 200, np.uint8), mode="L").save(p)
    assert (load_png(p).samples == 200).all()


def test_alpha_stripped_with_warning(tmp_path):
    p = tmp_path / "a.png"
    Image.fromarray(np.full((2, 2, 4), 9, np.uint8), mode="RGBA").save(p)
    with pytest.warns(UserWarning):
        img = load_png(p)
    assert img.samples.shape == (2, 2, 3)


def test_truncated_and_missing(tmp_path):
    p = tmp_path / "t.png"
    save_png(random_image(1, 16, 16), p)
    p.write_bytes(p.read_bytes()[:40])
    with pytest.raises(ImageIOError):
        load_png(p)
    with pytest.raises(ImageIOError):
        load_png(tmp_path / "nope.png")


def test_sixteen_bit_rejected(tmp_path):
    p = tmp_path / "s.png"
    Image.fromarray(np.full((2, 2), 1000, np.uint16)).save(p)
    with pytest.raises(FormatError):
        load_png(p)


@pytest.mark.parametrize("shape", [(64, 64), (1, 1), (5, 9)])
def test_png_roundtrip(tmp_path, shape):
    img = random_image(2, *shape)
    save_png(img, tmp_path / "r.png")
    assert load_png(tmp_path / "r.png") == img


def test_save_requires_rgb(tmp_path):
    with pytest.raises(SpaceError):
        save_png(rgb_to_yuv(random_image(0, 4, 4)), tmp_path / "y.png")


def _px(rgb):
    return RasterImage(np.array([[rgb]], dtype=np.uint8), "RGB")


@pytest.mark.parametrize("rgb,yuv", [
    ((128, 128, 128), (128, 128, 128)),
    ((255, 255, 255), (255, 128, 128)),
    ((255, 0, 0), (76, 85, 255)),
])
def test_yuv_reference_points(rgb, yuv):
    out = rgb_to_yuv(_px(rgb))
    assert out.space == "YUV"
    assert tuple(out.samples[0, 0]) == yuv


def test_yuv_inverse_fixed_points():
    assert tuple(yuv_to_rgb(RasterImage(np.array([[[128, 128, 128]]], np.uint8), "YUV")).samples[0, 0]) == (128,) * 3
    assert tuple(yuv_to_rgb(RasterImage(np.array([[[0, 128, 128]]], np.uint8), "YUV")).samples[0, 0]) == (0,) * 3


def test_yuv_roundtrip_within_one():
    img = random_image(3, 128, 128)
    back = yuv_to_rgb(rgb_to_yuv(img))
    assert np.abs(back.samples.astype(int) - img.samples.astype(int)).max() <= 1


def test_color_space_errors():
    with pytest.raises(SpaceError):
        yuv_to_rgb(random_image(0, 2, 2))
    with pytest.raises(SpaceError):
        rgb_to_yuv(rgb_to_yuv(random_image(0, 2, 2)))


def test_resize_identity_constant_and_hand_case():
    img = random_image(4, 256, 256)
    assert resize_bilinear(img, 256, 256) == img
    const = RasterImage(np.full((2, 2, 3), 77, np.uint8))
    assert (resize_bilinear(const, 4, 4).samples == 77).all()
    col = RasterImage(np.array([[[0] * 3], [[255] * 3]], np.uint8))
    assert resize_bilinear(col, 4, 1).samples[:, 0, 0].tolist() == [0, 64, 191, 255]
