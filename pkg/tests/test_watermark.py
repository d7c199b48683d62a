import json

import numpy as np
import pytest

from freqshield.errors import CapacityError, SpaceError, UnknownAlgorithm
from freqshield.image_core import RasterImage, rgb_to_yuv, rgb_to_yuv_planes
from freqshield.prng import DetRng
from freqshield.residual import absolute_residual, psnr
from freqshield.spectral import dct2, haar_dwt2
from freqshield.watermark import (EmbedConfig, Payload32, decode_lsb, decode_patchwork, embed,
                                  embed_dct_float, embed_lsb, embed_patchwork, patchwork_statistic)

from conftest import flat_image, random_image


def test_payload_parsing():
    m = Payload32.from_bitstring("10" * 16)
    assert str(m) == "10" * 16
    with pytest.raises(ValueError):
        Payload32.from_bitstring("1" * 31)
    with pytest.raises(ValueError):
        Payload32.from_bitstring("2" * 32)
    assert Payload32.random(DetRng(1)) == Payload32.random(DetRng(1))


def test_config_json_roundtrip():
    cfg = EmbedConfig("dwt", seed=42, alpha=10.0)
    assert EmbedConfig.from_json(cfg.to_json()) == cfg
    assert json.loads(cfg.to_json())["algo"] == "dwt"
    with pytest.raises(UnknownAlgorithm):
        EmbedConfig("hidden")
    with pytest.raises(ValueError):
        EmbedConfig.from_dict({"algo": "dct", "beta": 1})


def test_embed_requires_rgb():
    with pytest.raises(SpaceError):
        embed(EmbedConfig("lsb"), rgb_to_yuv(random_image(0, 8, 8)), Payload32.zeros())


def test_lsb_identity_on_even_blue():
    img = random_image(1)
    img.samples[:, :, 2] &= 0xFE
    assert embed(EmbedConfig("lsb"), img, Payload32.zeros()) == img


def test_lsb_contract():
    img = random_image(2)
    img.samples[:, :, 2] = 0
    out = embed_lsb(img, Payload32.ones())
    assert (out.samples[:, :, 2] == 1).all()
    img = random_image(3)
    m = Payload32.random(DetRng(3))
    out = embed_lsb(img, m)
    np.testing.assert_array_equal(out.samples[:, :, :2], img.samples[:, :, :2])
    assert absolute_residual(img, out).max() == 1
    assert decode_lsb(out) == m
    assert decode_lsb(RasterImage(np.zeros((8, 8, 3), np.uint8))) == Payload32.zeros()
    # tiling: pixel i carries bit i mod 32
    flat = out.samples[:, :, 2].reshape(-1) & 1
    assert flat[32:64].tolist() == list(m.bits)


def test_patchwork_identity_and_capacity():
    img = random_image(4, 256, 256)
    assert embed(EmbedConfig("patchwork", d=0), img, Payload32.ones()) == img
    with pytest.raises(CapacityError):
        embed(EmbedConfig("patchwork"), random_image(0, 16, 16), Payload32.ones())


def test_patchwork_flat_statistic_alternates():
    cfg = EmbedConfig("patchwork", seed=9)
    m = Payload32.from_bitstring("10" * 16)
    carrier = flat_image(128, 256, 256)
    assert not patchwork_statistic(carrier, cfg).any()
    stats = patchwork_statistic(embed_patchwork(carrier, m, cfg), cfg)
    np.testing.assert_array_equal(stats, [10.0, -10.0] * 16)


def test_patchwork_residual_bounds():
    img = random_image(5, 256, 256)
    cfg = EmbedConfig("patchwork", seed=5)
    out = embed(cfg, img, Payload32.random(DetRng(5)))
    r = absolute_residual(img, out)
    assert (r > 0).sum() <= 6400
    nz = r[r > 0]
    assert nz.min() >= 1 and nz.max() <= 5
    np.testing.assert_array_equal(out.samples[:, :, :2], img.samples[:, :, :2])
    # unclamped pixels move by exactly d
    blue = img.samples[:, :, 2]
    interior = (r > 0) & (blue >= 5) & (blue <= 250)
    assert (r[interior] == 5).all()


def test_patchwork_flat_carrier_decodes():
    cfg = EmbedConfig("patchwork", seed=2)
    m = Payload32.random(DetRng(12))
    assert decode_patchwork(embed(cfg, flat_image(90, 256, 256), m), cfg) == m


def test_dct_dc_untouched_and_alpha_zero():
    img = random_image(6)
    m = Payload32.random(DetRng(6))
    cfg = EmbedConfig("dct", seed=6)
    y, marked, _, _ = embed_dct_float(img, m, cfg)
    assert abs(dct2(marked - y)[0, 0]) < 1e-9
    assert embed(EmbedConfig("dct", alpha=0), img, m) == img


def test_dct_mean_abs_change_small():
    for s in range(10):
        img = random_image(100 + s)
        out = embed(EmbedConfig("dct", seed=s), img, Payload32.random(DetRng(s)))
        assert np.abs(out.samples.astype(int) - img.samples.astype(int)).mean() <= 3


def test_dwt_energy_in_hl2_and_dense():
    img = random_image(7)
    out = embed(EmbedConfig("dwt", seed=7), img, Payload32.random(DetRng(7)))
    y0, _, _ = rgb_to_yuv_planes(img)
    y1, _, _ = rgb_to_yuv_planes(out)
    pyr = haar_dwt2(y1 - y0, 2)
    total = sum((b ** 2).sum() for b in pyr.bands[0].values() if b is not pyr.bands[0]["LL"])
    total += sum((b ** 2).sum() for b in pyr.bands[1].values())
    assert (pyr.band(2, "HL") ** 2).sum() / total >= 0.99
    assert (absolute_residual(img, out) > 0).mean() >= 0.5
    assert embed(EmbedConfig("dwt", alpha=0), img, Payload32.ones()) == img


@pytest.mark.parametrize("algo", ["lsb", "patchwork", "dct", "dwt"])
def test_determinism_and_psnr(algo):
    img = random_image(8, 128, 128)
    cfg = EmbedConfig(algo, seed=3, pairs_per_bit=20)
    m = Payload32.random(DetRng(8))
    a, b = embed(cfg, img, m), embed(cfg, img, m)
    assert a == b and a.samples.shape == img.samples.shape
    assert psnr(a, img) >= 30
