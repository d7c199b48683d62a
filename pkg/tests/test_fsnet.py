import numpy as np
import pytest

from freqshield.autodiff import Tape, Tensor, functional as F
from freqshield.errors import ShapeError
from freqshield.fsnet import (FsnetConfig, FsnetModel, backbone_forward, make_optimizer, predict,
                              predict_batch, train_step)
from freqshield.image_core import RasterImage

from conftest import random_image

SMALL = FsnetConfig(input_size=16, c_stem=4, stages=(4, 8, 8), n_freq=4, seed=1)


def test_aspm_gate_identities():
    model = FsnetModel(SMALL)
    x = Tensor(np.random.default_rng(0).random((2, 3, 16, 16)).astype(np.float32))
    r = model.aspm.spatial_residual(x)
    assert np.abs(r.data - x.data).max() < 1e-4
    model.aspm.mask.data[...] = 0
    assert np.abs(model.aspm.spatial_residual(x).data).max() < 1e-6
    np.testing.assert_allclose(model.aspm.fusion_input(x).data, x.data, atol=1e-6)
    with pytest.raises(ShapeError):
        model.aspm(Tensor(np.zeros((1, 3, 4, 4), np.float32)))


def test_backbone_downsamples_by_eight():
    model = FsnetModel(SMALL)
    out = backbone_forward(model, Tensor(np.zeros((2, 4, 16, 16), np.float32)))
    assert out.shape == (2, 8, 2, 2)


def test_dmsa_attention_range_and_constant_descriptor():
    model = FsnetModel(SMALL)
    f = Tensor(np.random.default_rng(1).normal(size=(3, 8, 2, 2)).astype(np.float32))
    v = model.dmsa.attention(f).data
    assert v.shape == (3, 8) and (v > 0).all() and (v < 1).all()
    # channel-constant maps fed through a single DC basis give equal descriptors
    cfg = FsnetConfig(input_size=16, c_stem=4, stages=(4, 8, 8), n_freq=1, seed=1)
    m1 = FsnetModel(cfg)
    const = Tensor(np.full((1, 8, 2, 2), 0.25, np.float32))
    pooled = m1.dmsa.pooled(const).data
    s = m1.dmsa.spectral_descriptors(const).data[0, 0, 0]
    np.testing.assert_allclose(pooled, 3 * s / 1, rtol=1e-6)


def test_forward_shapes_and_determinism():
    model = FsnetModel(SMALL)
    x = np.random.default_rng(2).random((4, 3, 16, 16)).astype(np.float32)
    a, b = model(x).data, model(x).data
    assert a.shape == (4, 2)
    np.testing.assert_array_equal(a, b)
    perm = [2, 0, 3, 1]
    np.testing.assert_allclose(model(x[perm]).data, a[perm], atol=1e-6)
    big = FsnetModel(FsnetConfig(input_size=32, c_stem=4, stages=(4, 8, 8), n_freq=4))
    assert big(np.zeros((2, 3, 24, 40), np.float32)).shape == (2, 2)


def test_predict():
    model = FsnetModel(SMALL)
    img = random_image(3, 40, 24)
    label, probs = predict(model, img)
    assert label in (0, 1) and abs(probs.sum() - 1) < 1e-6
    assert predict(model, img)[0] == label
    logits = model(np.zeros((1, 3, 16, 16), np.float32)).data
    assert np.argmax(logits + 5.0) == np.argmax(logits)


def toy_set(n=16):
    rng = np.random.default_rng(0)
    xs, ys = [], []
    yy, xx = np.mgrid[0:16, 0:16]
    checker = ((yy + xx) % 2).astype(np.float32)
    for i in range(n):
        if i % 2 == 0:
            xs.append(np.full((3, 16, 16), rng.random(), np.float32))
            ys.append(0)
        else:
            lo, hi = sorted(rng.random(2))
            xs.append(np.broadcast_to(lo + (hi - lo + 0.2) * checker, (3, 16, 16)).astype(np.float32))
            ys.append(1)
    return np.stack(xs), np.array(ys)


def _train(seed, steps=50):
    model = FsnetModel(FsnetConfig(input_size=16, seed=seed))
    opt = make_optimizer(model, lr=3e-3, mask_lr_scale=30.0)
    x, y = toy_set()
    return [train_step(model, opt, x, y) for _ in range(steps)], model


def test_train_step_toy_separable():
    losses, model = _train(0)
    assert abs(losses[0] - np.log(2)) < 0.2
    assert losses[-1] < 0.1
    x, y = toy_set()
    assert (predict_batch(model, x)[0] == y).all()
    again, _ = _train(0, steps=5)
    assert again == losses[:5]


def test_save_load_roundtrip(tmp_path):
    _, model = _train(4, steps=3)
    model.save(tmp_path / "m.fsn", {"note": "x"})
    back = FsnetModel.load(tmp_path / "m.fsn")
    x, _ = toy_set()
    np.testing.assert_array_equal(model(x).data, back(x).data)
    assert back.cfg == model.cfg
