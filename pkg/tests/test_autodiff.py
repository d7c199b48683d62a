import numpy as np
import pytest

from freqshield.autodiff import AdamW, Tape, Tensor, functional as F, load_arrays, save_arrays
from freqshield.errors import BatchTooSmall, FormatError, ShapeError
from freqshield.gradcheck import run_suite
from freqshield.prng import DetRng


def leaf(arr):
    return Tensor(np.asarray(arr, dtype=np.float64), requires_grad=True)


def test_matmul_values():
    eye = Tensor(np.eye(3))
    a = Tensor(np.arange(9.0).reshape(3, 3))
    np.testing.assert_array_equal(F.matmul(eye, a).data, a.data)
    out = F.matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[1.0], [1.0]]))
    assert out.data.tolist() == [[3.0], [7.0]]


def test_conv_delta_and_bias():
    x = Tensor(np.random.default_rng(0).random((1, 2, 5, 5)))
    w = np.zeros((2, 2, 3, 3))
    w[0, 0, 1, 1] = w[1, 1, 1, 1] = 1
    np.testing.assert_allclose(F.conv2d_3x3(x, Tensor(w)).data, x.data)
    out = F.conv2d_3x3(x, Tensor(np.zeros((2, 2, 3, 3))), Tensor(np.array([0.5, -1.0])))
    assert (out.data[0, 0] == 0.5).all() and (out.data[0, 1] == -1.0).all()


def test_pooling():
    assert F.maxpool2d(Tensor(np.array([[[[1.0, 2.0], [3.0, 4.0]]]])), 2).data.item() == 4.0
    const = Tensor(np.full((1, 1, 4, 4), 2.5))
    assert (F.maxpool2d(const, 3, 1, 1).data == 2.5).all()
    x = Tensor(np.random.default_rng(1).random((2, 3, 6, 6)))
    neg_max = -F.maxpool2d(Tensor(-x.data), 2).data
    win_min = x.data.reshape(2, 3, 3, 2, 3, 2).min(axis=(3, 5))
    np.testing.assert_array_equal(neg_max, win_min)
    np.testing.assert_allclose(F.avgpool_global(const).data, [[2.5]])


def test_activations():
    assert F.relu(Tensor([-1.0, 0.0, 2.0])).data.tolist() == [0, 0, 2]
    assert F.sigmoid(Tensor([0.0])).data[0] == 0.5
    s = F.sigmoid(Tensor(np.linspace(-30, 30, 101))).data
    assert (s > 0).all() and (s < 1).all()


def test_batchnorm_train_and_eval():
    x = Tensor(np.random.default_rng(2).normal(3, 2, (16, 4, 3, 3)))
    g, b = Tensor(np.ones(4)), Tensor(np.zeros(4))
    out = F.batchnorm(x, g, b, np.zeros(4), np.ones(4), True).data
    assert np.abs(out.mean(axis=(0, 2, 3))).max() < 1e-5
    assert np.abs(out.var(axis=(0, 2, 3)) - 1).max() < 1e-3
    ev = F.batchnorm(x, g, b, np.zeros(4), np.ones(4), False).data
    np.testing.assert_allclose(ev, x.data, atol=1e-4)
    with pytest.raises(BatchTooSmall):
        F.batchnorm(Tensor(np.ones((1, 4))), g, b, np.zeros(4), np.ones(4), True)
    with pytest.raises(ShapeError):
        F.batchnorm(Tensor(np.ones((2, 4, 3))), g, b, np.zeros(4), np.ones(4), True)


def test_dropout():
    x = Tensor(np.ones(100_000))
    assert F.dropout(x, 0.0, True, DetRng(0)) is x
    assert F.dropout(x, 0.3, False) is x
    kept = (F.dropout(x, 0.3, True, DetRng(0)).data > 0).mean()
    assert abs(kept - 0.7) < 0.01


def test_cross_entropy_values():
    assert F.cross_entropy_logits(Tensor([[0.0, 0.0]]), [0]).data == pytest.approx(np.log(2), abs=1e-6)
    assert F.cross_entropy_logits(Tensor([[20.0, -20.0]]), [0]).data == pytest.approx(0, abs=1e-6)
    with pytest.raises(ShapeError):
        F.cross_entropy_logits(Tensor([[0.0, 0.0]]), [0, 1])


def test_backward_basics():
    x, unused = leaf(np.arange(4.0)), leaf(np.ones(2))
    unused.grad = np.zeros(2)
    with Tape() as tape:
        loss = F.sum(x)
    tape.backward(loss)
    np.testing.assert_array_equal(x.grad, 1)
    assert not unused.grad.any()
    tape.backward(loss)
    np.testing.assert_array_equal(x.grad, 2)


def test_adamw_first_step_and_decay():
    p = Tensor.parameter(np.full(3, 1.0), dtype=np.float64)
    opt = AdamW([p], lr=0.01, weight_decay=0.0)
    p.grad = np.full(3, 0.5)
    opt.step()
    np.testing.assert_allclose(p.data, 1.0 - 0.01, atol=1e-6)
    q = Tensor.parameter(np.full(3, 2.0), dtype=np.float64)
    opt = AdamW([q], lr=0.1, weight_decay=0.5)
    q.grad = np.zeros(3)
    opt.step()
    np.testing.assert_allclose(q.data, 2.0 * (1 - 0.1 * 0.5))


def test_checkpoint_roundtrip(tmp_path):
    arrays = {"a": np.arange(6, dtype=np.float32).reshape(2, 3), "b": np.array([7], dtype=np.uint64)}
    save_arrays(tmp_path / "c.fsn", arrays, {"k": 1})
    back, meta = load_arrays(tmp_path / "c.fsn")
    assert meta["k"] == 1
    for k in arrays:
        np.testing.assert_array_equal(back[k], arrays[k])
    (tmp_path / "bad.fsn").write_bytes(b"not a checkpoint")
    with pytest.raises(FormatError):
        load_arrays(tmp_path / "bad.fsn")


def test_gradcheck_suite_passes():
    results = run_suite()
    assert len(results) >= 25
    bad = [r.to_dict() for r in results if not r.passed]
    assert not bad, bad
