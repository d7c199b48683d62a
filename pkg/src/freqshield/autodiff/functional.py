"""Differentiable ops. Every function records itself on the active tape."""

from __future__ import annotations

import numpy as np

from ..errors import BatchTooSmall, ShapeError
from .tensor import Tensor, active_tape


def as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype) if dtype is not None else x)


def _result(op: str, data: np.ndarray, inputs, backward) -> Tensor:
    req = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=req)
    tape = active_tape()
    if req and tape is not None:
        tape.record(op, inputs, out, backward)
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _pair(a, b):
    if isinstance(a, Tensor):
        return a, as_tensor(b, a)
    b = as_tensor(b)
    return as_tensor(a, b), b


# ------------------------------------------------------------------ elementwise

def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    return _result(
        "add", a.data + b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    return _result(
        "sub", a.data - b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    return _result(
        "mul", a.data * b.data, (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def neg(a: Tensor) -> Tensor:
    return _result("neg", -a.data, (a,), lambda g: (-g,))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _result("relu", np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    e = np.exp(-np.abs(d))
    out = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype)
    # saturated inputs would round to exactly 0 or 1; keep the open interval
    one = np.ones((), dtype=x.dtype)
    out = np.clip(out, np.finfo(x.dtype).tiny, np.nextafter(one, 0 * one))
    return _result("sigmoid", out, (x,), lambda g: (g * out * (1.0 - out),))


# ------------------------------------------------------------------ shape / reductions

def reshape(x: Tensor, shape) -> Tensor:
    src = x.shape
    return _result("reshape", x.data.reshape(shape), (x,), lambda g: (g.reshape(src),))


def transpose(x: Tensor, axes) -> Tensor:
    inv = np.argsort(axes)
    return _result("transpose", x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),))


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = np.sum(x.data, axis=axis, keepdims=keepdims, dtype=np.float64).astype(x.dtype)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).astype(x.dtype),)

    return _result("sum", out, (x,), back)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = x.data.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    out = np.mean(x.data, axis=axis, keepdims=keepdims, dtype=np.float64).astype(x.dtype)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape).astype(x.dtype),)

    return _result("mean", out, (x,), back)


def amax(x: Tensor, axis: int) -> Tensor:
    """Max over one axis; ties send the gradient to the first index."""
    idx = np.argmax(x.data, axis=axis)
    out = np.take_along_axis(x.data, np.expand_dims(idx, axis), axis=axis).squeeze(axis)

    def back(g):
        gx = np.zeros_like(x.data)
        np.put_along_axis(gx, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis)
        return (gx,)

    return _result("amax", out, (x,), back)


def amin(x: Tensor, axis: int) -> Tensor:
    """Minimum computed as ``-max(-x)``."""
    return neg(amax(neg(x), axis))


# ------------------------------------------------------------------ linear algebra

def _swap(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def matmul(a, b) -> Tensor:
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul operands must be at least 2D")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dims disagree: {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def back(g):
        ga = _unbroadcast(np.matmul(g, _swap(b.data)), a.shape) if a.requires_grad else None
        gb = _unbroadcast(np.matmul(_swap(a.data), g), b.shape) if b.requires_grad else None
        return ga, gb

    return _result("matmul", out, (a, b), back)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight.T + bias`` with ``weight`` stored as (out, in)."""
    if x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"linear expects {weight.shape[1]} features, got {x.shape[-1]}")
    y = matmul(x, transpose(weight, (1, 0)))
    return add(y, bias) if bias is not None else y


# ------------------------------------------------------------------ convolution / pooling

def _as_batched(x: Tensor):
    if x.ndim == 3:
        return reshape(x, (1,) + x.shape), True
    if x.ndim != 4:
        raise ShapeError(f"expected C x H x W or N x C x H x W, got {x.shape}")
    return x, False


def conv2d(x: Tensor, w: Tensor, bias: Tensor | None = None, padding: int | None = None) -> Tensor:
    """Stride-1 cross-correlation, zero padding (default: same size for odd kernels)."""
    x, squeeze = _as_batched(x)
    n, c, h, wd = x.shape
    o, c2, kh, kw = w.shape
    if c != c2:
        raise ShapeError(f"conv2d expects {c2} input channels, got {c}")
    p = kh // 2 if padding is None else padding
    ho, wo = h + 2 * p - kh + 1, wd + 2 * p - kw + 1
    if ho < 1 or wo < 1:
        raise ShapeError("kernel larger than padded input")
    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p))) if p else x.data
    # cols[n, (i, j, c), (h, w)]: one shifted copy per kernel tap, no transposes
    cols = np.empty((n, kh * kw, c, ho, wo), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, i * kw + j] = xp[:, :, i:i + ho, j:j + wo]
    cols = cols.reshape(n, kh * kw * c, ho * wo)
    wm = np.ascontiguousarray(w.data.transpose(0, 2, 3, 1)).reshape(o, kh * kw * c)
    out = np.matmul(wm, cols)
    if bias is not None:
        out += bias.data.reshape(1, o, 1)
    out = out.reshape(n, o, ho, wo)
    inputs = (x, w) if bias is None else (x, w, bias)

    def back(g):
        gm = g.reshape(n, o, ho * wo)
        gw = None
        if w.requires_grad:
            gwm = np.matmul(gm, cols.transpose(0, 2, 1)).sum(axis=0)
            gw = gwm.reshape(o, kh, kw, c).transpose(0, 3, 1, 2)
        gx = None
        if x.requires_grad:
            gcols = np.matmul(wm.T, gm).reshape(n, kh * kw, c, ho, wo)
            gxp = np.zeros(xp.shape, dtype=x.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + ho, j:j + wo] += gcols[:, i * kw + j]
            gx = gxp[:, :, p:p + h, p:p + wd] if p else gxp
        if bias is None:
            return gx, gw
        return gx, gw, gm.sum(axis=(0, 2))

    y = _result("conv2d", out, inputs, back)
    return reshape(y, y.shape[1:]) if squeeze else y


def conv2d_3x3(x: Tensor, w: Tensor, bias: Tensor | None = None) -> Tensor:
    if w.shape[2:] != (3, 3):
        raise ShapeError(f"expected a 3x3 kernel, got {w.shape[2:]}")
    return conv2d(x, w, bias, padding=1)


def maxpool2d(x: Tensor, window: int, stride: int | None = None, padding: int = 0) -> Tensor:
    """Max pooling with -inf padding; ties route the gradient to the first row-major index."""
    x, squeeze = _as_batched(x)
    s = stride or window
    k = window
    n, c, h, w = x.shape
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)),
                constant_values=-np.inf) if padding else x.data
    ho = (h + 2 * padding - k) // s + 1
    wo = (w + 2 * padding - k) // s + 1
    if ho < 1 or wo < 1:
        raise ShapeError("pooling window larger than input")

    def tap(arr, o):
        i, j = divmod(o, k)
        return arr[:, :, i:i + s * (ho - 1) + 1:s, j:j + s * (wo - 1) + 1:s]

    out = tap(xp, 0).copy()
    for o in range(1, k * k):
        np.maximum(out, tap(xp, o), out=out)

    def back(g):
        gxp = np.zeros(xp.shape, dtype=x.dtype)
        taken = np.zeros(out.shape, dtype=bool)
        for o in range(k * k):
            # first tap equal to the max wins ties
            hit = tap(xp, o) == out
            hit &= ~taken
            taken |= hit
            tap(gxp, o)[...] += g * hit
        gx = gxp[:, :, padding:padding + h, padding:padding + w] if padding else gxp
        return (gx,)

    y = _result("maxpool2d", out, (x,), back)
    return reshape(y, y.shape[1:]) if squeeze else y


def _adaptive_bounds(n_in: int, n_out: int):
    return [((i * n_in) // n_out, -(-((i + 1) * n_in) // n_out)) for i in range(n_out)]


def adaptive_maxpool2d(x: Tensor, out_h: int, out_w: int) -> Tensor:
    x, squeeze = _as_batched(x)
    n, c, h, w = x.shape
    rows = _adaptive_bounds(h, out_h)
    cols = _adaptive_bounds(w, out_w)
    out = np.empty((n, c, out_h, out_w), dtype=x.dtype)
    argm = {}
    for i, (r0, r1) in enumerate(rows):
        for j, (c0, c1) in enumerate(cols):
            patch = x.data[:, :, r0:r1, c0:c1].reshape(n, c, -1)
            a = patch.argmax(axis=-1)
            argm[i, j] = a
            out[:, :, i, j] = np.take_along_axis(patch, a[..., None], axis=-1)[..., 0]

    def back(g):
        gx = np.zeros_like(x.data)
        for i, (r0, r1) in enumerate(rows):
            for j, (c0, c1) in enumerate(cols):
                pw = c1 - c0
                a = argm[i, j]
                rr, cc = r0 + a // pw, c0 + a % pw
                nn, ch = np.indices(a.shape)
                np.add.at(gx, (nn, ch, rr, cc), g[:, :, i, j])
        return (gx,)

    y = _result("adaptive_maxpool2d", out, (x,), back)
    return reshape(y, y.shape[1:]) if squeeze else y


def avgpool_global(x: Tensor) -> Tensor:
    """Mean over the two trailing (spatial) axes."""
    if x.ndim < 3:
        raise ShapeError(f"avgpool_global expects spatial axes, got {x.shape}")
    return mean(x, axis=(-2, -1))


# ------------------------------------------------------------------ normalization / regularization

def batchnorm(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
              running_var: np.ndarray, training: bool, momentum: float = 0.1,
              eps: float = 1e-5) -> Tensor:
    """Per-feature normalization over every axis but 1 (N x C or N x C x H x W)."""
    if x.ndim not in (2, 4):
        raise ShapeError(f"batchnorm expects N x C or N x C x H x W, got {x.shape}")
    axes = (0,) if x.ndim == 2 else (0, 2, 3)
    bshape = (1, -1) + (1,) * (x.ndim - 2)
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"batchnorm affine params must have shape ({c},)")
    if training:
        if x.shape[0] < 2:
            raise BatchTooSmall("batchnorm in train mode needs a batch of at least 2")
        count = x.data.size // c
        mu = x.data.mean(axis=axes, dtype=np.float64)
        var = x.data.var(axis=axes, dtype=np.float64)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var * count / max(count - 1, 1)
    else:
        mu = running_mean.astype(np.float64)
        var = running_var.astype(np.float64)
    inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype).reshape(bshape)
    xhat = (x.data - mu.astype(x.dtype).reshape(bshape)) * inv_std
    out = gamma.data.reshape(bshape) * xhat + beta.data.reshape(bshape)

    def back(g):
        ggamma = np.sum(g * xhat, axis=axes, dtype=np.float64).astype(x.dtype)
        gbeta = np.sum(g, axis=axes, dtype=np.float64).astype(x.dtype)
        gxhat = g * gamma.data.reshape(bshape)
        if training:
            m1 = gxhat.mean(axis=axes, keepdims=True, dtype=np.float64).astype(x.dtype)
            m2 = (gxhat * xhat).mean(axis=axes, keepdims=True, dtype=np.float64).astype(x.dtype)
            gx = inv_std * (gxhat - m1 - xhat * m2)
        else:
            gx = gxhat * inv_std
        return gx, ggamma, gbeta

    return _result("batchnorm", out.astype(x.dtype), (x, gamma, beta), back)


def dropout(x: Tensor, p: float, training: bool, rng=None) -> Tensor:
    """Inverted dropout driven by a DetRng; identity in eval mode or when p == 0."""
    if not 0.0 <= p < 1.0:
        raise ValueError("dropout probability must be in [0, 1)")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in train mode needs a DetRng")
    keep = (rng.uniform_array(x.data.size) >= p).reshape(x.shape)
    scale = np.asarray(1.0 / (1.0 - p), dtype=x.dtype)
    mask = keep * scale
    return _result("dropout", x.data * mask, (x,), lambda g: (g * mask,))


# ------------------------------------------------------------------ loss

def cross_entropy_logits(logits: Tensor, labels) -> Tensor:
    """Mean negative log-softmax of the true class (binary labels)."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if logits.ndim != 2 or logits.shape[0] != labels.size:
        raise ShapeError(f"logits {logits.shape} do not match {labels.size} labels")
    if np.any((labels < 0) | (labels > 1)):
        raise ValueError("labels must be 0 or 1")
    z = logits.data.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsum
    b = labels.size
    loss = -logp[np.arange(b), labels].mean()

    def back(g):
        grad = np.exp(logp)
        grad[np.arange(b), labels] -= 1.0
        return ((grad * (float(g) / b)).astype(logits.dtype),)

    return _result("cross_entropy", np.asarray(loss, dtype=logits.dtype), (logits,), back)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
