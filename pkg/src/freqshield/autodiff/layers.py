"""Parameter-holding layers used by FSNet."""

from __future__ import annotations

import numpy as np

from ..prng import DetRng
from . import functional as F
from .tensor import Tensor


def he_normal(rng: DetRng, shape, fan_in: int, gain: float = np.sqrt(2.0)) -> np.ndarray:
    std = gain / np.sqrt(fan_in)
    return (rng.normal_array(int(np.prod(shape))) * std).reshape(shape)


class Layer:
    """Base: subclasses register parameters in ``self._params`` and buffers in ``self._buffers``."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._buffers: dict[str, np.ndarray] = {}

    def named_parameters(self, prefix: str = ""):
        for name, p in self._params.items():
            yield prefix + name, p

    def named_buffers(self, prefix: str = ""):
        for name, b in self._buffers.items():
            yield prefix + name, b


class Conv2d(Layer):
    def __init__(self, c_in: int, c_out: int, k: int, rng: DetRng, bias: bool = True):
        super().__init__()
        self.weight = Tensor.parameter(he_normal(rng, (c_out, c_in, k, k), c_in * k * k))
        self._params["weight"] = self.weight
        self.bias = None
        if bias:
            self.bias = Tensor.parameter(np.zeros(c_out))
            self._params["bias"] = self.bias

    def __call__(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias)


class Linear(Layer):
    def __init__(self, n_in: int, n_out: int, rng: DetRng, bias: bool = True, gain: float = np.sqrt(2.0)):
        super().__init__()
        self.weight = Tensor.parameter(he_normal(rng, (n_out, n_in), n_in, gain))
        self._params["weight"] = self.weight
        self.bias = None
        if bias:
            self.bias = Tensor.parameter(np.zeros(n_out))
            self._params["bias"] = self.bias

    def __call__(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class BatchNorm(Layer):
    def __init__(self, c: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.gamma = Tensor.parameter(np.ones(c))
        self.beta = Tensor.parameter(np.zeros(c))
        self._params.update(gamma=self.gamma, beta=self.beta)
        self.running_mean = np.zeros(c)
        self.running_var = np.ones(c)
        self._buffers.update(running_mean=self.running_mean, running_var=self.running_var)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        return F.batchnorm(x, self.gamma, self.beta, self.running_mean, self.running_var,
                           training, self.momentum, self.eps)
