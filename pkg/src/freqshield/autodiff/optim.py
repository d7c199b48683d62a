"""AdamW with decoupled weight decay."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class AdamW:
    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.01, lr_scales=None):
        self.params: list[Tensor] = list(params)
        self.lr = lr
        # per-parameter multipliers on lr (weight decay uses the same scaled lr)
        self.lr_scales = [1.0] * len(self.params) if lr_scales is None else [float(s) for s in lr_scales]
        if len(self.lr_scales) != len(self.params):
            raise ValueError("lr_scales must match params")
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        """``p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)``."""
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for p, m, v, scale in zip(self.params, self.m, self.v, self.lr_scales):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / c1
            v_hat = v / c2
            update = m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * p.data
            p.data -= (self.lr * scale * update).astype(p.dtype)

    def hyperparameters(self) -> dict:
        return {
            "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
            "eps": self.eps, "weight_decay": self.weight_decay, "schedule": "constant",
            "lr_scales": sorted(set(self.lr_scales)),
        }


def adamw_step(state: AdamW, params=None):
    """Functional alias; ``params`` must be the optimizer's own list if given."""
    if params is not None and list(params) != state.params:
        raise ValueError("params do not match the optimizer state")
    state.step()
