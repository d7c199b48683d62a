"""Minimal dense-tensor reverse-mode differentiation on numpy."""

from . import functional
from .checkpoint import load_arrays, save_arrays
from .optim import AdamW, adamw_step
from .tensor import Tape, Tensor, active_tape, backward, no_grad

__all__ = [
    "AdamW", "Tape", "Tensor", "active_tape", "adamw_step", "backward",
    "functional", "load_arrays", "no_grad", "save_arrays",
]
