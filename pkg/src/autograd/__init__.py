"""Minimal reverse-mode autodiff on float64 numpy arrays.

Modules:
    tensor: Tensor, Tape and the backward pass
    functional: differentiable ops (matmul, relu, softmax, layernorm, ...)
    optim: Adam and gradient clipping
    gradcheck: central finite-difference checks
"""
from .tensor import Tape, Tensor, active_tape, as_tensor, backward
from .optim import Adam, AdamState, adam_step, clip_grad_norm
from .gradcheck import gradient_check, numerical_gradient
from . import functional

__all__ = [
    "Tape",
    "Tensor",
    "active_tape",
    "as_tensor",
    "backward",
    "Adam",
    "AdamState",
    "adam_step",
    "clip_grad_norm",
    "gradient_check",
    "numerical_gradient",
    "functional",
]
