"""Central finite-difference gradient checking."""
from __future__ import annotations

from typing import Callable, List, Sequence

import numpy as np

from .tensor import Tape, Tensor, backward

__all__ = ["numerical_gradient", "autodiff_gradients", "max_relative_error", "gradient_check"]


def numerical_gradient(fn: Callable[[], Tensor], tensor: Tensor, h: float = 1e-6) -> np.ndarray:
    """d fn() / d tensor by central differences, perturbing ``tensor.data`` in place."""
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        plus = fn().item()
        flat[i] = original - h
        minus = fn().item()
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * h)
    return grad


def autodiff_gradients(fn: Callable[[], Tensor], tensors: Sequence[Tensor]) -> List[np.ndarray]:
    for t in tensors:
        t.zero_grad()
    with Tape():
        loss = fn()
    backward(loss)
    return [t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in tensors]


def max_relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-5) -> float:
    """max |a - b| / max(|a|, |b|, floor)."""
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def gradient_check(
    fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    h: float = 1e-6,
    floor: float = 1e-5,
) -> float:
    """Largest relative error between autodiff and finite differences.

    ``fn`` must rebuild the scalar loss from the current tensor values on
    every call.
    """
    analytic = autodiff_gradients(fn, tensors)
    worst = 0.0
    for tensor, grad in zip(tensors, analytic):
        worst = max(worst, max_relative_error(grad, numerical_gradient(fn, tensor, h), floor))
    return worst
