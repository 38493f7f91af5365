"""Differentiable operations on Tensors.

Every op computes its forward value with numpy and, when a tape is active and
any input requires gradients, records a closure producing the input
gradients from the output gradient. Broadcasting is undone in ``backward``.
"""
from __future__ import annotations

from typing import Any, Callable, Optional, Sequence, Tuple

import numpy as np

from ..core.models import DimensionError
from .tensor import Tensor, active_tape, as_tensor

__all__ = [
    "apply_op",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "power",
    "matmul",
    "relu",
    "sigmoid",
    "exp",
    "log",
    "abs",
    "maximum",
    "minimum",
    "sum",
    "mean",
    "reshape",
    "transpose",
    "getitem",
    "where",
    "softmax_axis",
    "log_softmax",
    "layernorm",
    "group_norm",
    "LAYERNORM_EPS",
]

LAYERNORM_EPS = 1e-5


def apply_op(
    value: np.ndarray,
    inputs: Sequence[Tensor],
    backward_fn: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]],
    op: str,
) -> Tensor:
    """Wrap ``value`` and record it on the active tape when gradients are needed."""
    tape = active_tape()
    inputs = tuple(inputs)
    needs_grad = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor.wrap(value, requires_grad=needs_grad)
    if needs_grad:
        tape.record(inputs, out, backward_fn, op)
    return out


# Section: Elementwise Arithmetic
def add(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return apply_op(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return apply_op(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return apply_op(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data), "mul")


def div(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def _backward(g: np.ndarray):
        return g / b.data, -g * out / b.data

    return apply_op(out, (a, b), _backward, "div")


def neg(x: Any) -> Tensor:
    x = as_tensor(x)
    return apply_op(-x.data, (x,), lambda g: (-g,), "neg")


def power(x: Any, exponent: float) -> Tensor:
    """``x ** exponent`` for a constant real exponent."""
    x = as_tensor(x)
    p = float(exponent)
    return apply_op(x.data ** p, (x,), lambda g: (g * p * x.data ** (p - 1.0),), "power")


# Section: Linear Algebra
def matmul(a: Any, b: Any) -> Tensor:
    """Batched matrix product ``[..., m, k] @ [..., k, n]``."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError(f"matmul batch extents not broadcastable: {a.shape} @ {b.shape}") from None

    def _backward(g: np.ndarray):
        return g @ np.swapaxes(b.data, -1, -2), np.swapaxes(a.data, -1, -2) @ g

    return apply_op(a.data @ b.data, (a, b), _backward, "matmul")


# Section: Nonlinearities
def relu(x: Any) -> Tensor:
    """max(x, 0); the gradient at exactly 0 is 0."""
    x = as_tensor(x)
    mask = x.data > 0
    return apply_op(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,), "relu")


def sigmoid(x: Any) -> Tensor:
    x = as_tensor(x)
    e = np.exp(-np.abs(x.data))
    out = np.where(x.data >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return apply_op(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def exp(x: Any) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return apply_op(out, (x,), lambda g: (g * out,), "exp")


def log(x: Any) -> Tensor:
    x = as_tensor(x)
    return apply_op(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def abs(x: Any) -> Tensor:  # noqa: A001 - mirrors numpy naming
    x = as_tensor(x)
    return apply_op(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),), "abs")


def maximum(a: Any, b: Any) -> Tensor:
    """Elementwise max; ties route the gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data >= b.data
    out = np.where(take_a, a.data, b.data)
    return apply_op(out, (a, b), lambda g: (g * take_a, g * ~take_a), "maximum")


def minimum(a: Any, b: Any) -> Tensor:
    """Elementwise min; ties route the gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data <= b.data
    out = np.where(take_a, a.data, b.data)
    return apply_op(out, (a, b), lambda g: (g * take_a, g * ~take_a), "minimum")


# Section: Reductions
def _expand_reduced(g: np.ndarray, shape: Tuple[int, ...], axis: Any, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(a % len(shape) for a in axes)
        g = np.expand_dims(g, axes)
    return np.broadcast_to(g, shape)


def sum(x: Any, axis: Any = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    out = np.sum(x.data, axis=axis, keepdims=keepdims)
    return apply_op(out, (x,), lambda g: (_expand_reduced(g, x.shape, axis, keepdims),), "sum")


def mean(x: Any, axis: Any = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = np.mean(x.data, axis=axis, keepdims=keepdims)
    count = x.data.size / max(out.size, 1) if x.data.size else 1.0

    def _backward(g: np.ndarray):
        return (_expand_reduced(g, x.shape, axis, keepdims) / count,)

    return apply_op(out, (x,), _backward, "mean")


# Section: Shape Manipulation
def reshape(x: Any, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    return apply_op(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose(x: Any, axes: Optional[Sequence[int]] = None) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes) if axes is not None else tuple(reversed(range(x.ndim)))
    inverse = tuple(np.argsort(axes))
    return apply_op(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),), "transpose")


def getitem(x: Any, index: Any) -> Tensor:
    x = as_tensor(x)

    def _backward(g: np.ndarray):
        grad = np.zeros_like(x.data)
        np.add.at(grad, index, g)
        return (grad,)

    return apply_op(x.data[index], (x,), _backward, "getitem")


def where(mask: np.ndarray, a: Any, b: Any) -> Tensor:
    """Select from ``a`` where the constant boolean ``mask`` holds, else ``b``."""
    a, b = as_tensor(a), as_tensor(b)
    mask = np.asarray(mask, dtype=bool)
    out = np.where(mask, a.data, b.data)
    return apply_op(out, (a, b), lambda g: (np.where(mask, g, 0.0), np.where(mask, 0.0, g)), "where")


# Section: Normalizations
def softmax_axis(x: Any, axis: int = -1) -> Tensor:
    """Numerically stable softmax; outputs sum to 1 along ``axis``."""
    x = as_tensor(x)
    z = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def _backward(g: np.ndarray):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return apply_op(out, (x,), _backward, "softmax")


def log_softmax(x: Any, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - np.max(x.data, axis=axis, keepdims=True)
    out = z - np.log(np.sum(np.exp(z), axis=axis, keepdims=True))

    def _backward(g: np.ndarray):
        return (g - np.exp(out) * np.sum(g, axis=axis, keepdims=True),)

    return apply_op(out, (x,), _backward, "log_softmax")


def layernorm(x: Any, gain: Any, bias: Any, axis: int = -1, eps: float = LAYERNORM_EPS) -> Tensor:
    """(x - mean) / sqrt(var + eps) * gain + bias along ``axis`` (population variance)."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    axis = axis % x.ndim
    n = x.shape[axis]
    if gain.shape != (n,) or bias.shape != (n,):
        raise DimensionError(
            f"layernorm gain/bias must have shape ({n},), got {gain.shape} and {bias.shape}"
        )
    param_shape = [1] * x.ndim
    param_shape[axis] = n
    g_b = gain.data.reshape(param_shape)
    b_b = bias.data.reshape(param_shape)

    mu = np.mean(x.data, axis=axis, keepdims=True)
    xc = x.data - mu
    var = np.mean(xc * xc, axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * g_b + b_b
    other_axes = tuple(i for i in range(x.ndim) if i != axis)

    def _backward(g: np.ndarray):
        gxhat = g * g_b
        gx = inv * (
            gxhat
            - np.mean(gxhat, axis=axis, keepdims=True)
            - xhat * np.mean(gxhat * xhat, axis=axis, keepdims=True)
        )
        ggain = np.sum(g * xhat, axis=other_axes).reshape(n)
        gbias = np.sum(g, axis=other_axes).reshape(n)
        return gx, ggain, gbias

    return apply_op(out, (x, gain, bias), _backward, "layernorm")


def group_norm(x: Any, groups: int, gain: Any, bias: Any, eps: float = LAYERNORM_EPS) -> Tensor:
    """GroupNorm over a channels-last ``[B, H, W, C]`` tensor.

    Statistics are taken per image and group over all locations and the
    group's channels; composed from ``layernorm`` with a unit affine.
    """
    x = as_tensor(x)
    if x.ndim != 4:
        raise DimensionError(f"group_norm expects [B, H, W, C], got {x.shape}")
    b, h, w, c = x.shape
    if c % groups:
        raise DimensionError(f"group_norm: {groups} groups do not divide {c} channels")
    per = c // groups
    grouped = transpose(reshape(x, (b, h, w, groups, per)), (0, 3, 1, 2, 4))
    flat = reshape(grouped, (b, groups, h * w * per))
    size = h * w * per
    normed = layernorm(flat, Tensor.wrap(np.ones(size)), Tensor.wrap(np.zeros(size)), axis=-1, eps=eps)
    back = reshape(transpose(reshape(normed, (b, groups, h, w, per)), (0, 2, 3, 1, 4)), (b, h, w, c))
    return add(mul(back, gain), bias)
