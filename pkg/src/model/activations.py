"""Per-location normalizations of prototype similarity scores.

All functions normalize along the last axis, so a channels-last score tensor
``[B, H, W, P]`` yields one distribution over prototypes per location.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..autograd.functional import apply_op, layernorm, softmax_axis
from ..autograd.tensor import Tensor, as_tensor
from ..core.models import ContractError, NeckNormMode, NormKind, NumericError

__all__ = [
    "sparsemax_array",
    "sparsemax",
    "argmax_onehot",
    "argmax_onehot_ste",
    "normalize_prototype_scores",
]


def sparsemax_array(z: np.ndarray) -> np.ndarray:
    """Euclidean projection of every last-axis vector onto the probability simplex."""
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NumericError("sparsemax input contains non-finite values")
    n = z.shape[-1]
    z_sorted = -np.sort(-z, axis=-1)
    cumsum = np.cumsum(z_sorted, axis=-1)
    ks = np.arange(1, n + 1, dtype=np.float64)
    support = 1.0 + ks * z_sorted > cumsum
    k = np.sum(support, axis=-1, keepdims=True)
    tau = (np.take_along_axis(cumsum, k - 1, axis=-1) - 1.0) / k
    return np.maximum(z - tau, 0.0)


def sparsemax(z: Tensor) -> Tensor:
    """Differentiable sparsemax along the last axis.

    Backward on the support S: g - mean_S(g); zero elsewhere.
    """
    z = as_tensor(z)
    out = sparsemax_array(z.data)
    support = out > 0

    def _backward(g: np.ndarray):
        count = np.sum(support, axis=-1, keepdims=True)
        mean_on_support = np.sum(g * support, axis=-1, keepdims=True) / count
        return (support * (g - mean_on_support),)

    return apply_op(out, (z,), _backward, "sparsemax")


def argmax_onehot(z: np.ndarray) -> np.ndarray:
    """One-hot of the maximum along the last axis; ties pick the lowest index."""
    z = np.asarray(z, dtype=np.float64)
    index = np.argmax(z, axis=-1)
    return (np.arange(z.shape[-1]) == index[..., None]).astype(np.float64)


def argmax_onehot_ste(z: Tensor, scale: float = 0.01) -> Tensor:
    """One-hot forward; backward passes the gradient straight through times ``scale``."""
    z = as_tensor(z)
    if not np.all(np.isfinite(z.data)):
        raise NumericError("argmax input contains non-finite values")
    return apply_op(argmax_onehot(z.data), (z,), lambda g: (g * scale,), "argmax_ste")


def normalize_prototype_scores(
    scores: Tensor,
    mode: NeckNormMode,
    ln_gain: Optional[Tensor] = None,
    ln_bias: Optional[Tensor] = None,
) -> Tensor:
    """Turn prototype scores into per-location distributions.

    Softmax and Sparsemax act on the raw scores; Argmax applies LayerNorm
    first and quantizes with the straight-through estimator.
    """
    if mode.kind is NormKind.SOFTMAX:
        return softmax_axis(scores, axis=-1)
    if mode.kind is NormKind.SPARSEMAX:
        return sparsemax(scores)
    if ln_gain is None or ln_bias is None:
        raise ContractError("Argmax normalization needs LayerNorm gain and bias")
    return argmax_onehot_ste(layernorm(scores, ln_gain, ln_bias, axis=-1), mode.argmax_gradient_scale)
