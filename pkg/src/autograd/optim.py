"""Adam optimizer and gradient clipping."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..core.models import DimensionError, TrainingError
from .tensor import Tensor

__all__ = ["AdamState", "adam_step", "clip_grad_norm", "Adam"]


@dataclass
class AdamState:
    """First/second moment estimates, keyed by parameter name."""
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Sequence[Tensor],
    grads: Sequence[Optional[np.ndarray]],
    state: AdamState,
    *,
    names: Optional[Sequence[str]] = None,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update, in place on ``param.data``.

    Missing gradients count as zero. Raises TrainingError naming the first
    parameter whose gradient is not finite, before any parameter is touched.
    """
    names = list(names) if names is not None else [p.name or f"param{i}" for i, p in enumerate(params)]
    if not (len(names) == len(params) == len(grads)):
        raise DimensionError("adam_step needs one gradient and one name per parameter")

    resolved: List[np.ndarray] = []
    for name, param, grad in zip(names, params, grads):
        g = np.zeros_like(param.data) if grad is None else np.asarray(grad, dtype=np.float64)
        if g.shape != param.shape:
            raise DimensionError(f"gradient for '{name}' has shape {g.shape}, parameter has {param.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter '{name}'")
        resolved.append(g)

    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, param, g in zip(names, params, resolved):
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None or v is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        elif m.shape != param.shape:
            raise DimensionError(f"optimizer state for '{name}' has shape {m.shape}, parameter has {param.shape}")
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        param.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def clip_grad_norm(params: Sequence[Tensor], max_norm: float) -> float:
    """Scale gradients so their global L2 norm is at most ``max_norm``.

    Returns the norm before clipping. ``max_norm <= 0`` disables clipping.
    """
    squares = [float(np.sum(p.grad * p.grad)) for p in params if p.grad is not None]
    total = float(np.sqrt(np.sum(squares))) if squares else 0.0
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-6)
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return total


class Adam:
    """Adam over a fixed, named parameter list.

    Example:
        >>> opt = Adam(model.named_parameters(), lr=1e-3)
        >>> opt.zero_grad(); backward(loss); opt.step()
    """

    def __init__(
        self,
        named_params: Sequence[tuple],
        *,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        grad_clip: float = 0.0,
    ) -> None:
        self.names = [name for name, _ in named_params]
        self.params = [param for _, param in named_params]
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.grad_clip = grad_clip
        self.state = AdamState()

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> float:
        """Clip, update, and return the pre-clip gradient norm."""
        norm = clip_grad_norm(self.params, self.grad_clip)
        adam_step(
            self.params,
            [p.grad for p in self.params],
            self.state,
            names=self.names,
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
        )
        return norm
