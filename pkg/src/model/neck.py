"""Prototype neck: the interpretable bottleneck between backbone and detector.

Per location the backbone feature passes two ReLU adapters, is scored
against every prototype with a biased linear layer, normalized into a
distribution over prototypes (the prototype map m_p) and re-embedded. The
detector only ever sees the re-embedding of m_p.

Feature tensors are channels-last: ``[B, H, W, C]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..autograd.functional import group_norm, relu, where
from ..autograd.tensor import Tensor
from ..core.models import ContractError, NeckNormMode, NormKind, NumericError, PrototypeMap
from ..infra.logging import get_logger
from .activations import normalize_prototype_scores
from .params import Linear, ParamGroup, new_param

__all__ = [
    "NeckParams",
    "NeckAblationParams",
    "neck_forward",
    "ablation_forward",
    "to_prototype_maps",
    "argmax_probability",
    "pick_norm_mode_for_image",
]

_logger = get_logger(__name__)

ModeSpec = Union[NeckNormMode, Sequence[NeckNormMode]]


# Section: Parameters
@dataclass
class NeckParams(ParamGroup):
    """Adapters, prototypes (rows of ``prototypes.weight.T``), output embedding, LayerNorm."""
    adapter1: Linear
    adapter2: Linear
    prototypes: Linear
    out_embed: Linear
    ln_gain: Tensor
    ln_bias: Tensor

    @classmethod
    def init(cls, rng: np.random.Generator, backbone_channels: int, channels: int, num_prototypes: int) -> "NeckParams":
        return cls(
            adapter1=Linear.init(rng, backbone_channels, channels),
            adapter2=Linear.init(rng, channels, channels),
            prototypes=Linear.init(rng, channels, num_prototypes),
            out_embed=Linear.init(rng, num_prototypes, channels),
            ln_gain=new_param(np.ones(num_prototypes)),
            ln_bias=new_param(np.zeros(num_prototypes)),
        )

    @property
    def num_prototypes(self) -> int:
        return self.prototypes.n_out

    @property
    def prototype_weights(self) -> np.ndarray:
        """Prototype vectors, shape [P, C]."""
        return self.prototypes.weight.data.T


@dataclass
class NeckAblationParams(ParamGroup):
    """Stand-in for the neck in the ablation arm: linear projection plus GroupNorm."""
    proj: Linear
    gn_gain: Tensor
    gn_bias: Tensor

    @classmethod
    def init(cls, rng: np.random.Generator, backbone_channels: int, channels: int) -> "NeckAblationParams":
        return cls(
            proj=Linear.init(rng, backbone_channels, channels),
            gn_gain=new_param(np.ones(channels)),
            gn_bias=new_param(np.zeros(channels)),
        )


# Section: Forward
def _check_finite(t: Tensor, stage: str) -> Tensor:
    if not np.all(np.isfinite(t.data)):
        raise NumericError(f"non-finite activations in neck stage '{stage}'")
    return t


def _per_image_modes(mode: ModeSpec, batch: int) -> List[NeckNormMode]:
    if isinstance(mode, NeckNormMode):
        return [mode] * batch
    modes = list(mode)
    if len(modes) != batch:
        raise ContractError(f"expected {batch} normalization modes, got {len(modes)}")
    return modes


def neck_forward(features: Tensor, params: NeckParams, mode: ModeSpec) -> Tuple[Tensor, Tensor]:
    """Run the neck on ``[B, H, W, Cb]`` features.

    ``mode`` is one NeckNormMode for the whole batch or one per image.
    Returns (m_p ``[B, H, W, P]``, neck_output ``[B, H, W, C]``).
    """
    batch = features.shape[0]
    modes = _per_image_modes(mode, batch)

    hidden = relu(_check_finite(params.adapter1(features), "adapter1"))
    hidden = relu(_check_finite(params.adapter2(hidden), "adapter2"))
    scores = _check_finite(params.prototypes(hidden), "similarity")

    kinds = [m.kind for m in modes]
    m_p: Optional[Tensor] = None
    for kind in dict.fromkeys(kinds):
        kind_mode = next(m for m in modes if m.kind is kind)
        normalized = normalize_prototype_scores(scores, kind_mode, params.ln_gain, params.ln_bias)
        if m_p is None:
            m_p = normalized
        else:
            selected = np.array([k is kind for k in kinds]).reshape(batch, 1, 1, 1)
            _logger.debug(f"{int(selected.sum())}/{batch} images normalized with {kind.value}")
            m_p = where(selected, normalized, m_p)
    assert m_p is not None
    _check_finite(m_p, "normalization")

    neck_output = relu(_check_finite(params.out_embed(m_p), "embedding"))
    return m_p, neck_output


def ablation_forward(features: Tensor, params: NeckAblationParams, groups: int) -> Tensor:
    """Neck-free path: per-location projection followed by GroupNorm."""
    return group_norm(params.proj(features), groups, params.gn_gain, params.gn_bias)


def to_prototype_maps(m_p: Tensor, modes: ModeSpec) -> List[PrototypeMap]:
    """Split a batched ``[B, H, W, P]`` activation tensor into per-image ``[P, H, W]`` maps."""
    values = np.transpose(m_p.data, (0, 3, 1, 2))
    per_image = _per_image_modes(modes, values.shape[0])
    return [PrototypeMap(values=values[b].copy(), mode=per_image[b].kind) for b in range(values.shape[0])]


# Section: Training-time Quantization Schedule
def argmax_probability(epoch_fraction: float, schedule: Tuple[float, float]) -> float:
    """Probability of quantizing an image, linear in training progress."""
    start, end = schedule
    fraction = min(max(epoch_fraction, 0.0), 1.0)
    return (start + (end - start) * fraction) / 100.0


def pick_norm_mode_for_image(
    epoch_fraction: float,
    configured_mode: NeckNormMode,
    argmax_schedule: Tuple[float, float],
    rng: np.random.Generator,
) -> NeckNormMode:
    """Draw the normalization of one training image.

    An Argmax-configured neck always quantizes; otherwise Argmax is chosen
    with the scheduled probability and the configured soft mode is kept
    the rest of the time.
    """
    if configured_mode.is_argmax:
        return configured_mode
    if rng.random() < argmax_probability(epoch_fraction, argmax_schedule):
        return configured_mode.with_kind(NormKind.ARGMAX)
    return configured_mode
