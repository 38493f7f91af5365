"""The full detector: patch backbone → prototype neck (or ablation) → transformer."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from ..autograd.tensor import Tensor
from ..core.models import (
    AttentionMap,
    Detection,
    NeckNormMode,
    PrototypeMap,
    RunConfig,
)
from ..infra.logging import get_logger
from .detr import DetectorOutput, DetectorParams, backbone_forward, detect
from .neck import (
    NeckAblationParams,
    NeckParams,
    ablation_forward,
    neck_forward,
    to_prototype_maps,
)
from .params import Linear, ParamGroup

__all__ = ["ModelOutput", "ProtoDetector"]

_logger = get_logger(__name__)


@dataclass
class ModelOutput:
    """One batched forward pass. ``m_p`` is None for the neck ablation."""
    m_p: Optional[Tensor]  # [B, H, W, P]
    modes: List[NeckNormMode]
    detector: DetectorOutput

    @property
    def batch_size(self) -> int:
        return int(self.detector.class_logits.shape[0])

    def prototype_maps(self) -> List[PrototypeMap]:
        return [] if self.m_p is None else to_prototype_maps(self.m_p, self.modes)

    def detections(self, index: int) -> List[Detection]:
        logits = self.detector.class_logits.data[index]
        boxes = self.detector.boxes.data[index]
        return [
            Detection(class_logits=logits[q].copy(), bbox=tuple(float(v) for v in boxes[q]))
            for q in range(logits.shape[0])
        ]

    def attention_maps(self, index: int) -> List[AttentionMap]:
        return [AttentionMap(values=a.copy()) for a in self.detector.attention[index]]


@dataclass
class ProtoDetector(ParamGroup):
    """All trainable parameters plus the structural settings they were built with."""
    patch_embed: Linear
    detector: DetectorParams
    neck: Optional[NeckParams] = None
    ablation: Optional[NeckAblationParams] = None
    patch: int = 8
    heads: int = 4
    gn_groups: int = 8

    @classmethod
    def from_config(cls, config: RunConfig, seed: Optional[int] = None) -> "ProtoDetector":
        """Initialize deterministically from ``seed`` (defaults to ``config.seed``)."""
        rng = np.random.default_rng(config.seed if seed is None else seed)
        patch_embed = Linear.init(rng, 3 * config.patch * config.patch, config.backbone_channels)
        neck = ablation = None
        if config.has_neck:
            neck = NeckParams.init(rng, config.backbone_channels, config.channels, config.prototypes)
        else:
            ablation = NeckAblationParams.init(rng, config.backbone_channels, config.channels)
        detector = DetectorParams.init(
            rng,
            channels=config.channels,
            ffn_dim=config.ffn_dim,
            encoder_layers=config.encoder_layers,
            decoder_layers=config.decoder_layers,
            queries=config.queries,
            num_classes=config.num_classes,
        )
        model = cls(
            patch_embed=patch_embed,
            detector=detector,
            neck=neck,
            ablation=ablation,
            patch=config.patch,
            heads=config.heads,
            gn_groups=config.gn_groups,
        )
        _logger.debug(f"Initialized model with {model.parameter_count()} parameters")
        return model

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def forward(
        self,
        images: Union[np.ndarray, Tensor],
        modes: Union[NeckNormMode, Sequence[NeckNormMode]],
        pad_mask: Optional[np.ndarray] = None,
    ) -> ModelOutput:
        """Run ``[B, 3, H, W]`` images through backbone, neck and detector.

        ``pad_mask`` ``[B, H/patch, W/patch]`` flags padded feature cells,
        which the attention layers ignore.
        """
        features = backbone_forward(images, self.patch_embed, self.patch)
        batch = features.shape[0]
        per_image = [modes] * batch if isinstance(modes, NeckNormMode) else list(modes)
        m_p: Optional[Tensor] = None
        if self.neck is not None:
            m_p, embedded = neck_forward(features, self.neck, per_image)
        else:
            assert self.ablation is not None
            embedded = ablation_forward(features, self.ablation, self.gn_groups)
        output = detect(embedded, self.detector, self.heads, pad_mask)
        return ModelOutput(m_p=m_p, modes=per_image, detector=output)

    __call__ = forward
