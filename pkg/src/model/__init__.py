"""Model package: activations, prototype neck, detector and checkpoints.

Modules:
    activations: Softmax / Sparsemax / Argmax-STE prototype normalization
    params: Linear layers and named parameter registries
    neck: the prototype bottleneck and its ablation stand-in
    detr: patch backbone and dense-attention detection transformer
    network: ProtoDetector, the composed model
    checkpoint: protoneck-v1 checkpoint codec
"""
from .activations import (
    argmax_onehot,
    argmax_onehot_ste,
    normalize_prototype_scores,
    sparsemax,
    sparsemax_array,
)
from .checkpoint import load_checkpoint, read_checkpoint, save_checkpoint
from .detr import DetectorOutput, DetectorParams, backbone_forward, detect
from .neck import (
    NeckAblationParams,
    NeckParams,
    argmax_probability,
    neck_forward,
    pick_norm_mode_for_image,
    to_prototype_maps,
)
from .network import ModelOutput, ProtoDetector
from .params import Linear, ParamGroup

__all__ = [
    "argmax_onehot",
    "argmax_onehot_ste",
    "normalize_prototype_scores",
    "sparsemax",
    "sparsemax_array",
    "load_checkpoint",
    "read_checkpoint",
    "save_checkpoint",
    "DetectorOutput",
    "DetectorParams",
    "backbone_forward",
    "detect",
    "NeckAblationParams",
    "NeckParams",
    "argmax_probability",
    "neck_forward",
    "pick_norm_mode_for_image",
    "to_prototype_maps",
    "ModelOutput",
    "ProtoDetector",
    "Linear",
    "ParamGroup",
]
