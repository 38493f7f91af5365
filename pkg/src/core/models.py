"""Data models for protoneck.

Contains the core data structures used throughout the application:
- RunConfig: every hyperparameter, schedule and variant switch of a run
- NeckNormMode: how prototype scores are normalized per location
- PrototypeMap / AttentionMap / SaliencyMap: per-image spatial fields
- Detection / Target / MatchResult: detector outputs and their matching
- MetricsReport / LossReport: what evaluation and training report
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

__all__ = [
    # Constants
    "CHECKPOINT_VERSION",
    "NECK_SOFTMAX",
    "NECK_SPARSEMAX",
    "NECK_ARGMAX",
    "NECK_NONE",
    "VALID_NECKS",
    "SHAPE_NAMES",
    "EXIT_OK",
    "EXIT_FAILURE",
    "EXIT_CONFIG",
    "EXIT_CHECKPOINT",
    "EXIT_DATA",
    # Exceptions
    "ProtoNeckError",
    "ContractError",
    "DimensionError",
    "NumericError",
    "TrainingError",
    "ConfigError",
    "CheckpointError",
    "DataError",
    # Enums
    "NormKind",
    # Data classes
    "NeckNormMode",
    "RunConfig",
    "Box",
    "Target",
    "Detection",
    "PrototypeMap",
    "AttentionMap",
    "SaliencyMap",
    "PrototypeAssignment",
    "MatchResult",
    "SceneSample",
    "DatasetSpec",
    "LossReport",
    "MetricsReport",
]

CHECKPOINT_VERSION = "protoneck-v1"

NECK_SOFTMAX = "softmax"
NECK_SPARSEMAX = "sparsemax"
NECK_ARGMAX = "argmax"
NECK_NONE = "none"  # neck ablation: features go straight to the encoder
VALID_NECKS = (NECK_SOFTMAX, NECK_SPARSEMAX, NECK_ARGMAX, NECK_NONE)

# Shape classes of the synthetic dataset, in class-index order
SHAPE_NAMES = ("circle", "square", "triangle", "cross")

# Section: Exit Codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_CHECKPOINT = 3
EXIT_DATA = 4


# Section: Exceptions
class ProtoNeckError(Exception):
    """Base class of every error raised by protoneck."""


class ContractError(ProtoNeckError, ValueError):
    """Raised when a caller violates an operation's preconditions."""


class DimensionError(ContractError):
    """Raised when tensor shapes are incompatible."""


class NumericError(ProtoNeckError, ArithmeticError):
    """Raised when a computation produces non-finite values."""


class TrainingError(ProtoNeckError, RuntimeError):
    """Raised when an optimizer step cannot be taken safely."""


class ConfigError(ProtoNeckError, ValueError):
    """Raised when a run configuration is invalid."""


class CheckpointError(ProtoNeckError, ValueError):
    """Raised when a checkpoint is corrupt or does not fit the config."""


class DataError(ProtoNeckError, ValueError):
    """Raised for empty splits or out-of-range sample indices."""


# Section: Normalization Modes
class NormKind(str, Enum):
    """Per-location normalization applied to prototype similarity scores."""
    SOFTMAX = "softmax"
    SPARSEMAX = "sparsemax"
    ARGMAX = "argmax"


@dataclass(frozen=True)
class NeckNormMode:
    """Normalization kind plus the straight-through gradient scale of Argmax."""
    kind: NormKind
    argmax_gradient_scale: float = 0.01

    def __post_init__(self) -> None:
        if not self.argmax_gradient_scale > 0:
            raise ContractError("argmax_gradient_scale must be positive")

    @property
    def is_argmax(self) -> bool:
        return self.kind is NormKind.ARGMAX

    def with_kind(self, kind: NormKind) -> "NeckNormMode":
        return NeckNormMode(kind=kind, argmax_gradient_scale=self.argmax_gradient_scale)


# Section: Run Configuration
@dataclass
class RunConfig:
    """Every hyperparameter of a run. Toy-scale defaults."""

    # Prototype neck
    neck: str = NECK_SOFTMAX
    prototypes: int = 16
    channels: int = 64
    backbone_channels: int = 64
    protos_extra: Tuple[Tuple[int, int], ...] = ()  # (class, extra prototypes)
    argmax_start: float = 0.0  # percent of training images quantized at t=0
    argmax_end: float = 5.0  # ... and at the final epoch
    argmax_grad_scale: float = 0.01
    gn_groups: int = 8  # GroupNorm groups of the neck-ablation projection

    # Alignment loss
    align_coef_start: float = 1.2
    align_coef_end: float = 0.7
    align_eps: float = 1e-3

    # Detector
    encoder_layers: int = 2
    decoder_layers: int = 2
    heads: int = 4
    queries: int = 10
    ffn_dim: int = 128

    # Matching costs and detection loss weights
    cost_class: float = 2.0
    cost_bbox: float = 5.0
    cost_giou: float = 2.0
    loss_ce: float = 1.0
    loss_bbox: float = 5.0
    loss_giou: float = 2.0
    eos_coef: float = 0.1

    # Optimization
    epochs: int = 60
    batch_size: int = 16
    lr: float = 1e-3
    lr_drop: float = 0.8  # fraction of epochs after which lr drops tenfold; 1 keeps it constant
    grad_clip: float = 0.1
    eval_every: int = 5
    seed: int = 0

    # Dataset
    data_seed: int = 0
    num_classes: int = 4
    image_height: int = 64
    image_width: int = 64
    patch: int = 8
    max_objects: int = 4
    noise: float = 0.1
    occlusion: bool = False
    train_samples: int = 2000
    val_samples: int = 200

    # Rendering
    blur_sigma: float = 1.5
    topk: int = 5
    overlay_alpha: float = 0.65
    render_scale: int = 4

    # Output root; excluded from the config hash
    output_dir: str = ""

    @property
    def has_neck(self) -> bool:
        return self.neck != NECK_NONE

    @property
    def norm_mode(self) -> NeckNormMode:
        """Configured soft (or hard) mode used at evaluation time."""
        kind = NormKind(self.neck) if self.has_neck else NormKind.SOFTMAX
        return NeckNormMode(kind=kind, argmax_gradient_scale=self.argmax_grad_scale)

    @property
    def image_size(self) -> int:
        """Side of the square (padded) input frame."""
        return max(self.image_height, self.image_width)

    @property
    def grid(self) -> Tuple[int, int]:
        side = self.image_size // self.patch
        return side, side

    def dataset_spec(self) -> "DatasetSpec":
        return DatasetSpec(
            num_classes=self.num_classes,
            height=self.image_height,
            width=self.image_width,
            max_objects=min(self.max_objects, self.queries),
            noise=self.noise,
            occlusion=self.occlusion,
            patch=self.patch,
        )


# Section: Detection Structures
Box = Tuple[float, float, float, float]  # (cx, cy, w, h), normalized


@dataclass(frozen=True)
class Target:
    """One ground-truth object."""
    label: int
    bbox: Box


@dataclass
class Detection:
    """Class logits (last entry = "no object") and a normalized box."""
    class_logits: np.ndarray
    bbox: Box

    def probabilities(self) -> np.ndarray:
        z = self.class_logits - np.max(self.class_logits)
        e = np.exp(z)
        return e / e.sum()

    def top_class(self) -> Tuple[int, float]:
        """Most probable real class and its probability (DETR post-processing)."""
        probs = self.probabilities()[:-1]
        label = int(np.argmax(probs))
        return label, float(probs[label])


@dataclass(frozen=True)
class MatchResult:
    """Query ↔ target pairs; queries not listed are "no object"."""
    pairs: Tuple[Tuple[int, int], ...]
    cost: float = 0.0

    def query_for(self, target_index: int) -> int:
        for q, t in self.pairs:
            if t == target_index:
                return q
        raise ContractError(f"target {target_index} is not matched")


# Section: Spatial Fields
@dataclass
class PrototypeMap:
    """Per-image prototype activations m_p, shape [P, H, W]."""
    values: np.ndarray
    mode: NormKind = NormKind.SOFTMAX

    @property
    def num_prototypes(self) -> int:
        return int(self.values.shape[0])

    @property
    def grid(self) -> Tuple[int, int]:
        return int(self.values.shape[1]), int(self.values.shape[2])


@dataclass
class AttentionMap:
    """Per-detection attention m_a(d), shape [H, W], summing to 1."""
    values: np.ndarray


@dataclass
class SaliencyMap:
    """Per-target Gaussian saliency m_s(d), zero on padding, summing to 1."""
    values: np.ndarray
    valid_mask: np.ndarray


@dataclass(frozen=True)
class PrototypeAssignment:
    """Fixed mapping prototype index → class index."""
    class_of: Tuple[int, ...]
    num_classes: int

    @property
    def num_prototypes(self) -> int:
        return len(self.class_of)

    def prototypes_of(self, label: int) -> Tuple[int, ...]:
        return tuple(p for p, c in enumerate(self.class_of) if c == label)

    def mask(self, label: int) -> np.ndarray:
        """0/1 vector over prototypes selecting C(d) for class ``label``."""
        return (np.asarray(self.class_of) == label).astype(np.float64)

    def masks(self, labels: List[int]) -> np.ndarray:
        return np.stack([self.mask(label) for label in labels]) if labels else np.zeros((0, len(self.class_of)))


# Section: Dataset Structures
@dataclass(frozen=True)
class DatasetSpec:
    """Parameters of the synthetic shapes generator."""
    num_classes: int = 4
    height: int = 64
    width: int = 64
    max_objects: int = 4
    noise: float = 0.1
    occlusion: bool = False
    patch: int = 8


@dataclass
class SceneSample:
    """One synthetic image with exact boxes.

    ``pad_mask`` is True on feature cells that lie entirely in padding.
    """
    image: np.ndarray  # [3, H, W] in [0, 1]
    targets: List[Target]
    pad_mask: np.ndarray  # [H / patch, W / patch] bool

    @property
    def valid_mask(self) -> np.ndarray:
        return ~self.pad_mask


# Section: Reports
@dataclass
class LossReport:
    """Per-term loss values of one step, epoch or evaluated split."""
    ce: float = 0.0
    l1: float = 0.0
    giou: float = 0.0
    align: float = 0.0
    total: float = 0.0
    no_detections: bool = False

    def as_row(self) -> Dict[str, float]:
        return {"ce": self.ce, "l1": self.l1, "giou": self.giou, "align": self.align, "total": self.total}


@dataclass
class MetricsReport:
    """Explainability scores and detection accuracy over one split.

    Prototype scores are None for the neck ablation; ``ae`` is None when no
    detection was matched. ``loss`` holds the mean loss terms of the split,
    at the end-of-training alignment coefficient.
    """
    ee: Optional[float]
    ae: Optional[float]
    px: Optional[float]
    aap: Optional[float]
    map_50_95: float
    map_50: float
    mode: str
    prototypes: int
    align_coef: str
    config_hash: str = ""
    split: str = "val"
    seed: int = 0
    loss: Optional[LossReport] = None

    SCORE_FIELDS = ("ee", "ae", "px", "aap", "map_50_95", "map_50")

    def scores(self) -> Dict[str, Optional[float]]:
        return {name: getattr(self, name) for name in self.SCORE_FIELDS}
