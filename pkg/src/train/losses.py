"""Detection losses, Gaussian saliency and the prototype alignment loss.

The alignment loss rewards prototype activations of the target's own class
inside a Gaussian window around each ground-truth box:

    L = mean_d  -log(eps + Σ_ij m_s(d)_ij Σ_{p ∈ C(d)} m_p(p)_ij)
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..autograd import functional as F
from ..autograd.tensor import Tensor
from ..core.models import (
    Box,
    ConfigError,
    ContractError,
    LossReport,
    MatchResult,
    PrototypeAssignment,
    RunConfig,
    SaliencyMap,
    Target,
)
from ..infra.logging import get_logger
from .matching import cost_matrix, hungarian_match

__all__ = [
    "assign_prototypes",
    "assignment_for_config",
    "build_saliency",
    "AlignmentTerm",
    "alignment_loss",
    "giou_loss_terms",
    "align_coefficient",
    "match_batch",
    "LossOutput",
    "total_loss",
]

_logger = get_logger(__name__)


# Section: Prototype Assignment
def assign_prototypes(
    num_prototypes: int,
    classes: Union[int, Sequence[int]],
    overrides: Union[Mapping[int, int], Sequence[Tuple[int, int]], None] = None,
) -> PrototypeAssignment:
    """Partition prototypes over classes.

    Extra prototypes from ``overrides`` (class → extra count) take the lowest
    indices, in override order; the rest are dealt round-robin over classes.
    """
    class_list = list(range(classes)) if isinstance(classes, int) else list(classes)
    extras = list(overrides.items()) if isinstance(overrides, Mapping) else list(overrides or ())
    if num_prototypes < len(class_list):
        raise ConfigError(f"{num_prototypes} prototypes cannot cover {len(class_list)} classes")
    extra_total = sum(count for _, count in extras)
    if num_prototypes - extra_total < len(class_list):
        raise ConfigError(
            f"{num_prototypes} prototypes with {extra_total} extras leave some class without a prototype"
        )
    class_of: List[int] = []
    for label, count in extras:
        if label not in class_list:
            raise ConfigError(f"override for unknown class {label}")
        class_of.extend([label] * count)
    remaining = num_prototypes - len(class_of)
    class_of.extend(class_list[i % len(class_list)] for i in range(remaining))
    return PrototypeAssignment(class_of=tuple(class_of), num_classes=len(class_list))


def assignment_for_config(config: RunConfig) -> Optional[PrototypeAssignment]:
    """Prototype → class assignment of a run; None for the neck ablation."""
    if not config.has_neck:
        return None
    return assign_prototypes(config.prototypes, config.num_classes, config.protos_extra)


# Section: Saliency
def build_saliency(bbox: Box, grid: Tuple[int, int], valid_mask: Optional[np.ndarray] = None) -> SaliencyMap:
    """Axis-aligned Gaussian (μ = box center, σ = size / 6) over cell centers.

    Invalid cells are zeroed and the rest renormalized to sum 1.
    """
    cx, cy, w, h = (float(v) for v in bbox)
    if w <= 0 or h <= 0:
        raise ContractError(f"saliency needs a box with positive size, got w={w}, h={h}")
    height, width = grid
    valid = np.ones(grid, dtype=bool) if valid_mask is None else np.asarray(valid_mask, dtype=bool)
    if valid.shape != (height, width):
        raise ContractError(f"valid mask shape {valid.shape} does not match grid {grid}")
    if not valid.any():
        raise ContractError("saliency needs at least one valid cell")
    ys = (np.arange(height) + 0.5) / height
    xs = (np.arange(width) + 0.5) / width
    sx, sy = w / 6.0, h / 6.0
    log_density = -0.5 * ((ys[:, None] - cy) / sy) ** 2 - 0.5 * ((xs[None, :] - cx) / sx) ** 2
    log_density = np.where(valid, log_density, -np.inf)
    values = np.exp(log_density - log_density[valid].max())
    values /= values.sum()
    return SaliencyMap(values=values, valid_mask=valid)


# Section: Alignment Loss
@dataclass(frozen=True)
class AlignmentTerm:
    """One matched detection: batch image index, its target class, its saliency."""
    image: int
    label: int
    saliency: SaliencyMap


def alignment_loss(
    m_p: Tensor,
    matched: Sequence[AlignmentTerm],
    assignment: PrototypeAssignment,
    eps: float = 1e-3,
) -> Tuple[Tensor, bool]:
    """Differentiable alignment loss over ``m_p`` ``[B, H, W, P]``.

    Returns (loss, no_detections); with nothing matched the loss is 0 and the
    flag is set.
    """
    if eps <= 0:
        raise ContractError("alignment eps must be positive")
    if not matched:
        return Tensor(0.0), True
    grid = m_p.shape[1:3]
    for term in matched:
        if term.saliency.values.shape != grid:
            raise ContractError(f"saliency grid {term.saliency.values.shape} does not match prototype grid {grid}")
    images = np.array([t.image for t in matched])
    saliency = np.stack([t.saliency.values for t in matched])  # [D, H, W]
    owned = assignment.masks([t.label for t in matched])  # [D, P]
    weights = saliency[:, :, :, None] * owned[:, None, None, :]
    selected = F.getitem(m_p, images)  # [D, H, W, P]
    aligned_mass = F.sum(F.mul(selected, weights), axis=(1, 2, 3))
    return F.mean(F.neg(F.log(F.add(aligned_mass, eps)))), False


# Section: Detection Losses
def giou_loss_terms(pred: Tensor, target_boxes: np.ndarray) -> Tensor:
    """Differentiable 1 − gIoU for ``pred`` [N, 4] against constant targets, both (cx, cy, w, h)."""
    t = np.asarray(target_boxes, dtype=np.float64).reshape(-1, 4)
    tx0, ty0 = t[:, 0] - t[:, 2] / 2, t[:, 1] - t[:, 3] / 2
    tx1, ty1 = t[:, 0] + t[:, 2] / 2, t[:, 1] + t[:, 3] / 2
    cx, cy = F.getitem(pred, (slice(None), 0)), F.getitem(pred, (slice(None), 1))
    w, h = F.getitem(pred, (slice(None), 2)), F.getitem(pred, (slice(None), 3))
    half_w, half_h = F.mul(w, 0.5), F.mul(h, 0.5)
    px0, px1 = F.sub(cx, half_w), F.add(cx, half_w)
    py0, py1 = F.sub(cy, half_h), F.add(cy, half_h)

    inter_w = F.relu(F.sub(F.minimum(px1, tx1), F.maximum(px0, tx0)))
    inter_h = F.relu(F.sub(F.minimum(py1, ty1), F.maximum(py0, ty0)))
    inter = F.mul(inter_w, inter_h)
    union = F.sub(F.add(F.mul(w, h), t[:, 2] * t[:, 3]), inter)
    hull_w = F.sub(F.maximum(px1, tx1), F.minimum(px0, tx0))
    hull_h = F.sub(F.maximum(py1, ty1), F.minimum(py0, ty0))
    hull = F.mul(hull_w, hull_h)
    giou = F.sub(F.div(inter, union), F.div(F.sub(hull, union), hull))
    return F.sub(1.0, giou)


def align_coefficient(config: RunConfig, progress: float) -> float:
    """Alignment weight, linear from start (progress 0) to end (progress 1)."""
    t = min(max(progress, 0.0), 1.0)
    return config.align_coef_start + (config.align_coef_end - config.align_coef_start) * t


def match_batch(
    class_logits: np.ndarray,
    boxes: np.ndarray,
    targets: Sequence[Sequence[Target]],
    config: RunConfig,
) -> List[MatchResult]:
    """Hungarian matching per image from detached logits ``[B, Q, K+1]`` and boxes ``[B, Q, 4]``."""
    z = class_logits - class_logits.max(axis=-1, keepdims=True)
    probs = np.exp(z)
    probs /= probs.sum(axis=-1, keepdims=True)
    matches = []
    for b, image_targets in enumerate(targets):
        cost = cost_matrix(
            probs[b],
            boxes[b],
            [t.label for t in image_targets],
            np.array([t.bbox for t in image_targets]).reshape(-1, 4),
            cost_class=config.cost_class,
            cost_bbox=config.cost_bbox,
            cost_giou=config.cost_giou,
        )
        matches.append(hungarian_match(cost))
    return matches


@dataclass
class LossOutput:
    total: Tensor
    report: LossReport
    matches: List[MatchResult]


def total_loss(
    class_logits: Tensor,
    boxes: Tensor,
    m_p: Optional[Tensor],
    targets: Sequence[Sequence[Target]],
    pad_masks: np.ndarray,
    config: RunConfig,
    assignment: Optional[PrototypeAssignment],
    progress: float,
) -> LossOutput:
    """Weighted CE + L1 + gIoU + scheduled alignment loss for one batch.

    Box terms are normalized by the number of targets in the batch; the
    alignment term is skipped (reported as 0) without a neck or at a zero
    coefficient.
    """
    batch, queries, n_logits = class_logits.shape
    num_classes = n_logits - 1
    matches = match_batch(class_logits.data, boxes.data, targets, config)

    # Classification over matched and "no object" queries
    target_classes = np.full((batch, queries), num_classes, dtype=np.int64)
    image_idx: List[int] = []
    query_idx: List[int] = []
    target_boxes: List[Box] = []
    align_terms: List[AlignmentTerm] = []
    grid = (int(pad_masks.shape[1]), int(pad_masks.shape[2]))
    for b, match in enumerate(matches):
        for q, t in match.pairs:
            target = targets[b][t]
            target_classes[b, q] = target.label
            image_idx.append(b)
            query_idx.append(q)
            target_boxes.append(target.bbox)
            if m_p is not None:
                align_terms.append(
                    AlignmentTerm(image=b, label=target.label, saliency=build_saliency(target.bbox, grid, ~pad_masks[b]))
                )
    class_weight = np.ones(n_logits)
    class_weight[-1] = config.eos_coef
    onehot = np.eye(n_logits)[target_classes]
    query_weight = class_weight[target_classes]
    weighted = onehot * query_weight[..., None] / query_weight.sum()
    ce = F.neg(F.sum(F.mul(F.log_softmax(class_logits, axis=-1), weighted)))

    num_boxes = max(len(target_boxes), 1)
    if target_boxes:
        pred = F.getitem(boxes, (np.array(image_idx), np.array(query_idx)))
        tgt = np.array(target_boxes)
        l1 = F.div(F.sum(F.abs(F.sub(pred, tgt))), num_boxes)
        giou_l = F.div(F.sum(giou_loss_terms(pred, tgt)), num_boxes)
    else:
        l1 = Tensor(0.0)
        giou_l = Tensor(0.0)

    coef = align_coefficient(config, progress)
    align = Tensor(0.0)
    no_detections = False
    if m_p is not None and assignment is not None and coef > 0:
        align, no_detections = alignment_loss(m_p, align_terms, assignment, config.align_eps)
        if no_detections:
            _logger.warning("No matched detections in batch; alignment term skipped")

    total = F.add(
        F.add(F.mul(ce, config.loss_ce), F.mul(l1, config.loss_bbox)),
        F.add(F.mul(giou_l, config.loss_giou), F.mul(align, coef)),
    )
    report = LossReport(
        ce=ce.item(),
        l1=l1.item(),
        giou=giou_l.item(),
        align=align.item(),
        total=total.item(),
        no_detections=no_detections,
    )
    return LossOutput(total=total, report=report, matches=matches)
