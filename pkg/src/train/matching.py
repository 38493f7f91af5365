"""Box geometry and Hungarian matching of queries to targets."""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..core.models import Box, ContractError, Detection, MatchResult, Target

__all__ = [
    "box_cxcywh_to_xyxy",
    "box_area",
    "iou",
    "giou",
    "pairwise_iou",
    "pairwise_giou",
    "detection_cost",
    "cost_matrix",
    "hungarian_match",
]


# Section: Geometry
def box_cxcywh_to_xyxy(boxes: np.ndarray) -> np.ndarray:
    boxes = np.asarray(boxes, dtype=np.float64)
    cx, cy, w, h = np.moveaxis(boxes, -1, 0)
    return np.stack([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], axis=-1)


def box_area(xyxy: np.ndarray) -> np.ndarray:
    return (xyxy[..., 2] - xyxy[..., 0]) * (xyxy[..., 3] - xyxy[..., 1])


def _check_xyxy(xyxy: np.ndarray) -> None:
    if np.any(xyxy[..., 2] <= xyxy[..., 0]) or np.any(xyxy[..., 3] <= xyxy[..., 1]):
        raise ContractError("boxes need positive width and height")


def pairwise_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """IoU of every corner-format box in ``a`` [N, 4] with every box in ``b`` [M, 4]."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    lt = np.maximum(a[:, None, :2], b[None, :, :2])
    rb = np.minimum(a[:, None, 2:], b[None, :, 2:])
    wh = np.clip(rb - lt, 0.0, None)
    inter = wh[..., 0] * wh[..., 1]
    union = box_area(a)[:, None] + box_area(b)[None, :] - inter
    return inter / union


def pairwise_giou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Generalized IoU for corner-format boxes; raises on degenerate boxes."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    _check_xyxy(a)
    _check_xyxy(b)
    lt = np.maximum(a[:, None, :2], b[None, :, :2])
    rb = np.minimum(a[:, None, 2:], b[None, :, 2:])
    wh = np.clip(rb - lt, 0.0, None)
    inter = wh[..., 0] * wh[..., 1]
    union = box_area(a)[:, None] + box_area(b)[None, :] - inter
    hull_wh = np.maximum(a[:, None, 2:], b[None, :, 2:]) - np.minimum(a[:, None, :2], b[None, :, :2])
    hull = hull_wh[..., 0] * hull_wh[..., 1]
    return inter / union - (hull - union) / hull


def iou(a: Sequence[float], b: Sequence[float]) -> float:
    """IoU of two corner-format boxes."""
    return float(pairwise_iou(np.asarray(a), np.asarray(b))[0, 0])


def giou(a: Sequence[float], b: Sequence[float]) -> float:
    """Generalized IoU of two corner-format boxes (x0, y0, x1, y1), in (-1, 1]."""
    return float(pairwise_giou(np.asarray(a), np.asarray(b))[0, 0])


# Section: Matching Cost
def detection_cost(
    det: Detection,
    target: Target,
    *,
    cost_class: float = 2.0,
    cost_bbox: float = 5.0,
    cost_giou: float = 2.0,
) -> float:
    """λcls·(−p(class)) + λL1·‖Δbox‖₁ + λgiou·(1 − gIoU)."""
    prob = float(det.probabilities()[target.label])
    l1 = float(np.sum(np.abs(np.asarray(det.bbox) - np.asarray(target.bbox))))
    g = giou(box_cxcywh_to_xyxy(det.bbox), box_cxcywh_to_xyxy(target.bbox))
    return cost_class * -prob + cost_bbox * l1 + cost_giou * (1.0 - g)


def cost_matrix(
    probs: np.ndarray,
    boxes: np.ndarray,
    labels: Sequence[int],
    target_boxes: np.ndarray,
    *,
    cost_class: float = 2.0,
    cost_bbox: float = 5.0,
    cost_giou: float = 2.0,
) -> np.ndarray:
    """Vectorized detection_cost for every (query, target) pair, shape [Q, T].

    ``probs`` [Q, K+1] class probabilities, ``boxes`` [Q, 4] and
    ``target_boxes`` [T, 4] in (cx, cy, w, h).
    """
    labels = np.asarray(labels, dtype=np.int64)
    target_boxes = np.asarray(target_boxes, dtype=np.float64).reshape(-1, 4)
    if labels.size == 0:
        return np.zeros((probs.shape[0], 0))
    class_term = -probs[:, labels]
    l1_term = np.abs(boxes[:, None, :] - target_boxes[None, :, :]).sum(axis=-1)
    giou_term = 1.0 - pairwise_giou(box_cxcywh_to_xyxy(boxes), box_cxcywh_to_xyxy(target_boxes))
    return cost_class * class_term + cost_bbox * l1_term + cost_giou * giou_term


# Section: Assignment
def hungarian_match(cost: np.ndarray) -> MatchResult:
    """Minimum-cost one-to-one assignment of targets (columns) to queries (rows)."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ContractError(f"cost matrix must be 2-D, got shape {cost.shape}")
    queries, targets = cost.shape
    if targets > queries:
        raise ContractError(f"{targets} targets cannot be matched to {queries} queries")
    if not np.all(np.isfinite(cost)):
        raise ContractError("cost matrix contains non-finite entries")
    if targets == 0:
        return MatchResult(pairs=(), cost=0.0)
    rows, cols = linear_sum_assignment(cost)
    pairs = tuple(sorted((int(q), int(t)) for q, t in zip(rows, cols)))
    return MatchResult(pairs=pairs, cost=float(cost[rows, cols].sum()))
