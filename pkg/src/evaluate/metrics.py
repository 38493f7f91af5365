"""Explainability scores of prototype maps and COCO-style mAP.

All prototype scores are "lower is better":

- EE  exclusion error, mean over cells of 1 - max_p m_p
- AE  alignment error, attention mass on prototypes of other classes
- PX  perplexity of the spatially averaged prototype distribution
- AAP average number of strictly positive prototypes per cell
"""
from __future__ import annotations

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.models import AttentionMap, ContractError, Detection, PrototypeAssignment, PrototypeMap, Target
from ..train.matching import box_cxcywh_to_xyxy, pairwise_iou

__all__ = [
    "IOU_THRESHOLDS",
    "RECALL_POINTS",
    "exclusion_error",
    "alignment_error",
    "perplexity",
    "avg_active_prototypes",
    "average_precision",
    "coco_map",
]

IOU_THRESHOLDS = np.round(np.arange(0.5, 0.951, 0.05), 2)
RECALL_POINTS = np.linspace(0.0, 1.0, 101)


# Section: Prototype Map Scores
def exclusion_error(m_p: PrototypeMap) -> float:
    return float(np.mean(1.0 - m_p.values.max(axis=0)))


def alignment_error(
    attention: Sequence[AttentionMap],
    labels: Sequence[int],
    m_p: PrototypeMap,
    assignment: PrototypeAssignment,
) -> Optional[float]:
    """Mean over matched detections of Σ_ij m_a(d)_ij (1 - Σ_{p∈C(d)} m_p(p)_ij).

    None when there is no matched detection.
    """
    if len(attention) != len(labels):
        raise ContractError("alignment_error needs one label per attention map")
    if not labels:
        return None
    errors = []
    for att, label in zip(attention, labels):
        aligned = np.tensordot(assignment.mask(label), m_p.values, axes=(0, 0))
        errors.append(float(np.sum(att.values * (1.0 - aligned))))
    return float(np.mean(errors))


def perplexity(m_p: PrototypeMap) -> float:
    mean_usage = m_p.values.mean(axis=(1, 2))
    positive = mean_usage[mean_usage > 0]
    return float(np.exp(-np.sum(positive * np.log(positive))))


def avg_active_prototypes(m_p: PrototypeMap) -> float:
    return float(np.mean(np.sum(m_p.values > 0, axis=0)))


# Section: Detection Accuracy
def average_precision(scores: np.ndarray, is_tp: np.ndarray, num_targets: int) -> float:
    """101-point interpolated AP of one class at one IoU threshold.

    ``scores``/``is_tp`` must already be in ranking order. Precision is made
    monotone (each point takes the best precision at equal or higher
    recall) and sampled at recall 0, 0.01, ..., 1. Recall points beyond the
    highest recall reached count as 0, so one true positive out of two
    targets scores 51/101 rather than 1.
    """
    if num_targets == 0:
        return float("nan")
    if len(scores) == 0:
        return 0.0
    tp = np.cumsum(is_tp)
    fp = np.cumsum(~is_tp)
    recall = tp / num_targets
    precision = tp / np.maximum(tp + fp, np.finfo(np.float64).eps)
    # monotone precision envelope
    precision = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_POINTS, side="left")
    sampled = np.where(idx < len(precision), precision[np.minimum(idx, len(precision) - 1)], 0.0)
    return float(np.mean(sampled))


def _ranked_predictions(
    detections: Sequence[Sequence[Detection]], label: int
) -> Tuple[np.ndarray, List[Tuple[int, np.ndarray]]]:
    scores: List[float] = []
    entries: List[Tuple[int, np.ndarray]] = []
    for image, dets in enumerate(detections):
        for det in dets:
            top_label, score = det.top_class()
            if top_label == label:
                scores.append(score)
                entries.append((image, box_cxcywh_to_xyxy(det.bbox)))
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    return np.asarray(scores, dtype=np.float64)[order], [entries[i] for i in order]


def coco_map(
    detections: Sequence[Sequence[Detection]],
    targets: Sequence[Sequence[Target]],
) -> Tuple[float, float]:
    """(mAP@0.50:0.95, mAP@0.50) with 101-point interpolation.

    AP per class and IoU threshold follows ``average_precision``; mAP@0.50
    averages over classes, mAP@0.50:0.95 also over the ten thresholds
    0.50, 0.55, ..., 0.95. A detection matches the unmatched target of
    its class with the highest IoU in its image.

    Each detection counts once, for its most probable real class. Ties in
    confidence keep image/query order. Classes without targets are skipped;
    with no targets at all both values are 0.
    """
    if len(detections) != len(targets):
        raise ContractError("coco_map needs detections and targets for the same images")
    labels = sorted({t.label for image_targets in targets for t in image_targets})
    if not labels:
        return 0.0, 0.0

    per_threshold: Dict[float, List[float]] = {float(t): [] for t in IOU_THRESHOLDS}
    for label in labels:
        gt_boxes = {
            image: box_cxcywh_to_xyxy(np.array([t.bbox for t in image_targets if t.label == label]).reshape(-1, 4))
            for image, image_targets in enumerate(targets)
        }
        num_targets = sum(len(b) for b in gt_boxes.values())
        scores, ranked = _ranked_predictions(detections, label)
        ious = [pairwise_iou(box, gt_boxes[image])[0] if len(gt_boxes[image]) else np.zeros(0) for image, box in ranked]
        for threshold in IOU_THRESHOLDS:
            taken = {image: np.zeros(len(b), dtype=bool) for image, b in gt_boxes.items()}
            is_tp = np.zeros(len(ranked), dtype=bool)
            for k, ((image, _), overlap) in enumerate(zip(ranked, ious)):
                if overlap.size == 0:
                    continue
                candidates = np.where(taken[image], -1.0, overlap)
                best = int(np.argmax(candidates))
                if candidates[best] >= threshold:
                    taken[image][best] = True
                    is_tp[k] = True
            per_threshold[float(threshold)].append(average_precision(scores, is_tp, num_targets))

    means = {t: float(np.mean(v)) for t, v in per_threshold.items()}
    return float(np.mean(list(means.values()))), means[0.5]
