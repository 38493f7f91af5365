"""Evaluation runner: forward a split, match, and score every image."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..core.models import (
    DataError,
    Detection,
    LossReport,
    MetricsReport,
    NeckNormMode,
    PrototypeAssignment,
    RunConfig,
    SceneSample,
    Target,
)
from ..data.shapes import stack_batch
from ..infra.logging import get_logger
from ..infra.pool import ordered_map
from ..model.network import ModelOutput, ProtoDetector
from ..train.losses import match_batch, total_loss
from .metrics import (
    alignment_error,
    avg_active_prototypes,
    coco_map,
    exclusion_error,
    perplexity,
)

__all__ = ["ImageScores", "score_outputs", "evaluate_model", "format_align_coef"]

_logger = get_logger(__name__)


@dataclass
class ImageScores:
    """Scores of one image plus what mAP needs from it."""
    detections: List[Detection]
    targets: List[Target]
    ee: Optional[float] = None
    ae: Optional[float] = None
    px: Optional[float] = None
    aap: Optional[float] = None


def format_align_coef(config: RunConfig) -> str:
    if config.align_coef_start == config.align_coef_end:
        return f"{config.align_coef_start:g}"
    return f"{config.align_coef_start:g}->{config.align_coef_end:g}"


def score_outputs(
    output: ModelOutput,
    samples: Sequence[SceneSample],
    config: RunConfig,
    assignment: Optional[PrototypeAssignment],
) -> List[ImageScores]:
    """Per-image EE/AE/PX/AAP from one batched forward pass.

    AE only covers queries matched to a target.
    """
    targets = [s.targets for s in samples]
    matches = match_batch(output.detector.class_logits.data, output.detector.boxes.data, targets, config)
    maps = output.prototype_maps()

    def _score(b: int) -> ImageScores:
        scores = ImageScores(detections=output.detections(b), targets=list(targets[b]))
        if not maps or assignment is None:
            return scores
        m_p = maps[b]
        attention = output.attention_maps(b)
        matched = matches[b].pairs
        scores.ee = exclusion_error(m_p)
        scores.px = perplexity(m_p)
        scores.aap = avg_active_prototypes(m_p)
        scores.ae = alignment_error(
            [attention[q] for q, _ in matched],
            [targets[b][t].label for _, t in matched],
            m_p,
            assignment,
        )
        return scores

    return ordered_map(_score, range(len(samples)))


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def _weighted_loss(reports: Sequence[LossReport], weights: Sequence[int]) -> LossReport:
    w = np.asarray(weights, dtype=np.float64) / float(sum(weights))
    rows = [r.as_row() for r in reports]
    terms = {name: float(np.dot(w, [row[name] for row in rows])) for name in rows[0]}
    return LossReport(**terms, no_detections=any(r.no_detections for r in reports))


def evaluate_model(
    model: ProtoDetector,
    samples: Sequence[SceneSample],
    config: RunConfig,
    assignment: Optional[PrototypeAssignment],
    *,
    split: str = "val",
    mode: Optional[NeckNormMode] = None,
    config_hash: str = "",
) -> MetricsReport:
    """Score a split: per-image prototype scores averaged over images, mAP over the split.

    The loss terms of every batch are averaged with batch-size weights; the
    alignment coefficient is taken at the end of its schedule.
    """
    if not samples:
        raise DataError(f"split '{split}' is empty")
    mode = mode or config.norm_mode
    per_image: List[ImageScores] = []
    losses: List[LossReport] = []
    sizes: List[int] = []
    for start in range(0, len(samples), config.batch_size):
        chunk = samples[start : start + config.batch_size]
        images, pad_masks = stack_batch(chunk)
        output = model(images, mode, pad_masks)
        losses.append(
            total_loss(
                output.detector.class_logits,
                output.detector.boxes,
                output.m_p,
                [s.targets for s in chunk],
                pad_masks,
                config,
                assignment,
                1.0,
            ).report
        )
        per_image.extend(score_outputs(output, chunk, config, assignment))
        sizes.append(len(chunk))

    map_50_95, map_50 = coco_map([s.detections for s in per_image], [s.targets for s in per_image])
    report = MetricsReport(
        ee=_mean([s.ee for s in per_image]),
        ae=_mean([s.ae for s in per_image]),
        px=_mean([s.px for s in per_image]),
        aap=_mean([s.aap for s in per_image]),
        map_50_95=map_50_95,
        map_50=map_50,
        mode=mode.kind.value if config.has_neck else "none",
        prototypes=config.prototypes if config.has_neck else 0,
        align_coef=format_align_coef(config),
        config_hash=config_hash,
        split=split,
        seed=config.seed,
        loss=_weighted_loss(losses, sizes),
    )
    _logger.info(
        f"Evaluated {len(samples)} '{split}' images: mAP={map_50_95:.4f} mAP50={map_50:.4f} "
        f"EE={report.ee} AE={report.ae} PX={report.px} AAP={report.aap} loss={report.loss.total:.4f}"
    )
    return report
