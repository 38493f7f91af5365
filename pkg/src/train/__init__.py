"""Matching, losses and the training loop.

Modules:
    matching: Box geometry, matching cost and Hungarian assignment
    losses: Detection losses, saliency and the prototype alignment loss
    trainer: Epoch loop, checkpoints and loss curves

Note: Trainer is not imported here, the trainer depends on the evaluation
package, which itself uses matching. Import it from ``src.train.trainer``.
"""
from .matching import (
    box_area,
    box_cxcywh_to_xyxy,
    cost_matrix,
    detection_cost,
    giou,
    hungarian_match,
    iou,
    pairwise_giou,
    pairwise_iou,
)
from .losses import (
    AlignmentTerm,
    LossOutput,
    align_coefficient,
    alignment_loss,
    assign_prototypes,
    assignment_for_config,
    build_saliency,
    giou_loss_terms,
    match_batch,
    total_loss,
)

__all__ = [
    # Matching
    "box_area",
    "box_cxcywh_to_xyxy",
    "cost_matrix",
    "detection_cost",
    "giou",
    "hungarian_match",
    "iou",
    "pairwise_giou",
    "pairwise_iou",
    # Losses
    "AlignmentTerm",
    "LossOutput",
    "align_coefficient",
    "alignment_loss",
    "assign_prototypes",
    "assignment_for_config",
    "build_saliency",
    "giou_loss_terms",
    "match_batch",
    "total_loss",
]
