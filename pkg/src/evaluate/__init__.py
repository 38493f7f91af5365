"""Explainability scores, COCO-style mAP and the evaluation runner."""
from .metrics import (
    alignment_error,
    average_precision,
    avg_active_prototypes,
    coco_map,
    exclusion_error,
    perplexity,
)
from .evaluator import ImageScores, evaluate_model, score_outputs

__all__ = [
    "alignment_error",
    "average_precision",
    "avg_active_prototypes",
    "coco_map",
    "exclusion_error",
    "perplexity",
    "ImageScores",
    "evaluate_model",
    "score_outputs",
]
