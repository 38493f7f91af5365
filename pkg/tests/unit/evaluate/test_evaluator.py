"""Tests for split evaluation."""
from __future__ import annotations

from dataclasses import replace

import pytest

from src.core.models import DataError, NeckNormMode, NormKind
from src.data.shapes import load_split
from src.evaluate.evaluator import evaluate_model, format_align_coef
from src.model.network import ProtoDetector
from src.train.losses import assignment_for_config


def _evaluate(config, **kwargs):
    model = ProtoDetector.from_config(config)
    return evaluate_model(model, load_split(config, "val"), config, assignment_for_config(config), **kwargs)


def test_scores_are_in_range(tiny_config) -> None:
    report = _evaluate(tiny_config, config_hash="cafe")
    assert 0.0 <= report.ee <= 1.0
    assert 1.0 <= report.px <= tiny_config.prototypes
    assert report.aap == pytest.approx(tiny_config.prototypes)
    assert 0.0 <= report.map_50_95 <= report.map_50 <= 1.0
    assert report.mode == "softmax"
    assert report.config_hash == "cafe"


def test_argmax_evaluation_is_exclusive(tiny_config) -> None:
    report = _evaluate(tiny_config, mode=NeckNormMode(kind=NormKind.ARGMAX))
    assert report.ee == 0.0
    assert report.aap == 1.0
    assert report.mode == "argmax"


def test_ablation_has_no_prototype_scores(tiny_config) -> None:
    report = _evaluate(replace(tiny_config, neck="none"))
    assert (report.ee, report.ae, report.px, report.aap) == (None, None, None, None)
    assert report.prototypes == 0


def test_empty_split(tiny_config) -> None:
    config = replace(tiny_config, val_samples=0)
    with pytest.raises(DataError):
        evaluate_model(ProtoDetector.from_config(config), [], config, None)


def test_align_coef_label(tiny_config) -> None:
    assert format_align_coef(tiny_config) == "1.2->0.7"
    assert format_align_coef(replace(tiny_config, align_coef_start=8.0, align_coef_end=8.0)) == "8"


def test_loss_terms_use_the_final_alignment_weight(tiny_config) -> None:
    config = replace(tiny_config, batch_size=3)
    loss = _evaluate(config).loss
    assert loss is not None
    assert all(value >= 0.0 for value in (loss.ce, loss.l1, loss.giou))
    expected = (
        config.loss_ce * loss.ce
        + config.loss_bbox * loss.l1
        + config.loss_giou * loss.giou
        + config.align_coef_end * loss.align
    )
    assert loss.total == pytest.approx(expected)


def test_ablation_loss_has_no_alignment_term(tiny_config) -> None:
    loss = _evaluate(replace(tiny_config, neck="none")).loss
    assert loss.align == 0.0
    assert loss.total > 0.0
