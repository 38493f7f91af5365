"""Tests for result rows, seed aggregation and sweep tables."""
from __future__ import annotations

from dataclasses import replace

import pytest

from src.core.models import LossReport, MetricsReport
from src.core.reporting import (
    AGGREGATE_COLUMNS,
    METRICS_COLUMNS,
    SweepCell,
    aggregate_reports,
    aggregate_rows,
    format_mean_std,
    metrics_row,
    sweep_rows,
    sweep_table,
)


def _report(seed: int, ee: float, ae=0.3, map_50_95: float = 0.5) -> MetricsReport:
    return MetricsReport(
        ee=ee, ae=ae, px=4.0, aap=2.0, map_50_95=map_50_95, map_50=0.8,
        mode="softmax", prototypes=16, align_coef="1.2->0.7", config_hash="abc", split="val", seed=seed,
    )


def test_metrics_row_covers_every_column():
    row = metrics_row(_report(0, 0.25, ae=None))
    assert set(row) == set(METRICS_COLUMNS)
    assert row["ee"] == "0.25"
    assert row["ae"] == ""


def test_metrics_row_carries_loss_terms():
    report = replace(_report(0, 0.25), loss=LossReport(ce=1.5, l1=0.25, giou=0.5, align=2.0, total=4.25))
    row = metrics_row(report)
    assert (row["loss_ce"], row["loss_align"], row["loss_total"]) == ("1.5", "2", "4.25")
    assert metrics_row(_report(0, 0.25))["loss_total"] == ""


def test_population_std_over_seeds():
    stats = aggregate_reports([_report(0, 0.1), _report(1, 0.3)])
    mean, std = stats["ee"]
    assert mean == pytest.approx(0.2)
    assert std == pytest.approx(0.1)


def test_missing_scores_aggregate_to_none():
    stats = aggregate_reports([_report(0, 0.1, ae=None), _report(1, 0.2, ae=None)])
    assert stats["ae"] == (None, None)


def test_aggregate_rows():
    rows = aggregate_rows([_report(0, 0.1), _report(2, 0.3)])
    assert len(rows) == 6
    assert set(rows[0]) == set(AGGREGATE_COLUMNS)
    assert rows[0]["seeds"] == "0,2"
    assert aggregate_rows([]) == []


@pytest.mark.parametrize(
    "args, kwargs, expected",
    [
        ((0.172, 0.031), {"percent": True}, "17.2±3.1"),
        ((3.5, 0.25), {}, "3.500±0.250"),
        ((None, None), {}, "n/a"),
        ((0.5, None), {"percent": True}, "50.0±0.0"),
    ],
)
def test_format_mean_std(args, kwargs, expected):
    assert format_mean_std(*args, **kwargs) == expected


def test_sweep_rows_and_table():
    cells = [
        SweepCell(axis="align_coef", value="0", config_hash="h0", reports=[_report(0, 0.4), _report(1, 0.2)]),
        SweepCell(axis="align_coef", value="8", config_hash="h8", reports=[_report(0, 0.1)]),
    ]
    rows = sweep_rows(cells)
    assert len(rows) == 12
    assert rows[0] == {"axis": "align_coef", "value": "0", "score": "ee", "mean": "0.3", "std": "0.1", "config_hash": "h0"}

    header, table = sweep_table(cells)
    assert header == ["score", "0", "8"]
    assert table[0] == ["ee", "30.0±10.0", "10.0±0.0"]
    assert [row[0] for row in table] == ["ee", "ae", "px", "aap", "map_50_95", "map_50"]
