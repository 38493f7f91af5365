"""Result formatting helpers.

Turns MetricsReports into CSV rows, aggregates them over seeds and lays out
sweep results as long-form rows and score × value tables.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .models import MetricsReport

__all__ = [
    "METRICS_COLUMNS",
    "AGGREGATE_COLUMNS",
    "SWEEP_COLUMNS",
    "PERCENT_SCORES",
    "LOSS_TERMS",
    "SweepCell",
    "metrics_row",
    "aggregate_reports",
    "aggregate_rows",
    "format_mean_std",
    "sweep_rows",
    "sweep_table",
]

METRICS_COLUMNS = (
    "config_hash", "split", "seed", "mode", "prototypes", "align_coef",
    "ee", "ae", "px", "aap", "map_50_95", "map_50",
    "loss_ce", "loss_l1", "loss_giou", "loss_align", "loss_total",
)
AGGREGATE_COLUMNS = ("config_hash", "split", "seeds", "score", "mean", "std")
SWEEP_COLUMNS = ("axis", "value", "score", "mean", "std", "config_hash")

LOSS_TERMS = ("ce", "l1", "giou", "align", "total")

# Shown in percent in sweep tables; CSV rows keep fractions
PERCENT_SCORES = ("ee", "ae")

MeanStd = Tuple[Optional[float], Optional[float]]


def _fmt_float(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.10g}"


def metrics_row(report: MetricsReport) -> Dict[str, str]:
    """One metrics.csv row; missing scores and losses are empty cells."""
    row = {
        "config_hash": report.config_hash,
        "split": report.split,
        "seed": str(report.seed),
        "mode": report.mode,
        "prototypes": str(report.prototypes),
        "align_coef": report.align_coef,
    }
    row.update({name: _fmt_float(value) for name, value in report.scores().items()})
    terms = report.loss.as_row() if report.loss is not None else {}
    row.update({f"loss_{name}": _fmt_float(terms.get(name)) for name in LOSS_TERMS})
    return row


def aggregate_reports(reports: Sequence[MetricsReport]) -> Dict[str, MeanStd]:
    """Mean and (population) standard deviation of every score over seeds.

    Scores that are None for every report aggregate to (None, None).
    """
    result: Dict[str, MeanStd] = {}
    for name in MetricsReport.SCORE_FIELDS:
        values = [v for v in (getattr(r, name) for r in reports) if v is not None]
        if not values:
            result[name] = (None, None)
            continue
        arr = np.asarray(values, dtype=np.float64)
        result[name] = (float(arr.mean()), float(arr.std()))
    return result


def aggregate_rows(reports: Sequence[MetricsReport]) -> List[Dict[str, str]]:
    if not reports:
        return []
    seeds = ",".join(str(r.seed) for r in reports)
    return [
        {
            "config_hash": reports[0].config_hash,
            "split": reports[0].split,
            "seeds": seeds,
            "score": name,
            "mean": _fmt_float(mean),
            "std": _fmt_float(std),
        }
        for name, (mean, std) in aggregate_reports(reports).items()
    ]


def format_mean_std(mean: Optional[float], std: Optional[float], *, percent: bool = False, digits: int = 1) -> str:
    """``"17.2±3.1"`` style cell; ``"n/a"`` when the score is undefined."""
    if mean is None:
        return "n/a"
    scale = 100.0 if percent else 1.0
    if not percent:
        digits = max(digits, 3)
    return f"{mean * scale:.{digits}f}±{(std or 0.0) * scale:.{digits}f}"


# Section: Sweeps
@dataclass
class SweepCell:
    """All seed reports of one (axis, value) cell of a sweep matrix."""
    axis: str
    value: str
    config_hash: str
    reports: List[MetricsReport] = field(default_factory=list)


def sweep_rows(cells: Sequence[SweepCell]) -> List[Dict[str, str]]:
    """Long-form rows (axis, value, score, mean, std, config_hash)."""
    rows = []
    for cell in cells:
        for name, (mean, std) in aggregate_reports(cell.reports).items():
            rows.append({
                "axis": cell.axis,
                "value": cell.value,
                "score": name,
                "mean": _fmt_float(mean),
                "std": _fmt_float(std),
                "config_hash": cell.config_hash,
            })
    return rows


def sweep_table(cells: Sequence[SweepCell]) -> Tuple[List[str], List[List[str]]]:
    """Table layout of one axis: rows are scores, columns are axis values."""
    header = ["score"] + [cell.value for cell in cells]
    aggregated = [aggregate_reports(cell.reports) for cell in cells]
    rows = []
    for name in MetricsReport.SCORE_FIELDS:
        percent = name in PERCENT_SCORES
        rows.append([name] + [format_mean_std(*agg[name], percent=percent) for agg in aggregated])
    return header, rows
