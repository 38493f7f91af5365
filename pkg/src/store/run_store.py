"""Persistent index of runs and their CSV results.

This module provides the RunStore class which manages:
- An ``index.json`` of runs keyed by config hash
- ``metrics.csv`` rewritten from the index so reruns overwrite identically
- Per-run loss curves and generic CSV tables written atomically
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from ..core.models import LossReport, MetricsReport
from ..core.reporting import METRICS_COLUMNS, metrics_row
from ..infra import get_logger
from ..infra.paths import get_data_dir

__all__ = [
    "RunRecord",
    "RunStore",
    "LOSS_COLUMNS",
    "write_csv",
    "write_loss_csv",
    "read_csv",
]

_logger = get_logger(__name__)

LOSS_COLUMNS = ("epoch", "ce", "l1", "giou", "align", "total", "config_hash")


# Section: CSV Helpers
def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    """Write a CSV file with atomic replacement and ``\\n`` line endings."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = path.with_suffix(path.suffix + ".tmp")
    temp_path.write_text(buffer.getvalue(), encoding="utf-8")
    temp_path.replace(path)


def read_csv(path: Path) -> List[Dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_loss_csv(path: Path, rows: Sequence[Tuple[int, LossReport]], config_hash: str) -> None:
    """Loss curve of one training run, one row per epoch."""
    write_csv(
        path,
        LOSS_COLUMNS,
        [
            [str(epoch)] + [f"{value:.10g}" for value in report.as_row().values()] + [config_hash]
            for epoch, report in rows
        ],
    )


# Section: Run Record
@dataclass
class RunRecord:
    """One command run on one config, as kept in the index.

    ``key`` identifies the record: reruns of the same command on the same
    config hash and split replace it in place. Records carry no wall-clock
    time, so identical runs leave an identical index.
    """
    config_hash: str
    command: str
    neck: str
    seed: int
    split: str = ""
    artifacts: Dict[str, str] = field(default_factory=dict)
    metrics: Optional[Dict[str, str]] = None  # metrics.csv row

    @property
    def key(self) -> Tuple[str, str, str, int]:
        return self.config_hash, self.command, self.split, self.seed

    def to_dict(self) -> dict:
        """Convert to a JSON-serializable dictionary."""
        return {
            "version": 1,
            "config_hash": self.config_hash,
            "command": self.command,
            "neck": self.neck,
            "seed": self.seed,
            "split": self.split,
            "artifacts": dict(self.artifacts),
            "metrics": self.metrics,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        return cls(
            config_hash=data["config_hash"],
            command=data["command"],
            neck=data["neck"],
            seed=int(data["seed"]),
            split=data.get("split", ""),
            artifacts=dict(data.get("artifacts", {})),
            metrics=data.get("metrics"),
        )


# Section: Run Store
class RunStore:
    """Index of runs under one output root.

    The index lives in ``<root>/index.json``; ``<root>/metrics.csv`` is a
    derived view regenerated after every change.
    """

    def __init__(self, *, base_path: Optional[Path] = None) -> None:
        self._base_path = Path(base_path) if base_path is not None else get_data_dir()
        self._index_path = self._base_path / "index.json"
        self._metrics_path = self._base_path / "metrics.csv"
        self._index: List[RunRecord] = []
        self._loaded = False

    @property
    def metrics_path(self) -> Path:
        return self._metrics_path

    def load(self) -> None:
        """Load the index from disk; a missing or corrupt index starts empty."""
        self._index = []
        self._loaded = True

        if not self._index_path.exists():
            _logger.debug("No run index found, starting fresh")
            return

        try:
            data = json.loads(self._index_path.read_text(encoding="utf-8"))
            if not isinstance(data, dict) or "runs" not in data:
                _logger.warning("Invalid run index format, starting fresh")
                return

            for entry in data.get("runs", []):
                try:
                    self._index.append(RunRecord.from_dict(entry))
                except Exception as e:
                    _logger.warning(f"Skipping invalid run entry: {e}")

            _logger.debug(f"Loaded {len(self._index)} indexed runs")
        except Exception as e:
            _logger.warning(f"Failed to load run index: {e}")

    def _ensure_loaded(self) -> None:
        if not self._loaded:
            self.load()

    def _save_index(self) -> None:
        self._base_path.mkdir(parents=True, exist_ok=True)
        payload = {
            "version": 1,
            "runs": [r.to_dict() for r in self._index],
        }
        temp_path = self._index_path.with_suffix(".tmp")
        temp_path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
        temp_path.replace(self._index_path)

    def _write_metrics(self) -> None:
        rows = [
            [r.metrics.get(column, "") for column in METRICS_COLUMNS]
            for r in self._index
            if r.metrics is not None
        ]
        write_csv(self._metrics_path, METRICS_COLUMNS, rows)

    def record(self, record: RunRecord) -> None:
        """Insert a run, replacing any record with the same key in place."""
        self._ensure_loaded()
        for i, existing in enumerate(self._index):
            if existing.key == record.key:
                self._index[i] = record
                break
        else:
            self._index.append(record)
        self._save_index()
        if record.metrics is not None:
            self._write_metrics()
        _logger.debug(f"Recorded {record.command} run {record.config_hash}")

    def record_metrics(self, report: MetricsReport, *, neck: str, artifacts: Optional[Dict[str, str]] = None) -> RunRecord:
        """Index an evaluation and regenerate metrics.csv."""
        record = RunRecord(
            config_hash=report.config_hash,
            command="eval",
            neck=neck,
            seed=report.seed,
            split=report.split,
            artifacts=dict(artifacts or {}),
            metrics=metrics_row(report),
        )
        self.record(record)
        return record

    def get(self, config_hash: str, command: Optional[str] = None) -> List[RunRecord]:
        self._ensure_loaded()
        return [
            r for r in self._index
            if r.config_hash == config_hash and (command is None or r.command == command)
        ]

    def all(self) -> List[RunRecord]:
        self._ensure_loaded()
        return list(self._index)

    def remove(self, config_hash: str) -> int:
        """Drop every record of a config hash; returns how many were removed."""
        self._ensure_loaded()
        original_count = len(self._index)
        self._index = [r for r in self._index if r.config_hash != config_hash]
        removed = original_count - len(self._index)
        if removed:
            self._save_index()
            self._write_metrics()
        return removed
