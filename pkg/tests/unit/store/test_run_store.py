"""Tests for the run index and its CSV views."""
from __future__ import annotations

import json
from pathlib import Path

from src.core.models import LossReport, MetricsReport
from src.store.run_store import LOSS_COLUMNS, RunRecord, RunStore, read_csv, write_csv, write_loss_csv


def _report(seed: int = 0, ee: float = 0.1, config_hash: str = "abc") -> MetricsReport:
    return MetricsReport(
        ee=ee, ae=0.2, px=3.0, aap=1.5, map_50_95=0.4, map_50=0.7,
        mode="softmax", prototypes=16, align_coef="1.2->0.7", config_hash=config_hash, seed=seed,
    )


def test_record_and_reload(tmp_path: Path):
    store = RunStore(base_path=tmp_path)
    store.record(RunRecord(config_hash="abc", command="train", neck="softmax", seed=0, artifacts={"ckpt": "x"}))

    reloaded = RunStore(base_path=tmp_path)
    records = reloaded.get("abc")
    assert len(records) == 1
    assert records[0].artifacts == {"ckpt": "x"}
    assert records[0].split == ""


def test_rerun_replaces_in_place(tmp_path: Path):
    store = RunStore(base_path=tmp_path)
    store.record_metrics(_report(ee=0.1), neck="softmax")
    store.record_metrics(_report(ee=0.1, config_hash="def"), neck="softmax")
    store.record_metrics(_report(ee=0.5), neck="softmax")

    assert [r.config_hash for r in store.all()] == ["abc", "def"]
    rows = read_csv(store.metrics_path)
    assert [row["config_hash"] for row in rows] == ["abc", "def"]
    assert rows[0]["ee"] == "0.5"


def test_metrics_csv_is_byte_stable(tmp_path: Path):
    store = RunStore(base_path=tmp_path)
    store.record_metrics(_report(), neck="softmax")
    first = store.metrics_path.read_bytes()
    store.record_metrics(_report(), neck="softmax")
    assert store.metrics_path.read_bytes() == first


def test_index_is_byte_identical_across_reruns(tmp_path: Path):
    def _fill(root: Path) -> bytes:
        store = RunStore(base_path=root)
        store.record(RunRecord(config_hash="abc", command="train", neck="softmax", seed=0, split="train"))
        store.record_metrics(_report(), neck="softmax", artifacts={"checkpoint": "best.ckpt"})
        return (root / "index.json").read_bytes()

    assert _fill(tmp_path / "a") == _fill(tmp_path / "b")


def test_legacy_timestamps_are_ignored():
    data = RunRecord(config_hash="h", command="train", neck="none", seed=0).to_dict()
    assert "updated_at" not in data
    data["updated_at"] = "2026-01-01T00:00:00"
    assert RunRecord.from_dict(data) == RunRecord(config_hash="h", command="train", neck="none", seed=0)


def test_seeds_are_separate_records(tmp_path: Path):
    store = RunStore(base_path=tmp_path)
    store.record_metrics(_report(seed=0), neck="softmax")
    store.record_metrics(_report(seed=1), neck="softmax")
    assert len(store.get("abc", command="eval")) == 2
    assert store.get("abc", command="train") == []


def test_corrupt_index_starts_empty(tmp_path: Path):
    (tmp_path / "index.json").write_text("{broken")
    store = RunStore(base_path=tmp_path)
    assert store.all() == []
    store.record(RunRecord(config_hash="abc", command="train", neck="none", seed=0))
    assert json.loads((tmp_path / "index.json").read_text())["version"] == 1


def test_remove(tmp_path: Path):
    store = RunStore(base_path=tmp_path)
    store.record_metrics(_report(seed=0), neck="softmax")
    store.record_metrics(_report(seed=1), neck="softmax")
    assert store.remove("abc") == 2
    assert store.remove("abc") == 0
    assert read_csv(store.metrics_path) == []


def test_record_round_trip():
    record = RunRecord(config_hash="h", command="eval", neck="argmax", seed=2, split="val", metrics={"ee": "0"})
    assert RunRecord.from_dict(record.to_dict()) == record


def test_write_csv_uses_unix_newlines(tmp_path: Path):
    path = tmp_path / "t.csv"
    write_csv(path, ["a", "b"], [["1", "2"]])
    assert path.read_bytes() == b"a,b\n1,2\n"


def test_loss_csv(tmp_path: Path):
    path = tmp_path / "loss.csv"
    write_loss_csv(path, [(0, LossReport(ce=1.0, l1=0.5, giou=0.25, align=2.0, total=3.75))], "abc")
    rows = read_csv(path)
    assert list(rows[0]) == list(LOSS_COLUMNS)
    assert rows[0]["total"] == "3.75"
    assert rows[0]["config_hash"] == "abc"
