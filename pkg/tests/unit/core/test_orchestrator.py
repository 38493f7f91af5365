"""Tests for the experiment orchestrator and its exit-code wrapper."""
from __future__ import annotations

from dataclasses import replace
from pathlib import Path
from types import SimpleNamespace

import pytest

import src.core.orchestrator as orchestrator_module
from src.core.models import (
    EXIT_CHECKPOINT,
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_FAILURE,
    EXIT_OK,
    CheckpointError,
    ConfigError,
    DataError,
    MetricsReport,
    RunConfig,
)
from src.core.orchestrator import (
    ExperimentOrchestrator,
    apply_axis_value,
    parse_matrix_text,
    safe_run,
)
from src.core.validation import config_hash
from src.data.export import read_split
from src.store.run_store import RunRecord, read_csv


# Section: Sweep Matrix
def test_parse_matrix():
    matrix = parse_matrix_text(
        """
        seeds = 0, 1, 2
        axis.align_coef = 0, 0.1, 8   # strong alignment last
        axis.argmax_freq = 0, 5, 100
        """
    )
    assert matrix.seeds == (0, 1, 2)
    assert matrix.axes == [("align_coef", [0.0, 0.1, 8.0]), ("argmax_freq", [0.0, 5.0, 100.0])]


def test_parse_neck_axis_keeps_names():
    matrix = parse_matrix_text("axis.neck = softmax, none\naxis.align_coef = 2")
    assert matrix.axes == [("neck", ["softmax", "none"]), ("align_coef", [2.0])]


def test_parse_empty_matrix():
    matrix = parse_matrix_text("# nothing to sweep\n")
    assert matrix.seeds == () and matrix.axes == []


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("seeds = 0\naxis.speed = 1", "line 2: unknown axis 'speed'"),
        ("workers = 2", "line 1: unknown key 'workers'"),
        ("seeds = 0\nseeds = 1", "line 2: duplicate key"),
        ("seeds = 1.5", "line 1: seeds must be non-negative integers"),
        ("seeds = -1", "line 1: seeds must be non-negative integers"),
        ("axis.align_coef = a, b", "line 1"),
        ("axis.align_coef", "line 1: expected 'key = value'"),
        ("axis.neck = softmax, maxout", "line 1: neck values must be among"),
        ("axis.neck = softmax,", "line 1: neck values must be among"),
    ],
)
def test_matrix_errors(text, fragment):
    with pytest.raises(ConfigError) as info:
        parse_matrix_text(text)
    assert fragment in str(info.value)


def test_align_axis_sets_a_constant():
    config = apply_axis_value(RunConfig(), "align_coef", 8.0)
    assert (config.align_coef_start, config.align_coef_end) == (8.0, 8.0)


def test_argmax_axis():
    partial = apply_axis_value(RunConfig(), "argmax_freq", 25.0)
    assert (partial.neck, partial.argmax_start, partial.argmax_end) == ("softmax", 25.0, 25.0)
    full = apply_axis_value(RunConfig(), "argmax_freq", 100.0)
    assert full.neck == "argmax"


def test_neck_axis_swaps_the_normalization():
    assert apply_axis_value(RunConfig(), "neck", "sparsemax").neck == "sparsemax"
    ablation = apply_axis_value(RunConfig(), "neck", "none")
    assert ablation.neck == "none" and not ablation.has_neck


def test_axis_values_are_validated():
    with pytest.raises(ConfigError):
        apply_axis_value(RunConfig(), "align_coef", -1.0)
    with pytest.raises(ConfigError):
        apply_axis_value(RunConfig(), "depth", 1.0)


# Section: Exit Codes
@pytest.mark.parametrize(
    "error, code",
    [
        (ConfigError("bad key"), EXIT_CONFIG),
        (CheckpointError("truncated"), EXIT_CHECKPOINT),
        (DataError("empty split"), EXIT_DATA),
        (RuntimeError("boom"), EXIT_FAILURE),
    ],
)
def test_safe_run_maps_errors(error, code):
    def fail():
        raise error

    assert safe_run(fail) == code


def test_safe_run_success():
    assert safe_run(lambda: None) == EXIT_OK


def test_safe_run_propagates_interrupts():
    def interrupt():
        raise KeyboardInterrupt

    with pytest.raises(KeyboardInterrupt):
        safe_run(interrupt)


# Section: Orchestrator
def test_run_dir_is_keyed_by_config_hash(tiny_config, tmp_path):
    orchestrator = ExperimentOrchestrator(tiny_config, out_dir=tmp_path)
    assert orchestrator.run_dir().parent == tmp_path
    assert orchestrator.run_dir() != orchestrator.run_dir(replace(tiny_config, seed=3))


def test_checkpoint_with_several_seeds(tiny_config, tmp_path):
    orchestrator = ExperimentOrchestrator(tiny_config, out_dir=tmp_path)
    with pytest.raises(ConfigError):
        orchestrator.evaluate(checkpoint=tmp_path / "x.ckpt", seeds=[0, 1])


def test_evaluate_empty_split_before_loading(tiny_config, tmp_path):
    orchestrator = ExperimentOrchestrator(replace(tiny_config, val_samples=0), out_dir=tmp_path)
    with pytest.raises(DataError):
        orchestrator.evaluate(split="val")


def test_evaluate_without_checkpoint(tiny_config, tmp_path):
    with pytest.raises(CheckpointError):
        ExperimentOrchestrator(tiny_config, out_dir=tmp_path).evaluate()


def test_explain_rejects_unknown_mode_and_ablation(tiny_config, tmp_path):
    with pytest.raises(ConfigError):
        ExperimentOrchestrator(tiny_config, out_dir=tmp_path).explain(mode="heatmap")
    with pytest.raises(ConfigError):
        ExperimentOrchestrator(replace(tiny_config, neck="none"), out_dir=tmp_path).explain()


def test_explain_index_out_of_range(tiny_config, tmp_path):
    with pytest.raises(DataError):
        ExperimentOrchestrator(tiny_config, out_dir=tmp_path).explain(index=99)


def test_export_skips_empty_splits(tiny_config, tmp_path):
    orchestrator = ExperimentOrchestrator(replace(tiny_config, val_samples=0), out_dir=tmp_path)
    written = orchestrator.export_data()
    assert [p.name for p in written] == ["train.pnsd"]
    assert len(read_split(written[0])) == tiny_config.train_samples


def test_export_of_only_empty_splits(tiny_config, tmp_path):
    orchestrator = ExperimentOrchestrator(replace(tiny_config, val_samples=0), out_dir=tmp_path)
    with pytest.raises(DataError):
        orchestrator.export_data(["val"])


def test_empty_sweep_writes_header_only(tiny_config, tmp_path):
    orchestrator = ExperimentOrchestrator(tiny_config, out_dir=tmp_path)
    path = orchestrator.sweep(parse_matrix_text(""))
    assert path.read_text() == "axis,value,score,mean,std,config_hash\n"


# Section: Run Index
def _index_two_runs(orchestrator):
    for run_hash in ("3f2a9c1d0e4b", "3f2a00000000"):
        orchestrator.store.record(RunRecord(config_hash=run_hash, command="train", neck="softmax", seed=0, split="train"))
        (orchestrator.out_root / run_hash / "final.ckpt").parent.mkdir(parents=True, exist_ok=True)
        (orchestrator.out_root / run_hash / "final.ckpt").write_bytes(b"weights")


def test_runs_filter_by_hash_prefix(tiny_config, tmp_path):
    orchestrator = ExperimentOrchestrator(tiny_config, out_dir=tmp_path)
    _index_two_runs(orchestrator)
    assert len(orchestrator.runs()) == 2
    assert len(orchestrator.runs("3f2a")) == 2
    assert [r.config_hash for r in orchestrator.runs("3f2a9")] == ["3f2a9c1d0e4b"]
    assert orchestrator.runs("ffff") == []


def test_remove_run_deletes_records_and_artifacts(tiny_config, tmp_path):
    orchestrator = ExperimentOrchestrator(tiny_config, out_dir=tmp_path)
    _index_two_runs(orchestrator)
    assert orchestrator.remove_run("3f2a9c1d0e4b") == 1
    assert not (tmp_path / "3f2a9c1d0e4b").exists()
    assert (tmp_path / "3f2a00000000" / "final.ckpt").exists()
    assert [r.config_hash for r in orchestrator.runs()] == ["3f2a00000000"]


@pytest.mark.parametrize("run_hash, error", [("../escape", ConfigError), ("3f2a", ConfigError), ("0123456789ab", DataError)])
def test_remove_run_rejects_bad_or_unknown_hashes(tiny_config, tmp_path, run_hash, error):
    orchestrator = ExperimentOrchestrator(tiny_config, out_dir=tmp_path)
    _index_two_runs(orchestrator)
    with pytest.raises(error):
        orchestrator.remove_run(run_hash)
    assert len(orchestrator.runs()) == 2


def test_sweep_trains_shared_cells_once(tiny_config, tmp_path, monkeypatch):
    calls = []

    def fake_cell(config, out_root):
        calls.append(config_hash(config))
        result = SimpleNamespace(final_checkpoint=Path("f"), best_checkpoint=Path("b"), loss_csv=Path("l"))
        report = MetricsReport(
            ee=0.1, ae=0.2, px=2.0, aap=3.0, map_50_95=0.4, map_50=0.6, mode=config.neck,
            prototypes=config.prototypes, align_coef="0", config_hash=config_hash(config), seed=config.seed,
        )
        return result, report

    monkeypatch.setattr(orchestrator_module, "_run_cell", fake_cell)
    base = replace(tiny_config, argmax_start=0.0, argmax_end=0.0)
    matrix = parse_matrix_text("seeds = 0, 1\naxis.argmax_freq = 0, 100\naxis.neck = softmax, none")
    path = ExperimentOrchestrator(base, out_dir=tmp_path).sweep(matrix)

    assert len(calls) == 6
    assert len(set(calls)) == 6
    rows = read_csv(path)
    assert len(rows) == 4 * 6
    softmax_hash = {row["config_hash"] for row in rows if row["value"] in ("0", "softmax")}
    assert len(softmax_hash) == 1
