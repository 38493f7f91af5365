"""Orchestrator for protoneck experiments.

The ExperimentOrchestrator is the central coordinator of every command:
- Resolves the output root and the per-config run directory
- Trains, evaluates (optionally over several seeds) and indexes results
- Renders explanation maps with a text sidecar
- Runs variant sweeps and writes their result tables
- Exports generated splits in the binary PNSD layout
- Lists indexed runs and removes them with their artifacts
"""
from __future__ import annotations

import re
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..data.export import write_split
from ..data.shapes import SPLITS, load_sample, load_split, split_range
from ..evaluate.evaluator import evaluate_model
from ..infra import ConfigStore, get_logger, get_run_logger
from ..infra.paths import get_data_dir, get_explain_dir, get_run_dir
from ..model.checkpoint import load_checkpoint
from ..model.network import ProtoDetector
from ..store.run_store import RunRecord, RunStore, write_csv
from ..train.losses import assignment_for_config, match_batch
from ..train.trainer import BEST_CHECKPOINT, Trainer, TrainResult
from ..viz.palette import default_palette
from ..viz.render import render_multi, render_product, render_single, write_image
from .models import (
    EXIT_CHECKPOINT,
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_FAILURE,
    EXIT_OK,
    NECK_ARGMAX,
    SHAPE_NAMES,
    VALID_NECKS,
    CheckpointError,
    ConfigError,
    DataError,
    MetricsReport,
    NormKind,
    RunConfig,
)
from .reporting import AGGREGATE_COLUMNS, SWEEP_COLUMNS, SweepCell, aggregate_rows, sweep_rows, sweep_table
from .validation import config_hash, parse_float_list, validate_config

__all__ = [
    "EXPLAIN_MODES",
    "SWEEP_AXES",
    "SweepMatrix",
    "parse_matrix_text",
    "apply_axis_value",
    "ExperimentOrchestrator",
    "safe_run",
]

_logger = get_logger(__name__)

_HASH_PATTERN = re.compile(r"[0-9a-f]{12}")

EXPLAIN_MODES = ("single", "multi", "product")
SWEEP_AXES = ("align_coef", "argmax_freq", "neck")

AxisValue = Union[float, str]


# Section: Sweep Matrix
@dataclass
class SweepMatrix:
    """Seeds plus an ordered list of (axis, values) to vary one at a time."""
    seeds: Tuple[int, ...] = ()
    axes: List[Tuple[str, List[AxisValue]]] = field(default_factory=list)


def parse_matrix_text(text: str) -> SweepMatrix:
    """Parse ``seeds = 0, 1, 2`` / ``axis.<name> = v1, v2`` lines.

    ``axis.neck`` takes neck names (``softmax, none``); every other axis
    takes numbers.

    Raises ConfigError naming the line for unknown keys or axes and bad values.
    """
    matrix = SweepMatrix()
    seen = set()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{raw_line.strip()}'")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        seen.add(key)
        if key == "axis.neck":
            names = [part.strip() for part in value.split(",")]
            unknown = [name for name in names if name not in VALID_NECKS]
            if unknown:
                raise ConfigError(f"line {lineno}: neck values must be among {list(VALID_NECKS)}")
            matrix.axes.append(("neck", list(names)))
            continue
        try:
            values = parse_float_list(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
        if key == "seeds":
            if any(v != int(v) or v < 0 for v in values):
                raise ConfigError(f"line {lineno}: seeds must be non-negative integers")
            matrix.seeds = tuple(int(v) for v in values)
        elif key.startswith("axis."):
            axis = key[len("axis."):]
            if axis not in SWEEP_AXES:
                raise ConfigError(f"line {lineno}: unknown axis '{axis}'; choose from {list(SWEEP_AXES)}")
            matrix.axes.append((axis, list(values)))
        else:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
    return matrix


def apply_axis_value(config: RunConfig, axis: str, value: AxisValue) -> RunConfig:
    """Config of one sweep cell.

    ``align_coef`` sets a constant alignment coefficient. ``argmax_freq``
    quantizes that percentage of training images; 100 trains (and
    evaluates) a pure Argmax neck. ``neck`` swaps the normalization, or
    drops the neck altogether with ``none``.
    """
    if axis == "neck":
        updated = replace(config, neck=str(value))
    elif axis == "align_coef":
        updated = replace(config, align_coef_start=value, align_coef_end=value)
    elif axis == "argmax_freq":
        if value >= 100.0:
            updated = replace(config, neck=NECK_ARGMAX, argmax_start=100.0, argmax_end=100.0)
        else:
            updated = replace(config, argmax_start=value, argmax_end=value)
    else:
        raise ConfigError(f"unknown sweep axis '{axis}'")
    validate_config(updated)
    return updated


def _format_value(value: AxisValue) -> str:
    return value if isinstance(value, str) else f"{value:g}"


def _run_cell(config: RunConfig, out_root: Path) -> Tuple[TrainResult, MetricsReport]:
    """Train and evaluate one sweep cell; runs in a worker process."""
    run_hash = config_hash(config)
    trainer = Trainer(config, run_dir=get_run_dir(run_hash, out_root), config_hash=run_hash)
    result = trainer.train()
    load_checkpoint(result.best_checkpoint, trainer.model.named_parameters(), expected_hash=run_hash)
    report = evaluate_model(
        trainer.model,
        load_split(config, "val"),
        config,
        trainer.assignment,
        split="val",
        config_hash=run_hash,
    )
    return result, report


# Section: Orchestrator Logic
class ExperimentOrchestrator:
    """Central coordinator of the train / eval / explain / sweep / export-data / runs commands.

    All artifacts of a config go to ``<out>/<config_hash>/``; the run index and
    metrics.csv live in ``<out>/``.
    """

    def __init__(self, config: RunConfig, *, out_dir: Optional[Path] = None, store: Optional[RunStore] = None) -> None:
        self.config = config
        base = out_dir if out_dir is not None else (Path(config.output_dir) if config.output_dir else None)
        self.out_root = get_data_dir(base)
        self.store = store or RunStore(base_path=self.out_root)

    def run_dir(self, config: Optional[RunConfig] = None) -> Path:
        return get_run_dir(config_hash(config or self.config), self.out_root)

    def _with_seed(self, seed: Optional[int]) -> RunConfig:
        return self.config if seed is None else replace(self.config, seed=seed)

    # Section: Train
    def train(self, config: Optional[RunConfig] = None) -> TrainResult:
        config = config or self.config
        run_hash = config_hash(config)
        run_dir = self.run_dir(config)
        ConfigStore(run_dir / "config.cfg").save(config)
        result = Trainer(config, run_dir=run_dir, config_hash=run_hash).train()
        self.store.record(
            RunRecord(
                config_hash=run_hash,
                command="train",
                neck=config.neck,
                seed=config.seed,
                split="train",
                artifacts={
                    "final_checkpoint": str(result.final_checkpoint),
                    "best_checkpoint": str(result.best_checkpoint),
                    "loss_csv": str(result.loss_csv),
                },
            )
        )
        return result

    # Section: Eval
    def load_model(self, config: RunConfig, checkpoint: Optional[Path] = None) -> Tuple[ProtoDetector, Path]:
        """Model of ``config`` with weights from ``checkpoint`` (default: the run's best)."""
        path = Path(checkpoint) if checkpoint is not None else self.run_dir(config) / BEST_CHECKPOINT
        model = ProtoDetector.from_config(config)
        load_checkpoint(path, model.named_parameters(), expected_hash=config_hash(config))
        return model, path

    def evaluate(
        self,
        *,
        checkpoint: Optional[Path] = None,
        split: str = "val",
        seeds: Optional[Sequence[int]] = None,
        norm: Optional[str] = None,
    ) -> List[MetricsReport]:
        """Evaluate one checkpoint, or each seed's best checkpoint.

        ``norm`` evaluates a neck with another normalization than it was
        configured with (e.g. ``argmax``). With several seeds an aggregate
        CSV of mean and std per score is written next to the base run.
        """
        seed_list = list(seeds) if seeds else [self.config.seed]
        if checkpoint is not None and len(seed_list) > 1:
            raise ConfigError("--checkpoint cannot be combined with several --seeds")

        reports = []
        for seed in seed_list:
            config = self._with_seed(seed)
            run_hash = config_hash(config)
            if len(split_range(config, split)) == 0:
                raise DataError(f"split '{split}' is empty")
            model, path = self.load_model(config, checkpoint)
            mode = config.norm_mode if norm is None else config.norm_mode.with_kind(NormKind(norm))
            report = evaluate_model(
                model,
                load_split(config, split),
                config,
                assignment_for_config(config),
                split=split,
                mode=mode,
                config_hash=run_hash,
            )
            self.store.record_metrics(report, neck=config.neck, artifacts={"checkpoint": str(path)})
            reports.append(report)

        if len(reports) > 1:
            aggregate_path = self.run_dir() / f"aggregate_{split}.csv"
            rows = aggregate_rows(reports)
            for row in rows:
                row["config_hash"] = config_hash(self.config)
            write_csv(aggregate_path, AGGREGATE_COLUMNS, [[row[c] for c in AGGREGATE_COLUMNS] for row in rows])
            _logger.info(f"Wrote seed aggregate to {aggregate_path}")
        return reports

    # Section: Explain
    def explain(
        self,
        *,
        checkpoint: Optional[Path] = None,
        split: str = "val",
        index: int = 0,
        mode: str = "multi",
        topk: Optional[int] = None,
        prototypes: Optional[Sequence[int]] = None,
        queries: Optional[Sequence[int]] = None,
        fmt: str = "ppm",
    ) -> List[Path]:
        """Render explanation maps of one image; returns the written files (sidecar last).

        Files are named ``{split}_{index}_{mode}[_p<n>|_q<n>].{fmt}`` with a
        ``{split}_{index}_{mode}.txt`` sidecar; PNGs also carry the sidecar
        header as text chunks.
        """
        config = self.config
        if mode not in EXPLAIN_MODES:
            raise ConfigError(f"unknown explain mode '{mode}'; choose from {list(EXPLAIN_MODES)}")
        if not config.has_neck:
            raise ConfigError("explain needs a prototype neck (neck = none has no prototype maps)")
        sample = load_sample(config, split, index)
        model, _ = self.load_model(config, checkpoint)
        run_hash = config_hash(config)
        logger = get_run_logger(__name__, run_hash)
        assignment = assignment_for_config(config)
        palette = default_palette()
        k = topk if topk is not None else config.topk

        output = model(sample.image[None], config.norm_mode, sample.pad_mask[None])
        m_p = output.prototype_maps()[0]
        attention = output.attention_maps(0)
        match = match_batch(output.detector.class_logits.data, output.detector.boxes.data, [sample.targets], config)[0]
        detections = output.detections(0)

        out_dir = get_explain_dir(run_hash, self.out_root)
        stem = f"{split}_{index}"
        metadata = {
            "config_hash": run_hash,
            "split": split,
            "index": str(index),
            "mode": mode,
            "norm": config.norm_mode.kind.value,
        }
        render_kwargs = dict(alpha=config.overlay_alpha, scale=config.render_scale)
        written: List[Path] = []

        if mode == "single":
            if prototypes:
                chosen = list(prototypes)
            else:
                chosen = [int(p) for p in np.argsort(-m_p.values.sum(axis=(1, 2)), kind="stable")[:k]]
            for p in chosen:
                rgb = render_single(m_p, p, sample.image, **render_kwargs)
                written.append(write_image(out_dir / f"{stem}_single_p{p}.{fmt}", rgb, fmt, metadata))
        elif mode == "multi":
            rgb = render_multi(m_p, k, palette, sample.image, assignment=assignment, **render_kwargs)
            written.append(write_image(out_dir / f"{stem}_multi.{fmt}", rgb, fmt, metadata))
        else:
            chosen_queries = list(queries) if queries else [q for q, _ in match.pairs]
            for q in chosen_queries:
                if not 0 <= q < len(attention):
                    raise DataError(f"query {q} out of range for {len(attention)} queries")
                rgb = render_product(
                    attention[q],
                    m_p,
                    palette,
                    sample.image,
                    blur_sigma=config.blur_sigma,
                    top_k=k,
                    assignment=assignment,
                    **render_kwargs,
                )
                written.append(write_image(out_dir / f"{stem}_product_q{q}.{fmt}", rgb, fmt, metadata))

        lines = [f"{key} = {value}" for key, value in metadata.items()] + [
            "",
            "# prototype  class  mean_activation",
        ]
        mass = m_p.values.mean(axis=(1, 2))
        for p in range(m_p.num_prototypes):
            label = assignment.class_of[p] if assignment is not None else -1
            lines.append(f"{p} {SHAPE_NAMES[label]} {mass[p]:.6f}")
        lines += ["", "# query  target  class  score  box"]
        for q, t in match.pairs:
            label, score = detections[q].top_class()
            box = " ".join(f"{v:.4f}" for v in detections[q].bbox)
            lines.append(f"{q} {t} {SHAPE_NAMES[label]} {score:.4f} {box}")
        sidecar = out_dir / f"{stem}_{mode}.txt"
        temp_path = sidecar.with_name(sidecar.name + ".tmp")
        temp_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        temp_path.replace(sidecar)
        written.append(sidecar)
        logger.info(f"Rendered {len(written) - 1} {mode} map(s) of {split}[{index}] into {out_dir}")
        return written

    # Section: Sweep
    def sweep(self, matrix: SweepMatrix, *, workers: int = 1) -> Path:
        """Train and evaluate every (axis value, seed) cell; returns sweep.csv.

        Cells are independent, so with ``workers > 1`` they run in separate
        processes; results are still reduced in matrix order. A config that
        appears on several axes is trained once and shared.
        """
        seeds = matrix.seeds or (self.config.seed,)
        jobs: List[Tuple[str, str, RunConfig]] = []
        for axis, values in matrix.axes:
            for value in values:
                cell_config = apply_axis_value(self.config, axis, value)
                for seed in seeds:
                    jobs.append((axis, _format_value(value), replace(cell_config, seed=seed)))
        unique: Dict[str, RunConfig] = {}
        for _, _, config in jobs:
            unique.setdefault(config_hash(config), config)
        _logger.info(f"Sweep: {len(matrix.axes)} axes, {len(seeds)} seeds, {len(jobs)} cells, {len(unique)} distinct runs")

        configs = list(unique.values())
        if workers > 1 and len(configs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_cell, configs, [self.out_root] * len(configs)))
        else:
            results = [_run_cell(config, self.out_root) for config in configs]
        by_hash = dict(zip(unique, results))
        outcomes = [by_hash[config_hash(job[2])] for job in jobs]

        cells: List[SweepCell] = []
        for (axis, value, config), (result, report) in zip(jobs, outcomes):
            if not cells or (cells[-1].axis, cells[-1].value) != (axis, value):
                base_hash = config_hash(replace(config, seed=seeds[0]))
                cells.append(SweepCell(axis=axis, value=value, config_hash=base_hash))
            cells[-1].reports.append(report)
            self.store.record(
                RunRecord(
                    config_hash=report.config_hash,
                    command="train",
                    neck=config.neck,
                    seed=config.seed,
                    split="train",
                    artifacts={
                        "final_checkpoint": str(result.final_checkpoint),
                        "best_checkpoint": str(result.best_checkpoint),
                        "loss_csv": str(result.loss_csv),
                    },
                )
            )
            self.store.record_metrics(report, neck=config.neck)

        sweep_dir = self.out_root / "sweep"
        sweep_path = sweep_dir / "sweep.csv"
        rows = sweep_rows(cells)
        write_csv(sweep_path, SWEEP_COLUMNS, [[row[c] for c in SWEEP_COLUMNS] for row in rows])
        for axis, _ in matrix.axes:
            header, table = sweep_table([c for c in cells if c.axis == axis])
            write_csv(sweep_dir / f"sweep_{axis}.csv", header, table)
        _logger.info(f"Wrote sweep results to {sweep_path}")
        return sweep_path

    # Section: Run Index
    def runs(self, config_hash: Optional[str] = None) -> List[RunRecord]:
        """Indexed runs, optionally only those whose hash starts with ``config_hash``."""
        records = self.store.all()
        if config_hash:
            records = [r for r in records if r.config_hash.startswith(config_hash)]
        return records

    def remove_run(self, config_hash: str) -> int:
        """Drop a config's index records and delete its run directory.

        Returns the number of records removed; DataError if none were indexed.
        """
        if not _HASH_PATTERN.fullmatch(config_hash):
            raise ConfigError(f"'{config_hash}' is not a config hash (12 hex digits)")
        removed = self.store.remove(config_hash)
        if not removed:
            raise DataError(f"no runs indexed under {config_hash}")
        run_dir = self.out_root / config_hash
        if run_dir.is_dir():
            shutil.rmtree(run_dir)
        _logger.info(f"Removed {removed} record(s) and {run_dir}")
        return removed

    # Section: Export
    def export_data(self, splits: Sequence[str] = SPLITS) -> List[Path]:
        """Write each non-empty split to ``<out>/data/<split>.pnsd``."""
        written = []
        for split in splits:
            if len(split_range(self.config, split)) == 0:
                _logger.warning(f"Split '{split}' is empty, not exported")
                continue
            written.append(write_split(self.out_root / "data" / f"{split}.pnsd", load_split(self.config, split)))
        if not written:
            raise DataError(f"nothing to export: splits {list(splits)} are empty")
        return written


# Section: Safety Wrapper
def safe_run(fn: Callable[[], object]) -> int:
    """Run one command and map its outcome to a process exit code.

    Expected failures are logged at WARNING; anything else is logged with its
    traceback and yields EXIT_FAILURE.
    """
    try:
        fn()
        return EXIT_OK
    except ConfigError as exc:
        _logger.warning(f"Config error: {exc}")
        return EXIT_CONFIG
    except CheckpointError as exc:
        _logger.warning(f"Checkpoint error: {exc}")
        return EXIT_CHECKPOINT
    except DataError as exc:
        _logger.warning(f"Data error: {exc}")
        return EXIT_DATA
    except KeyboardInterrupt:
        _logger.debug("Interrupted")
        raise
    except Exception as exc:
        _logger.exception(f"Unexpected error: {exc}")
        return EXIT_FAILURE
