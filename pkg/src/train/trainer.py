"""Training loop: shuffled mini-batches, scheduled quantization, checkpoints.

One run is fully determined by its config (and seed): parameter init,
shuffling and the per-image Argmax draws all come from seeded generators,
and the worker pool only ever reduces in input order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..autograd import Adam, Tape, backward
from ..core.models import (
    LossReport,
    MetricsReport,
    NeckNormMode,
    PrototypeAssignment,
    RunConfig,
    SceneSample,
)
from ..data.shapes import load_split, stack_batch
from ..evaluate.evaluator import evaluate_model
from ..infra.logging import get_run_logger
from ..model.checkpoint import save_checkpoint
from ..model.neck import pick_norm_mode_for_image
from ..model.network import ProtoDetector
from ..store.run_store import write_loss_csv
from .losses import assignment_for_config, total_loss

__all__ = [
    "FINAL_CHECKPOINT",
    "BEST_CHECKPOINT",
    "LOSS_CSV",
    "TrainResult",
    "Trainer",
    "training_progress",
    "learning_rate",
]

FINAL_CHECKPOINT = "final.ckpt"
BEST_CHECKPOINT = "best.ckpt"
LOSS_CSV = "loss.csv"

# Stream ids of the run seed's generators
_SHUFFLE_STREAM = 1
_MODE_STREAM = 2
_LR_DROP_FACTOR = 0.1


def training_progress(epoch: int, epochs: int) -> float:
    """Schedule position in [0, 1]: 0 at the first epoch, 1 at the last."""
    return epoch / max(epochs - 1, 1)


def learning_rate(config: RunConfig, epoch: int) -> float:
    """Step schedule: ``lr`` until epoch round(lr_drop * epochs), then a tenth of it."""
    drop_epoch = int(round(config.lr_drop * config.epochs))
    return config.lr * _LR_DROP_FACTOR if epoch >= drop_epoch else config.lr


@dataclass
class TrainResult:
    """What one training run produced."""
    config_hash: str
    history: List[Tuple[int, LossReport]]
    final_checkpoint: Path
    best_checkpoint: Path
    loss_csv: Path
    best_epoch: int = -1
    best_map: Optional[float] = None
    evaluations: List[Tuple[int, MetricsReport]] = field(default_factory=list)

    @property
    def final_loss(self) -> LossReport:
        return self.history[-1][1]


def _mean_report(reports: Sequence[LossReport]) -> LossReport:
    return LossReport(
        ce=float(np.mean([r.ce for r in reports])),
        l1=float(np.mean([r.l1 for r in reports])),
        giou=float(np.mean([r.giou for r in reports])),
        align=float(np.mean([r.align for r in reports])),
        total=float(np.mean([r.total for r in reports])),
        no_detections=any(r.no_detections for r in reports),
    )


class Trainer:
    """Trains one ProtoDetector and writes its artifacts into ``run_dir``.

    Example:
        >>> trainer = Trainer(config, run_dir=Path(".protoneck/3f2a9c1d0e4b"), config_hash="3f2a9c1d0e4b")
        >>> result = trainer.train()
    """

    def __init__(
        self,
        config: RunConfig,
        *,
        run_dir: Path,
        config_hash: str,
        train_samples: Optional[List[SceneSample]] = None,
        val_samples: Optional[List[SceneSample]] = None,
    ) -> None:
        self.config = config
        self.run_dir = Path(run_dir)
        self.config_hash = config_hash
        self._train_samples = train_samples
        self._val_samples = val_samples
        self._logger = get_run_logger(__name__, config_hash)
        self.model = ProtoDetector.from_config(config)
        self.assignment: Optional[PrototypeAssignment] = assignment_for_config(config)
        self.optimizer = Adam(self.model.named_parameters(), lr=config.lr, grad_clip=config.grad_clip)
        self._shuffle_rng = np.random.default_rng([config.seed, _SHUFFLE_STREAM])
        self._mode_rng = np.random.default_rng([config.seed, _MODE_STREAM])

    # Section: Data
    def _train_split(self) -> List[SceneSample]:
        if self._train_samples is None:
            self._train_samples = load_split(self.config, "train")
        return self._train_samples

    def _val_split(self) -> List[SceneSample]:
        if self._val_samples is None:
            self._val_samples = load_split(self.config, "val") if self.config.val_samples > 0 else []
        return self._val_samples

    def _draw_modes(self, count: int, progress: float) -> List[NeckNormMode]:
        configured = self.config.norm_mode
        if not self.config.has_neck:
            return [configured] * count
        schedule = (self.config.argmax_start, self.config.argmax_end)
        return [pick_norm_mode_for_image(progress, configured, schedule, self._mode_rng) for _ in range(count)]

    # Section: Steps
    def train_step(self, batch: Sequence[SceneSample], progress: float) -> LossReport:
        """One forward/backward/update on a mini-batch."""
        images, pad_masks = stack_batch(batch)
        modes = self._draw_modes(len(batch), progress)
        with Tape():
            output = self.model(images, modes, pad_masks)
            loss = total_loss(
                output.detector.class_logits,
                output.detector.boxes,
                output.m_p,
                [s.targets for s in batch],
                pad_masks,
                self.config,
                self.assignment,
                progress,
            )
        self.optimizer.zero_grad()
        backward(loss.total)
        grad_norm = self.optimizer.step()
        self._logger.debug(
            f"step total={loss.report.total:.5f} grad_norm={grad_norm:.4f} "
            f"argmax_images={sum(m.is_argmax for m in modes)}"
        )
        return loss.report

    def train_epoch(self, epoch: int) -> LossReport:
        samples = self._train_split()
        progress = training_progress(epoch, self.config.epochs)
        lr = learning_rate(self.config, epoch)
        if lr != self.optimizer.lr:
            self._logger.info(f"Learning rate {self.optimizer.lr:g} -> {lr:g} at epoch {epoch + 1}")
            self.optimizer.lr = lr
        order = self._shuffle_rng.permutation(len(samples))
        reports = []
        for start in range(0, len(samples), self.config.batch_size):
            batch = [samples[i] for i in order[start : start + self.config.batch_size]]
            reports.append(self.train_step(batch, progress))
        return _mean_report(reports)

    def evaluate(self, split: str = "val") -> MetricsReport:
        samples = self._val_split() if split == "val" else self._train_split()
        return evaluate_model(
            self.model,
            samples,
            self.config,
            self.assignment,
            split=split,
            config_hash=self.config_hash,
        )

    def _save(self, name: str, epoch: int) -> Path:
        return save_checkpoint(
            self.run_dir / name,
            self.model.named_parameters(),
            config_hash=self.config_hash,
            metadata={"epoch": epoch, "seed": self.config.seed, "neck": self.config.neck},
        )

    # Section: Run
    def train(self) -> TrainResult:
        """Run every epoch; returns the loss history and checkpoint paths.

        The loss CSV is rewritten after each epoch. ``best.ckpt`` tracks the
        highest validation mAP@0.50:0.95 seen at evaluation epochs, or the
        final weights when the run has no validation split.
        """
        config = self.config
        self.run_dir.mkdir(parents=True, exist_ok=True)
        loss_csv = self.run_dir / LOSS_CSV
        result = TrainResult(
            config_hash=self.config_hash,
            history=[],
            final_checkpoint=self.run_dir / FINAL_CHECKPOINT,
            best_checkpoint=self.run_dir / BEST_CHECKPOINT,
            loss_csv=loss_csv,
        )
        self._logger.info(
            f"Training neck={config.neck} P={config.prototypes} epochs={config.epochs} "
            f"on {len(self._train_split())} images ({self.model.parameter_count()} parameters)"
        )
        has_val = len(self._val_split()) > 0
        if not has_val:
            self._logger.warning("No validation samples; best checkpoint will be the final weights")

        for epoch in range(config.epochs):
            report = self.train_epoch(epoch)
            result.history.append((epoch, report))
            write_loss_csv(loss_csv, result.history, self.config_hash)
            self._logger.info(
                f"epoch {epoch + 1}/{config.epochs} ce={report.ce:.4f} l1={report.l1:.4f} "
                f"giou={report.giou:.4f} align={report.align:.4f} total={report.total:.4f}"
            )

            last = epoch == config.epochs - 1
            if has_val and ((epoch + 1) % config.eval_every == 0 or last):
                metrics = self.evaluate("val")
                result.evaluations.append((epoch, metrics))
                if result.best_map is None or metrics.map_50_95 > result.best_map:
                    result.best_map = metrics.map_50_95
                    result.best_epoch = epoch
                    self._save(BEST_CHECKPOINT, epoch)
                    self._logger.info(f"New best checkpoint at epoch {epoch + 1}: mAP={metrics.map_50_95:.4f}")

        last_epoch = config.epochs - 1
        self._save(FINAL_CHECKPOINT, last_epoch)
        if not has_val:
            result.best_epoch = last_epoch
            self._save(BEST_CHECKPOINT, last_epoch)
        self._logger.info(f"Training finished: final total loss {result.final_loss.total:.5f}")
        return result
