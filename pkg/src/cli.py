"""Command-line entry point: ``protoneck <command> [flags]``.

Commands:
    train        train one config, write checkpoints and the loss curve
    eval         score a checkpoint (or several seeds) on a split
    explain      render prototype / product maps of one image
    sweep        train and evaluate a variant matrix across seeds
    export-data  write the generated splits in the PNSD binary layout
    runs         list indexed runs, or remove one with its artifacts

Exit codes: 0 success, 1 unexpected failure, 2 config error, 3 checkpoint
error, 4 data error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .core.models import ConfigError, NormKind, RunConfig
from .core.orchestrator import EXPLAIN_MODES, ExperimentOrchestrator, parse_matrix_text, safe_run
from .core.validation import apply_overrides, apply_preset, config_hash
from .data.shapes import SPLITS
from .infra import ConfigStore, get_logger
from .viz.render import IMAGE_FORMATS

__all__ = ["build_parser", "load_config", "main"]

_logger = get_logger(__name__)


def _int_list(raw: str) -> List[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{raw}'") from None


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", "-c", type=Path, help="Run config file (key = value lines)")
    parser.add_argument("--preset", help="Named variant applied on top of the config")
    parser.add_argument("--seed", type=int, help="Override the run seed")
    parser.add_argument("--out", "-o", type=Path, help="Output root (default: $PROTONECK_DATA_DIR or .protoneck/)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="protoneck",
        description="Prototype-neck detection transformer on synthetic shapes",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  protoneck train --config base.cfg
  protoneck eval --config base.cfg --seeds 0,1,2
  protoneck explain --config base.cfg --index 3 --mode product
  protoneck sweep --config base.cfg --matrix align.matrix
  protoneck runs --hash 3f2a
        """,
    )
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="Train one config")
    _add_common(train)

    evaluate = commands.add_parser("eval", help="Evaluate a checkpoint on a split")
    _add_common(evaluate)
    evaluate.add_argument("--checkpoint", type=Path, help="Checkpoint (default: the run's best.ckpt)")
    evaluate.add_argument("--split", default="val", help=f"One of {list(SPLITS)}")
    evaluate.add_argument("--seeds", type=_int_list, help="Evaluate each seed's run and aggregate, e.g. 0,1,2")
    evaluate.add_argument("--norm", choices=[k.value for k in NormKind], help="Evaluate with this neck normalization")

    explain = commands.add_parser("explain", help="Render explanation maps of one image")
    _add_common(explain)
    explain.add_argument("--checkpoint", type=Path, help="Checkpoint (default: the run's best.ckpt)")
    explain.add_argument("--split", default="val", help=f"One of {list(SPLITS)}")
    explain.add_argument("--index", type=int, default=0, help="Image index within the split")
    explain.add_argument("--mode", choices=EXPLAIN_MODES, default="multi")
    explain.add_argument("--topk", type=int, help="Prototypes shown in palette colors")
    explain.add_argument("--prototype", type=_int_list, help="Prototype(s) for --mode single")
    explain.add_argument("--query", type=_int_list, help="Query (queries) for --mode product; default: matched ones")
    explain.add_argument("--format", dest="fmt", choices=sorted(IMAGE_FORMATS), default="ppm")

    sweep = commands.add_parser("sweep", help="Train and evaluate a variant matrix")
    _add_common(sweep)
    sweep.add_argument("--matrix", type=Path, required=True, help="Matrix file (seeds / axis.<name> lines)")
    sweep.add_argument("--workers", type=int, default=1, help="Cells trained in parallel processes")

    export = commands.add_parser("export-data", help="Write generated splits to binary files")
    _add_common(export)
    export.add_argument("--split", action="append", choices=SPLITS, help="Split to export (repeatable; default: all)")

    runs = commands.add_parser("runs", help="List indexed runs or remove one")
    _add_common(runs)
    runs.add_argument("--hash", dest="run_hash", help="Only runs whose config hash starts with this")
    runs.add_argument("--remove", metavar="HASH", help="Drop this config's records and delete its run directory")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """Config file, then preset, then command-line overrides."""
    config = ConfigStore(args.config).load() if args.config is not None else RunConfig()
    if args.preset:
        config = apply_preset(config, args.preset)
    return apply_overrides(config, seed=args.seed)


def _run(args: argparse.Namespace) -> None:
    config = load_config(args)
    orchestrator = ExperimentOrchestrator(config, out_dir=args.out)
    _logger.info(f"{args.command}: config {config_hash(config)} -> {orchestrator.out_root}")

    if args.command == "train":
        result = orchestrator.train()
        print(f"final_loss={result.final_loss.total:.6f} checkpoint={result.final_checkpoint}")
    elif args.command == "eval":
        for report in orchestrator.evaluate(
            checkpoint=args.checkpoint, split=args.split, seeds=args.seeds, norm=args.norm
        ):
            scores = " ".join(f"{k}={'n/a' if v is None else f'{v:.6f}'}" for k, v in report.scores().items())
            print(f"seed={report.seed} {scores}")
            if report.loss is not None:
                terms = " ".join(f"loss_{k}={v:.6f}" for k, v in report.loss.as_row().items())
                print(f"seed={report.seed} {terms}")
        print(f"metrics={orchestrator.store.metrics_path}")
    elif args.command == "explain":
        for path in orchestrator.explain(
            checkpoint=args.checkpoint,
            split=args.split,
            index=args.index,
            mode=args.mode,
            topk=args.topk,
            prototypes=args.prototype,
            queries=args.query,
            fmt=args.fmt,
        ):
            print(path)
    elif args.command == "sweep":
        try:
            text = Path(args.matrix).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read matrix file {args.matrix}: {exc}") from exc
        print(orchestrator.sweep(parse_matrix_text(text), workers=args.workers))
    elif args.command == "export-data":
        for path in orchestrator.export_data(args.split or SPLITS):
            print(path)
    elif args.command == "runs":
        if args.remove:
            removed = orchestrator.remove_run(args.remove)
            print(f"removed={removed} hash={args.remove}")
            return
        for record in orchestrator.runs(args.run_hash):
            score = (record.metrics or {}).get("map_50_95", "")
            line = f"{record.config_hash} {record.command} split={record.split or '-'} seed={record.seed} neck={record.neck}"
            print(f"{line} map_50_95={score}" if score else line)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return safe_run(lambda: _run(args))


if __name__ == "__main__":
    sys.exit(main())
