"""Run index and CSV result persistence for protoneck.

Modules:
    run_store: Run index keyed by config hash, metrics.csv and loss curves

Example:
    from src.store import RunStore

    store = RunStore(base_path=Path(".protoneck"))
    store.record_metrics(report, neck="softmax")
"""
from .run_store import (
    LOSS_COLUMNS,
    RunRecord,
    RunStore,
    read_csv,
    write_csv,
    write_loss_csv,
)

__all__ = [
    "LOSS_COLUMNS",
    "RunRecord",
    "RunStore",
    "read_csv",
    "write_csv",
    "write_loss_csv",
]
