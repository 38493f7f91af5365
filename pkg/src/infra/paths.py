"""Centralized path management for run artifacts.

All artifacts of a run (checkpoints, loss curves, rendered maps) live under
one directory per config hash inside a single output root.
"""
from __future__ import annotations

import os
from pathlib import Path
from typing import Optional

__all__ = [
    "DATA_DIR_ENV",
    "get_data_dir",
    "get_run_dir",
    "get_explain_dir",
]

DATA_DIR_ENV = "PROTONECK_DATA_DIR"

# Default output root name (stored in project root or CWD)
_DATA_DIR_NAME = ".protoneck"


def _find_project_root() -> Path:
    """Find the project root directory.

    Looks for common project markers (pyproject.toml, .git) starting from CWD.
    Falls back to CWD if no markers are found.
    """
    cwd = Path.cwd()
    markers = ["pyproject.toml", ".git", "setup.py"]

    for path in [cwd] + list(cwd.parents)[:3]:
        for marker in markers:
            if (path / marker).exists():
                return path

    return cwd


def get_data_dir(base: Optional[Path] = None) -> Path:
    """Get the output root.

    Priority:
    1. explicit ``base`` (the ``--out`` flag)
    2. PROTONECK_DATA_DIR environment variable
    3. .protoneck/ in the project root

    The directory is created if it doesn't exist.
    """
    if base is not None:
        data_dir = Path(base)
    else:
        env_dir = os.environ.get(DATA_DIR_ENV)
        data_dir = Path(env_dir) if env_dir else _find_project_root() / _DATA_DIR_NAME
    data_dir.mkdir(parents=True, exist_ok=True)
    return data_dir


def get_run_dir(config_hash: str, base: Optional[Path] = None) -> Path:
    """Directory holding every artifact of the run with this config hash."""
    run_dir = get_data_dir(base) / config_hash
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def get_explain_dir(config_hash: str, base: Optional[Path] = None) -> Path:
    """Directory for rendered prototype/product maps."""
    explain_dir = get_run_dir(config_hash, base) / "explain"
    explain_dir.mkdir(parents=True, exist_ok=True)
    return explain_dir
