"""Configuration storage for run settings.

Provides a text-backed store for RunConfig files in the flat
``key = value`` format (``#`` comments allowed).
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional

from ..core.models import ConfigError, RunConfig
from ..core.validation import config_hash, config_to_text, parse_config_text

__all__ = ["ConfigStore"]


class ConfigStore:
    """Reads and writes one run configuration file.

    Unlike a preference store, a run config must never be silently repaired:
    every problem is reported as a ConfigError with its line number.
    """

    def __init__(self, path: Path) -> None:
        self._path = Path(path)

    @property
    def path(self) -> Path:
        return self._path

    def load(self, *, base: Optional[RunConfig] = None) -> RunConfig:
        """Parse the file into a validated RunConfig."""
        try:
            text = self._path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {self._path}") from None
        except OSError as exc:
            raise ConfigError(f"cannot read config file {self._path}: {exc}") from exc
        try:
            return parse_config_text(text, base=base)
        except ConfigError as exc:
            raise ConfigError(f"{self._path}: {exc}") from exc

    def save(self, config: RunConfig) -> None:
        """Persist the canonical form using atomic replacement."""
        header = f"# protoneck run config, hash {config_hash(config)}\n"
        self._path.parent.mkdir(parents=True, exist_ok=True)
        tmp_path = self._path.with_suffix(self._path.suffix + ".tmp")
        tmp_path.write_text(header + config_to_text(config), encoding="utf-8")
        tmp_path.replace(self._path)
