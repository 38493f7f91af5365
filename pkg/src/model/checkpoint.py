"""Checkpoint codec.

A checkpoint is two files: ``<name>.ckpt`` holds every parameter as
little-endian float64 values back to back, ``<name>.ckpt.json`` is the
manifest listing name, shape and byte offset of each array together with
the format version and the config hash of the run.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..autograd.tensor import Tensor
from ..core.models import CHECKPOINT_VERSION, CheckpointError
from ..infra.logging import get_logger

__all__ = ["manifest_path", "save_checkpoint", "read_checkpoint", "load_checkpoint"]

_logger = get_logger(__name__)

_DTYPE = np.dtype("<f8")


def manifest_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def save_checkpoint(
    path: Path,
    named_params: List[Tuple[str, Tensor]],
    *,
    config_hash: str,
    metadata: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write ``path`` and its manifest atomically; returns ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    chunks = []
    for name, tensor in named_params:
        raw = np.ascontiguousarray(tensor.data, dtype=_DTYPE).tobytes()
        entries.append({"name": name, "shape": list(tensor.shape), "offset": offset})
        chunks.append(raw)
        offset += len(raw)
    manifest = {
        "version": CHECKPOINT_VERSION,
        "config_hash": config_hash,
        "total_bytes": offset,
        "tensors": entries,
        "metadata": metadata or {},
    }

    tmp_data = path.with_name(path.name + ".tmp")
    tmp_data.write_bytes(b"".join(chunks))
    tmp_data.replace(path)
    meta_path = manifest_path(path)
    tmp_meta = meta_path.with_name(meta_path.name + ".tmp")
    tmp_meta.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    tmp_meta.replace(meta_path)
    _logger.debug(f"Saved checkpoint {path} ({len(entries)} arrays, {offset} bytes)")
    return path


def read_checkpoint(path: Path) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """Return (manifest, arrays by name). Raises CheckpointError when unreadable."""
    path = Path(path)
    meta_path = manifest_path(path)
    try:
        manifest = json.loads(meta_path.read_text(encoding="utf-8"))
        blob = path.read_bytes()
    except FileNotFoundError as exc:
        raise CheckpointError(f"checkpoint not found: {exc.filename}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc

    if manifest.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {manifest.get('version')!r}, expected {CHECKPOINT_VERSION!r}"
        )
    arrays: Dict[str, np.ndarray] = {}
    try:
        for entry in manifest["tensors"]:
            shape = tuple(int(n) for n in entry["shape"])
            count = int(np.prod(shape, dtype=np.int64))
            start = int(entry["offset"])
            end = start + count * _DTYPE.itemsize
            if end > len(blob):
                raise CheckpointError(f"checkpoint {path} is truncated at '{entry['name']}'")
            arrays[entry["name"]] = np.frombuffer(blob[start:end], dtype=_DTYPE).reshape(shape).astype(np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint manifest {meta_path}: {exc}") from exc
    return manifest, arrays


def load_checkpoint(
    path: Path,
    named_params: List[Tuple[str, Tensor]],
    *,
    expected_hash: Optional[str] = None,
) -> Dict[str, Any]:
    """Copy stored values into ``named_params`` in place; returns the manifest.

    Every parameter must be present with the same shape, and no extra arrays
    may be stored. With ``expected_hash`` the run's config hash must match too.
    """
    manifest, arrays = read_checkpoint(path)
    if expected_hash is not None and manifest.get("config_hash") != expected_hash:
        raise CheckpointError(
            f"checkpoint {path} was trained with config {manifest.get('config_hash')}, "
            f"not {expected_hash}"
        )
    names = {name for name, _ in named_params}
    missing = sorted(names - arrays.keys())
    unexpected = sorted(arrays.keys() - names)
    if missing or unexpected:
        raise CheckpointError(f"checkpoint {path} does not fit the model: missing {missing}, unexpected {unexpected}")
    for name, tensor in named_params:
        stored = arrays[name]
        if stored.shape != tensor.shape:
            raise CheckpointError(f"shape mismatch for '{name}': checkpoint {stored.shape}, model {tensor.shape}")
    for name, tensor in named_params:
        tensor.data[...] = arrays[name]
    _logger.debug(f"Loaded checkpoint {path}")
    return manifest
