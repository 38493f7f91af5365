"""Binary export of generated splits.

Layout (all little-endian)::

    b"PNSD"  u32 version (1)  u32 record count
    per record:
        u32 C, u32 H, u32 W
        f32 pixels[C*H*W]            row-major, channel first
        u32 target count
        per target: u32 class, f32 cx, f32 cy, f32 w, f32 h
"""
from __future__ import annotations

from pathlib import Path
from typing import BinaryIO, List, Sequence

import numpy as np

from ..core.models import DataError, SceneSample, Target
from ..infra.logging import get_logger

__all__ = ["EXPORT_MAGIC", "EXPORT_VERSION", "write_split", "read_split"]

_logger = get_logger(__name__)

EXPORT_MAGIC = b"PNSD"
EXPORT_VERSION = 1

_U32 = np.dtype("<u4")
_F32 = np.dtype("<f4")


def _u32(*values: int) -> bytes:
    return np.asarray(values, dtype=_U32).tobytes()


def _write_record(handle: BinaryIO, sample: SceneSample) -> None:
    c, h, w = sample.image.shape
    handle.write(_u32(c, h, w))
    handle.write(np.ascontiguousarray(sample.image, dtype=_F32).tobytes())
    handle.write(_u32(len(sample.targets)))
    for target in sample.targets:
        handle.write(_u32(target.label))
        handle.write(np.asarray(target.bbox, dtype=_F32).tobytes())


def write_split(path: Path, samples: Sequence[SceneSample]) -> Path:
    """Write one split file atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + ".tmp")
    with tmp_path.open("wb") as handle:
        handle.write(EXPORT_MAGIC)
        handle.write(_u32(EXPORT_VERSION, len(samples)))
        for sample in samples:
            _write_record(handle, sample)
    tmp_path.replace(path)
    _logger.info(f"Exported {len(samples)} samples to {path}")
    return path


class _Reader:
    def __init__(self, blob: bytes, path: Path) -> None:
        self._blob = blob
        self._pos = 0
        self._path = path

    def take(self, dtype: np.dtype, count: int) -> np.ndarray:
        end = self._pos + dtype.itemsize * count
        if end > len(self._blob):
            raise DataError(f"{self._path} is truncated at byte {self._pos}")
        values = np.frombuffer(self._blob, dtype=dtype, count=count, offset=self._pos)
        self._pos = end
        return values


def read_split(path: Path) -> List[SceneSample]:
    """Parse a split file; pad masks are not stored and come back all False."""
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != EXPORT_MAGIC:
        raise DataError(f"{path} is not a protoneck export (bad magic)")
    reader = _Reader(blob[4:], path)
    version, count = (int(v) for v in reader.take(_U32, 2))
    if version != EXPORT_VERSION:
        raise DataError(f"{path} has unsupported export version {version}")
    samples = []
    for _ in range(count):
        c, h, w = (int(v) for v in reader.take(_U32, 3))
        image = reader.take(_F32, c * h * w).astype(np.float64).reshape(c, h, w)
        n_targets = int(reader.take(_U32, 1)[0])
        targets = []
        for _ in range(n_targets):
            label = int(reader.take(_U32, 1)[0])
            box = tuple(float(v) for v in reader.take(_F32, 4))
            targets.append(Target(label=label, bbox=box))
        samples.append(SceneSample(image=image, targets=targets, pad_mask=np.zeros((0, 0), dtype=bool)))
    return samples
