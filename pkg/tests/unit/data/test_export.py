"""Tests for the binary split export."""
from __future__ import annotations

import numpy as np
import pytest

from src.core.models import DataError
from src.data.export import EXPORT_MAGIC, read_split, write_split
from src.data.shapes import load_split


def test_written_split_reads_back(tiny_config, tmp_path) -> None:
    samples = load_split(tiny_config, "val")
    path = write_split(tmp_path / "val.pnsd", samples)
    loaded = read_split(path)
    assert len(loaded) == len(samples)
    for original, restored in zip(samples, loaded):
        np.testing.assert_allclose(restored.image, original.image, atol=1e-7)
        assert [t.label for t in restored.targets] == [t.label for t in original.targets]
        for a, b in zip(restored.targets, original.targets):
            assert a.bbox == pytest.approx(b.bbox, abs=1e-7)


def test_header_layout(tiny_config, tmp_path) -> None:
    samples = load_split(tiny_config, "val")[:1]
    blob = write_split(tmp_path / "one.pnsd", samples).read_bytes()
    assert blob[:4] == EXPORT_MAGIC
    assert np.frombuffer(blob[4:12], dtype="<u4").tolist() == [1, 1]
    assert np.frombuffer(blob[12:24], dtype="<u4").tolist() == [3, 32, 32]
    n_targets = len(samples[0].targets)
    assert len(blob) == 24 + 3 * 32 * 32 * 4 + 4 + n_targets * 20


def test_bad_magic(tmp_path) -> None:
    path = tmp_path / "bad.pnsd"
    path.write_bytes(b"NOPE" + bytes(8))
    with pytest.raises(DataError, match="magic"):
        read_split(path)


def test_truncated(tiny_config, tmp_path) -> None:
    path = write_split(tmp_path / "val.pnsd", load_split(tiny_config, "val"))
    path.write_bytes(path.read_bytes()[:100])
    with pytest.raises(DataError, match="truncated"):
        read_split(path)
