"""Tests for the checkpoint codec."""
from __future__ import annotations

import json

import numpy as np
import pytest

from src.autograd import Tensor
from src.core.models import CHECKPOINT_VERSION, CheckpointError
from src.model.checkpoint import load_checkpoint, manifest_path, read_checkpoint, save_checkpoint


def _params(seed: int = 0):
    gen = np.random.default_rng(seed)
    return [
        ("layer.weight", Tensor(gen.normal(size=(3, 2)), requires_grad=True)),
        ("layer.bias", Tensor(gen.normal(size=(2,)), requires_grad=True)),
    ]


class TestRoundTrip:
    def test_load_restores_values_in_place(self, tmp_path) -> None:
        path = save_checkpoint(tmp_path / "run" / "final.ckpt", _params(0), config_hash="abc123abc123")
        target = _params(1)
        manifest = load_checkpoint(path, target, expected_hash="abc123abc123")
        for (_, saved), (_, loaded) in zip(_params(0), target):
            np.testing.assert_array_equal(saved.data, loaded.data)
        assert manifest["version"] == CHECKPOINT_VERSION

    def test_manifest_records_layout(self, tmp_path) -> None:
        path = save_checkpoint(tmp_path / "a.ckpt", _params(), config_hash="h", metadata={"epoch": 3})
        manifest = json.loads(manifest_path(path).read_text())
        assert manifest["total_bytes"] == (6 + 2) * 8
        assert [t["offset"] for t in manifest["tensors"]] == [0, 48]
        assert manifest["metadata"] == {"epoch": 3}
        assert path.stat().st_size == manifest["total_bytes"]

    def test_no_temporary_files_left(self, tmp_path) -> None:
        save_checkpoint(tmp_path / "a.ckpt", _params(), config_hash="h")
        assert sorted(p.name for p in tmp_path.iterdir()) == ["a.ckpt", "a.ckpt.json"]


class TestRejections:
    def test_missing_file(self, tmp_path) -> None:
        with pytest.raises(CheckpointError, match="not found"):
            read_checkpoint(tmp_path / "nope.ckpt")

    def test_unknown_version(self, tmp_path) -> None:
        path = save_checkpoint(tmp_path / "a.ckpt", _params(), config_hash="h")
        manifest = json.loads(manifest_path(path).read_text())
        manifest["version"] = "other-v9"
        manifest_path(path).write_text(json.dumps(manifest))
        with pytest.raises(CheckpointError, match="version"):
            read_checkpoint(path)

    def test_truncated_data(self, tmp_path) -> None:
        path = save_checkpoint(tmp_path / "a.ckpt", _params(), config_hash="h")
        path.write_bytes(path.read_bytes()[:40])
        with pytest.raises(CheckpointError, match="truncated"):
            read_checkpoint(path)

    def test_corrupt_manifest(self, tmp_path) -> None:
        path = save_checkpoint(tmp_path / "a.ckpt", _params(), config_hash="h")
        manifest_path(path).write_text("{not json")
        with pytest.raises(CheckpointError):
            read_checkpoint(path)

    def test_config_hash_mismatch(self, tmp_path) -> None:
        path = save_checkpoint(tmp_path / "a.ckpt", _params(), config_hash="aaaa")
        with pytest.raises(CheckpointError, match="aaaa"):
            load_checkpoint(path, _params(), expected_hash="bbbb")

    def test_shape_mismatch_leaves_model_untouched(self, tmp_path) -> None:
        path = save_checkpoint(tmp_path / "a.ckpt", _params(), config_hash="h")
        target = [
            ("layer.weight", Tensor(np.zeros((3, 2)))),
            ("layer.bias", Tensor(np.zeros((5,)))),
        ]
        with pytest.raises(CheckpointError, match="shape mismatch"):
            load_checkpoint(path, target)
        assert np.all(target[0][1].data == 0)

    def test_parameter_set_mismatch(self, tmp_path) -> None:
        path = save_checkpoint(tmp_path / "a.ckpt", _params(), config_hash="h")
        with pytest.raises(CheckpointError, match="missing"):
            load_checkpoint(path, _params() + [("extra", Tensor(np.zeros(1)))])
