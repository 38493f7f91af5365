"""Pytest configuration and shared fixtures.

This module provides common fixtures and configuration for all tests.
The test directory is organized as follows:

    tests/
    ├── conftest.py          # Shared fixtures and configuration
    ├── unit/                # Unit tests (isolated, fast)
    │   ├── autograd/        # Tensor ops, backward, Adam, gradient checks
    │   ├── core/            # Models, config parsing, reporting, orchestrator
    │   ├── data/            # Shapes generator and binary export
    │   ├── evaluate/        # Explainability scores and mAP
    │   ├── infra/           # Logging, paths, storage, pool
    │   ├── model/           # Activations, neck, detector, checkpoints
    │   ├── store/           # Run index and CSV results
    │   ├── train/           # Matching, losses, trainer
    │   └── viz/             # Renderers
    └── integration/         # CLI and end-to-end flows
"""
import os
import sys
from pathlib import Path

# Ensure repository root is on sys.path so tests can import local packages
ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

# No log file in the working tree while testing
os.environ.setdefault("PROTONECK_LOG_FILE", "")

from dataclasses import replace

import numpy as np
import pytest

from src.core.models import NormKind, PrototypeMap, RunConfig


def pytest_addoption(parser):
    """Register CLI options to toggle long-running tests."""
    parser.addoption(
        "--slow",
        action="store_true",
        default=False,
        help="Enable trend-reproduction and toy-sanity training tests (minutes of CPU).",
    )


@pytest.fixture
def slow(request) -> bool:
    """Flag to enable long-running training tests."""
    return bool(request.config.getoption("--slow"))


@pytest.fixture(autouse=True)
def isolated_output(tmp_path: Path, monkeypatch) -> Path:
    """Keep every run artifact inside the test's tmp dir."""
    monkeypatch.setenv("PROTONECK_DATA_DIR", str(tmp_path / "out"))
    monkeypatch.setenv("PROTONECK_THREADS", "1")
    return tmp_path / "out"


@pytest.fixture
def tiny_config() -> RunConfig:
    """A config small enough to train for a couple of epochs in seconds."""
    return RunConfig(
        neck="softmax",
        prototypes=8,
        channels=8,
        backbone_channels=8,
        heads=2,
        queries=4,
        ffn_dim=16,
        encoder_layers=1,
        decoder_layers=1,
        gn_groups=2,
        image_height=32,
        image_width=32,
        patch=8,
        max_objects=2,
        train_samples=8,
        val_samples=4,
        batch_size=4,
        epochs=2,
        eval_every=1,
        render_scale=1,
        topk=3,
    )


@pytest.fixture
def tiny_sparsemax_config(tiny_config: RunConfig) -> RunConfig:
    return replace(tiny_config, neck="sparsemax")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def random_prototype_map(rng: np.random.Generator, p: int = 6, h: int = 4, w: int = 5) -> PrototypeMap:
    """Per-cell distributions over ``p`` prototypes."""
    raw = rng.random((p, h, w)) + 1e-3
    return PrototypeMap(values=raw / raw.sum(axis=0, keepdims=True), mode=NormKind.SOFTMAX)


@pytest.fixture
def prototype_map(rng: np.random.Generator) -> PrototypeMap:
    return random_prototype_map(rng)
