"""Synthetic shapes detection dataset.

Every image is a pure function of (seed, index): all random draws come from
counter-based Philox streams keyed by (seed, index, field), so samples can
be generated out of order and in parallel with identical bytes.

Classes are SHAPE_NAMES in order: circle, square, triangle, cross.
"""
from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from ..core.models import (
    ContractError,
    DataError,
    DatasetSpec,
    RunConfig,
    SceneSample,
    Target,
)
from ..infra.logging import get_logger
from ..infra.pool import ordered_map

__all__ = [
    "MIN_SCALE",
    "MAX_SCALE",
    "SPLITS",
    "sample_rng",
    "shape_mask",
    "generate",
    "pad_to_square",
    "split_range",
    "load_sample",
    "load_split",
    "stack_batch",
]

_logger = get_logger(__name__)

# Shape side length in pixels
MIN_SCALE = 12
MAX_SCALE = 24

SPLITS = ("train", "val")

_FIELD_LAYOUT = 1
_FIELD_COLOR = 2
_FIELD_NOISE = 3
_PLACEMENT_ATTEMPTS = 50


def sample_rng(seed: int, index: int, field: int) -> np.random.Generator:
    """Independent stream for one field of one sample."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index, field])))


# Section: Shape Masks
def shape_mask(label: int, size: int) -> np.ndarray:
    """Boolean ``[size, size]`` mask of a shape class filling its square."""
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64) + 0.5
    c = size / 2.0
    if label == 0:  # circle
        return (xs - c) ** 2 + (ys - c) ** 2 <= c * c
    if label == 1:  # square
        return np.ones((size, size), dtype=bool)
    if label == 2:  # triangle, apex up
        return np.abs(xs - c) <= ys / 2.0
    if label == 3:  # cross
        half = size / 6.0
        return (np.abs(xs - c) <= half) | (np.abs(ys - c) <= half)
    raise ContractError(f"unknown shape class {label}")


def _tight_box(mask: np.ndarray, top: int, left: int, height: int, width: int) -> Tuple[float, float, float, float]:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    y0, y1 = top + rows[0], top + rows[-1] + 1
    x0, x1 = left + cols[0], left + cols[-1] + 1
    return ((x0 + x1) / 2.0 / width, (y0 + y1) / 2.0 / height, (x1 - x0) / width, (y1 - y0) / height)


def _overlaps(rect: Tuple[int, int, int, int], placed: Sequence[Tuple[int, int, int, int]]) -> bool:
    top, left, bottom, right = rect
    for t, l, b, r in placed:
        # one pixel gap between shapes
        if top <= b + 1 and t <= bottom + 1 and left <= r + 1 and l <= right + 1:
            return True
    return False


# Section: Generation
def generate(seed: int, index: int, spec: DatasetSpec) -> SceneSample:
    """Render sample ``index`` of the dataset ``seed``."""
    height, width = spec.height, spec.width
    layout = sample_rng(seed, index, _FIELD_LAYOUT)
    colors = sample_rng(seed, index, _FIELD_COLOR)
    noise_rng = sample_rng(seed, index, _FIELD_NOISE)

    background = colors.uniform(0.0, 0.3)
    canvas = np.full((height, width, 3), background, dtype=np.float64)

    count = int(layout.integers(1, spec.max_objects + 1))
    max_side = min(MAX_SCALE, height, width)
    min_side = min(MIN_SCALE, max_side)
    placed: List[Tuple[int, int, int, int]] = []
    targets: List[Target] = []
    for _ in range(count):
        label = int(layout.integers(0, spec.num_classes))
        size = int(layout.integers(min_side, max_side + 1))
        color = colors.uniform(0.45, 1.0, size=3)
        for _attempt in range(_PLACEMENT_ATTEMPTS):
            top = int(layout.integers(0, height - size + 1))
            left = int(layout.integers(0, width - size + 1))
            rect = (top, left, top + size - 1, left + size - 1)
            if spec.occlusion or not _overlaps(rect, placed):
                break
        else:
            continue
        mask = shape_mask(label, size)
        region = canvas[top : top + size, left : left + size]
        region[mask] = color
        placed.append(rect)
        targets.append(Target(label=label, bbox=_tight_box(mask, top, left, height, width)))

    if spec.noise > 0:
        canvas += noise_rng.uniform(-spec.noise, spec.noise, size=canvas.shape)
    image = np.clip(canvas, 0.0, 1.0).transpose(2, 0, 1).copy()
    grid = (-(-height // spec.patch), -(-width // spec.patch))
    return SceneSample(image=image, targets=targets, pad_mask=np.zeros(grid, dtype=bool))


def pad_to_square(sample: SceneSample, size: int, patch: int) -> SceneSample:
    """Zero-pad right/bottom to ``size``×``size``.

    A feature cell is padded when it contains no pixel of the original image.
    Boxes are re-normalized to the padded frame.
    """
    _, height, width = sample.image.shape
    if size < height or size < width:
        raise ContractError(f"cannot pad a {height}x{width} image to {size}x{size}")
    if size % patch:
        raise ContractError(f"padded size {size} is not divisible by patch {patch}")
    image = np.zeros((3, size, size), dtype=np.float64)
    image[:, :height, :width] = sample.image
    cells = size // patch
    rows = np.arange(cells)[:, None] * patch >= height
    cols = np.arange(cells)[None, :] * patch >= width
    pad_mask = rows | cols
    sx, sy = width / size, height / size
    targets = [
        Target(label=t.label, bbox=(t.bbox[0] * sx, t.bbox[1] * sy, t.bbox[2] * sx, t.bbox[3] * sy))
        for t in sample.targets
    ]
    return SceneSample(image=image, targets=targets, pad_mask=pad_mask)


# Section: Splits
def split_range(config: RunConfig, split: str) -> range:
    """Global sample indices of a split; train and val never overlap."""
    if split == "train":
        return range(0, config.train_samples)
    if split == "val":
        return range(config.train_samples, config.train_samples + config.val_samples)
    raise DataError(f"unknown split '{split}'; choose from {list(SPLITS)}")


def load_sample(config: RunConfig, split: str, position: int) -> SceneSample:
    """The ``position``-th sample of ``split``, padded to the model's square frame."""
    indices = split_range(config, split)
    if not 0 <= position < len(indices):
        raise DataError(f"index {position} out of range for split '{split}' with {len(indices)} samples")
    raw = generate(config.data_seed, indices[position], config.dataset_spec())
    return pad_to_square(raw, config.image_size, config.patch)


def load_split(config: RunConfig, split: str) -> List[SceneSample]:
    """Generate a whole split in parallel; raises DataError when it is empty."""
    indices = split_range(config, split)
    if len(indices) == 0:
        raise DataError(f"split '{split}' is empty")
    spec = config.dataset_spec()
    _logger.debug(f"Generating {len(indices)} '{split}' samples (data_seed={config.data_seed})")
    return ordered_map(
        lambda i: pad_to_square(generate(config.data_seed, i, spec), config.image_size, config.patch),
        indices,
    )


def stack_batch(samples: Sequence[SceneSample]) -> Tuple[np.ndarray, np.ndarray]:
    """Stack images ``[B, 3, S, S]`` and pad masks ``[B, S/patch, S/patch]``."""
    return np.stack([s.image for s in samples]), np.stack([s.pad_mask for s in samples])
