"""Single-prototype, multi-prototype and product map renderers.

Every renderer is a pure function of its inputs: maps live on the feature
grid and are upsampled with nearest-neighbour repetition onto the
grayscale input image, then alpha-blended.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo
from scipy.ndimage import gaussian_filter

from ..core.models import SHAPE_NAMES, AttentionMap, ContractError, PrototypeAssignment, PrototypeMap
from ..infra.logging import get_logger
from .glyphs import GLYPH_HEIGHT, draw_text, text_width
from .palette import Palette, activation_ramp

__all__ = [
    "IMAGE_FORMATS",
    "PrototypeColors",
    "to_grayscale",
    "upsample_cells",
    "blur_attention",
    "product_intensity",
    "prototype_colors",
    "render_single",
    "render_multi",
    "render_product",
    "write_image",
]

_logger = get_logger(__name__)

IMAGE_FORMATS = {"ppm": "PPM", "png": "PNG"}

_SWATCH = 7
_LEGEND_PAD = 4
_ROW_HEIGHT = GLYPH_HEIGHT + 3
_WHITE = 255


# Section: Pixels
def to_grayscale(image: np.ndarray) -> np.ndarray:
    """``[3, H, W]`` image in [0, 1] → ``[H, W]`` luminance in [0, 255]."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ContractError(f"expected a [3, H, W] image, got shape {image.shape}")
    luminance = 0.299 * image[0] + 0.587 * image[1] + 0.114 * image[2]
    return np.clip(luminance, 0.0, 1.0) * 255.0


def upsample_cells(values: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    """Nearest-neighbour upsampling of a grid field (leading two axes) to ``shape``."""
    grid_h, grid_w = values.shape[:2]
    height, width = shape
    if height % grid_h or width % grid_w:
        raise ContractError(f"image {shape} is not a whole multiple of grid {(grid_h, grid_w)}")
    return np.repeat(np.repeat(values, height // grid_h, axis=0), width // grid_w, axis=1)


def _blend(gray: np.ndarray, colors: np.ndarray, strength: np.ndarray, alpha: float) -> np.ndarray:
    weight = (alpha * np.clip(strength, 0.0, 1.0))[..., None]
    mixed = gray[..., None] * (1.0 - weight) + colors * weight
    return np.clip(np.round(mixed), 0, 255).astype(np.uint8)


def _scale(rgb: np.ndarray, scale: int) -> np.ndarray:
    if scale < 1:
        raise ContractError("render scale must be at least 1")
    return rgb if scale == 1 else np.repeat(np.repeat(rgb, scale, axis=0), scale, axis=1)


def _check_grid(m_p: PrototypeMap, image: np.ndarray) -> Tuple[int, int]:
    shape = tuple(np.asarray(image).shape[1:3])
    upsample_cells(m_p.values[0], shape)  # validates divisibility
    return shape  # type: ignore[return-value]


# Section: Color Assignment
@dataclass
class PrototypeColors:
    """Per-cell palette mixture.

    ``weights`` is ``[k + 1, H, W]``: one slice per shown prototype followed
    by the catch-all residual. Every cell's weights are non-negative and sum
    to 1; cells without any intensity are pure catch-all.
    """
    shown: Tuple[int, ...]
    weights: np.ndarray
    colors: np.ndarray  # [H, W, 3] floats in [0, 255]
    cell_mass: np.ndarray  # [H, W] summed intensity


def prototype_colors(intensity: np.ndarray, top_k: int, palette: Palette) -> PrototypeColors:
    """Color cells by the ``top_k`` prototypes with the largest total intensity."""
    intensity = np.asarray(intensity, dtype=np.float64)
    if top_k > len(palette):
        raise ContractError(f"top_k {top_k} exceeds the palette size {len(palette)}")
    if top_k < 1:
        raise ContractError("top_k must be at least 1")
    k = min(top_k, intensity.shape[0])
    ranking = np.argsort(-intensity.sum(axis=(1, 2)), kind="stable")
    shown = ranking[:k]
    hidden = ranking[k:]

    cell_mass = intensity.sum(axis=0)
    active = cell_mass > 0
    safe_mass = np.where(active, cell_mass, 1.0)
    top = np.where(active, intensity[shown] / safe_mass, 0.0)
    residual = np.where(active, intensity[hidden].sum(axis=0) / safe_mass, 1.0)
    weights = np.concatenate([top, residual[None]], axis=0)

    colors = np.tensordot(top, palette.as_array()[:k], axes=(0, 0))
    colors += residual[..., None] * np.asarray(palette.catch_all, dtype=np.float64)
    return PrototypeColors(
        shown=tuple(int(p) for p in shown),
        weights=weights,
        colors=colors,
        cell_mass=cell_mass,
    )


# Section: Attention
def blur_attention(values: np.ndarray, sigma: float) -> np.ndarray:
    """Isotropic Gaussian blur (σ in cells), renormalized to sum 1."""
    values = np.asarray(values, dtype=np.float64)
    blurred = gaussian_filter(values, sigma=sigma, mode="constant") if sigma > 0 else values.copy()
    total = blurred.sum()
    if total <= 0:
        raise ContractError("attention map has no mass to blur")
    return blurred / total


def product_intensity(attention: AttentionMap, m_p: PrototypeMap, blur_sigma: float) -> np.ndarray:
    """``[P, H, W]`` product of blurred attention and prototype activations."""
    if attention.values.shape != m_p.grid:
        raise ContractError(f"attention grid {attention.values.shape} does not match prototype grid {m_p.grid}")
    return blur_attention(attention.values, blur_sigma)[None] * m_p.values


# Section: Legend
def _legend_labels(shown: Sequence[int], assignment: Optional[PrototypeAssignment]) -> List[str]:
    labels = []
    for p in shown:
        if assignment is None:
            labels.append(f"P{p}")
        else:
            labels.append(f"P{p} {SHAPE_NAMES[assignment.class_of[p]]}")
    return labels + ["OTHER"]


def _attach_legend(rgb: np.ndarray, colors: Sequence[Tuple[int, int, int]], labels: Sequence[str]) -> np.ndarray:
    height, width = rgb.shape[:2]
    legend_w = _LEGEND_PAD + _SWATCH + 3 + max(text_width(label) for label in labels) + _LEGEND_PAD
    legend_h = _LEGEND_PAD + len(labels) * _ROW_HEIGHT + _LEGEND_PAD
    canvas = np.full((max(height, legend_h), width + legend_w, 3), _WHITE, dtype=np.uint8)
    canvas[:height, :width] = rgb
    for row, (color, label) in enumerate(zip(colors, labels)):
        top = _LEGEND_PAD + row * _ROW_HEIGHT
        left = width + _LEGEND_PAD
        canvas[top : top + _SWATCH, left : left + _SWATCH] = color
        draw_text(canvas, label, top, left + _SWATCH + 3)
    return canvas


def _render_mixture(
    mixture: PrototypeColors,
    strength: np.ndarray,
    image: np.ndarray,
    palette: Palette,
    assignment: Optional[PrototypeAssignment],
    alpha: float,
    scale: int,
) -> np.ndarray:
    gray = to_grayscale(image)
    shape = gray.shape
    overlay = _blend(gray, upsample_cells(mixture.colors, shape), upsample_cells(strength, shape), alpha)
    overlay = _scale(overlay, scale)
    legend_colors = [palette.colors[i] for i in range(len(mixture.shown))] + [palette.catch_all]
    return _attach_legend(overlay, legend_colors, _legend_labels(mixture.shown, assignment))


# Section: Renderers
def render_single(
    m_p: PrototypeMap,
    prototype: int,
    image: np.ndarray,
    *,
    alpha: float = 0.65,
    scale: int = 1,
) -> np.ndarray:
    """Overlay of one prototype's activation; 1.0 renders as bright yellow at full alpha."""
    if not 0 <= prototype < m_p.num_prototypes:
        raise ContractError(f"prototype {prototype} out of range for {m_p.num_prototypes} prototypes")
    _check_grid(m_p, image)
    gray = to_grayscale(image)
    activation = upsample_cells(np.clip(m_p.values[prototype], 0.0, 1.0), gray.shape)
    return _scale(_blend(gray, activation_ramp(activation), activation, alpha), scale)


def render_multi(
    m_p: PrototypeMap,
    top_k: int,
    palette: Palette,
    image: np.ndarray,
    *,
    assignment: Optional[PrototypeAssignment] = None,
    alpha: float = 0.65,
    scale: int = 1,
) -> np.ndarray:
    """Top-k prototypes in palette colors, the rest in the catch-all color, plus a legend."""
    _check_grid(m_p, image)
    mixture = prototype_colors(m_p.values, top_k, palette)
    strength = np.clip(mixture.cell_mass, 0.0, 1.0)
    return _render_mixture(mixture, strength, image, palette, assignment, alpha, scale)


def render_product(
    attention: AttentionMap,
    m_p: PrototypeMap,
    palette: Palette,
    image: np.ndarray,
    *,
    blur_sigma: float = 1.5,
    top_k: int = 5,
    assignment: Optional[PrototypeAssignment] = None,
    alpha: float = 0.65,
    scale: int = 1,
) -> np.ndarray:
    """Multi-prototype overlay weighted by one detection's blurred attention.

    Colors go to the prototypes with the most attended mass; overlay
    strength follows the product intensity relative to its maximum.
    """
    _check_grid(m_p, image)
    intensity = product_intensity(attention, m_p, blur_sigma)
    mixture = prototype_colors(intensity, top_k, palette)
    peak = mixture.cell_mass.max()
    strength = mixture.cell_mass / peak if peak > 0 else np.zeros_like(mixture.cell_mass)
    return _render_mixture(mixture, strength, image, palette, assignment, alpha, scale)


# Section: Output
def write_image(path: Path, rgb: np.ndarray, fmt: str = "ppm", metadata: Optional[Dict[str, str]] = None) -> Path:
    """Encode ``[H, W, 3]`` uint8 pixels as binary PPM (P6) or PNG.

    ``metadata`` becomes PNG text chunks; PPM has no place for it, so callers
    keep it in a sidecar.
    """
    try:
        pil_format = IMAGE_FORMATS[fmt]
    except KeyError:
        raise ContractError(f"unknown image format '{fmt}'; choose from {sorted(IMAGE_FORMATS)}") from None
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = path.with_name(path.name + ".tmp")
    options = {}
    if metadata and pil_format == "PNG":
        info = PngInfo()
        for key, value in metadata.items():
            info.add_text(key, value)
        options["pnginfo"] = info
    Image.fromarray(np.ascontiguousarray(rgb, dtype=np.uint8), mode="RGB").save(temp_path, format=pil_format, **options)
    temp_path.replace(path)
    _logger.debug(f"Wrote {path}")
    return path
