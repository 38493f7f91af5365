"""Colors of the explanation renderers."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from matplotlib import colormaps

from ..core.models import ContractError

__all__ = ["RGB", "CATCH_ALL", "Palette", "default_palette", "activation_ramp"]

RGB = Tuple[int, int, int]

# Marks cells where prototypes outside the shown set dominate
CATCH_ALL: RGB = (0, 255, 255)


@dataclass(frozen=True)
class Palette:
    """Ordered distinct prototype colors plus the catch-all color."""
    colors: Tuple[RGB, ...]
    catch_all: RGB = CATCH_ALL

    def __post_init__(self) -> None:
        if len(set(self.colors)) != len(self.colors):
            raise ContractError("palette colors must be pairwise distinct")
        if self.catch_all in self.colors:
            raise ContractError("catch-all color must not be a palette color")

    def __len__(self) -> int:
        return len(self.colors)

    def as_array(self) -> np.ndarray:
        """``[len, 3]`` float colors in [0, 255]."""
        return np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)


def default_palette() -> Palette:
    """matplotlib's ten categorical colors."""
    colors = tuple(
        tuple(int(round(255 * channel)) for channel in rgb) for rgb in colormaps["tab10"].colors
    )
    return Palette(colors=colors)  # type: ignore[arg-type]


def activation_ramp(values: np.ndarray) -> np.ndarray:
    """Dark blue (0) to bright yellow (1) colors, ``[..., 3]`` floats in [0, 255]."""
    clipped = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return colormaps["viridis"](clipped)[..., :3] * 255.0
