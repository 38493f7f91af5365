"""Explanation map rendering for protoneck.

Modules:
    palette: Categorical palette, catch-all color and the activation ramp
    glyphs: 5×7 bitmap font for legends
    render: Single-prototype, multi-prototype and product maps, image output

Example:
    from src.viz import default_palette, render_multi, write_image

    rgb = render_multi(m_p, 5, default_palette(), sample.image)
    write_image(Path("val_0_multi.ppm"), rgb)
"""
from .palette import CATCH_ALL, Palette, activation_ramp, default_palette
from .glyphs import draw_text, glyph, text_width
from .render import (
    IMAGE_FORMATS,
    PrototypeColors,
    blur_attention,
    product_intensity,
    prototype_colors,
    render_multi,
    render_product,
    render_single,
    to_grayscale,
    upsample_cells,
    write_image,
)

__all__ = [
    # Palette
    "CATCH_ALL",
    "Palette",
    "activation_ramp",
    "default_palette",
    # Glyphs
    "draw_text",
    "glyph",
    "text_width",
    # Rendering
    "IMAGE_FORMATS",
    "PrototypeColors",
    "blur_attention",
    "product_intensity",
    "prototype_colors",
    "render_multi",
    "render_product",
    "render_single",
    "to_grayscale",
    "upsample_cells",
    "write_image",
]
