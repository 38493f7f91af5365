"""Synthetic shapes dataset and its binary export."""
from .export import EXPORT_MAGIC, EXPORT_VERSION, read_split, write_split
from .shapes import (
    SPLITS,
    generate,
    load_sample,
    load_split,
    pad_to_square,
    shape_mask,
    split_range,
    stack_batch,
)

__all__ = [
    "EXPORT_MAGIC",
    "EXPORT_VERSION",
    "read_split",
    "write_split",
    "SPLITS",
    "generate",
    "load_sample",
    "load_split",
    "pad_to_square",
    "shape_mask",
    "split_range",
    "stack_batch",
]
