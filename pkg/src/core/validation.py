"""Validation helpers for run configurations.

Parses the flat ``key = value`` config format into a RunConfig, applies the
named variant presets and computes the config hash embedded in every
artifact. Kept side-effect free so it can be unit tested in isolation.
"""
from __future__ import annotations

import hashlib
from dataclasses import fields, replace
from typing import Callable, Dict, List, Mapping, Optional, Tuple

from .models import (
    NECK_ARGMAX,
    NECK_NONE,
    NECK_SPARSEMAX,
    SHAPE_NAMES,
    VALID_NECKS,
    ConfigError,
    RunConfig,
)

__all__ = [
    "CONFIG_KEYS",
    "PRESETS",
    "parse_config_text",
    "config_to_text",
    "config_hash",
    "validate_config",
    "apply_preset",
    "apply_overrides",
    "parse_float_list",
]

# Keys that do not change what a run computes
_UNHASHED_KEYS = {"output_dir"}


# Section: Value Parsers
def _parse_int(raw: str) -> int:
    return int(raw)


def _parse_float(raw: str) -> float:
    return float(raw)


def _parse_bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got '{raw}'")


def _parse_str(raw: str) -> str:
    return raw


def parse_float_list(raw: str) -> List[float]:
    """Parse ``"1.2, 0.7"`` style lists."""
    parts = [p.strip() for p in raw.split(",")]
    if not parts or any(not p for p in parts):
        raise ValueError(f"expected comma-separated numbers, got '{raw}'")
    return [float(p) for p in parts]


def _parse_extra(raw: str) -> Tuple[Tuple[int, int], ...]:
    """Parse ``"0:2, 3:1"`` into ((0, 2), (3, 1))."""
    if not raw.strip():
        return ()
    pairs = []
    for part in raw.split(","):
        label, sep, extra = part.strip().partition(":")
        if not sep:
            raise ValueError(f"expected class:extra pairs, got '{part.strip()}'")
        pairs.append((int(label), int(extra)))
    return tuple(pairs)


def _format_extra(value: Tuple[Tuple[int, int], ...]) -> str:
    return ", ".join(f"{label}:{extra}" for label, extra in value)


# Section: Key Table
# key -> (setter producing field updates, getter producing canonical text)
_Setter = Callable[[str], Dict[str, object]]
_Getter = Callable[[RunConfig], str]


def _simple(name: str, parser: Callable[[str], object]) -> Tuple[_Setter, _Getter]:
    return (lambda raw: {name: parser(raw)}), (lambda cfg: _fmt(getattr(cfg, name)))


def _fmt(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _set_align(raw: str) -> Dict[str, object]:
    values = parse_float_list(raw)
    if len(values) == 1:
        return {"align_coef_start": values[0], "align_coef_end": values[0]}
    if len(values) == 2:
        return {"align_coef_start": values[0], "align_coef_end": values[1]}
    raise ValueError("align_coef takes a constant or a 'start, end' schedule")


def _get_align(cfg: RunConfig) -> str:
    if cfg.align_coef_start == cfg.align_coef_end:
        return _fmt(cfg.align_coef_start)
    return f"{_fmt(cfg.align_coef_start)}, {_fmt(cfg.align_coef_end)}"


def _set_argmax(raw: str) -> Dict[str, object]:
    values = parse_float_list(raw)
    if len(values) != 2:
        raise ValueError("argmax_schedule takes 'start%, end%'")
    return {"argmax_start": values[0], "argmax_end": values[1]}


def _build_key_table() -> Dict[str, Tuple[_Setter, _Getter]]:
    table: Dict[str, Tuple[_Setter, _Getter]] = {}
    parsers = {int: _parse_int, float: _parse_float, bool: _parse_bool, str: _parse_str}
    skip = {"align_coef_start", "align_coef_end", "argmax_start", "argmax_end", "protos_extra"}
    defaults = RunConfig()
    for f in fields(RunConfig):
        if f.name in skip:
            continue
        parser = parsers[type(getattr(defaults, f.name))]
        table[f.name] = _simple(f.name, parser)
    table["align_coef"] = (_set_align, _get_align)
    table["argmax_schedule"] = (
        _set_argmax,
        lambda cfg: f"{_fmt(cfg.argmax_start)}, {_fmt(cfg.argmax_end)}",
    )
    table["protos_extra"] = (
        lambda raw: {"protos_extra": _parse_extra(raw)},
        lambda cfg: _format_extra(cfg.protos_extra),
    )
    return table


_KEY_TABLE = _build_key_table()
CONFIG_KEYS = tuple(sorted(_KEY_TABLE))


# Section: Parsing
def parse_config_text(text: str, *, base: Optional[RunConfig] = None) -> RunConfig:
    """Parse ``key = value`` lines into a validated RunConfig.

    Raises ConfigError naming the offending line for malformed lines, unknown
    or duplicate keys and unparseable values.
    """
    updates: Dict[str, object] = {}
    seen: Dict[str, int] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{raw_line.strip()}'")
        if key not in _KEY_TABLE:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key '{key}' (first set on line {seen[key]})")
        seen[key] = lineno
        setter, _ = _KEY_TABLE[key]
        try:
            updates.update(setter(value))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: invalid value for '{key}': {exc}") from exc

    config = replace(base or RunConfig(), **updates)
    try:
        validate_config(config)
    except ConfigError as exc:
        offending = _first_key_in(str(exc), seen)
        if offending is not None:
            raise ConfigError(f"line {seen[offending]}: {exc}") from exc
        raise
    return config


def _first_key_in(message: str, seen: Mapping[str, int]) -> Optional[str]:
    for key in sorted(seen, key=len, reverse=True):
        if message.startswith(key):
            return key
    return None


def config_to_text(config: RunConfig, *, include_unhashed: bool = True) -> str:
    """Canonical serialization: sorted keys, one per line."""
    lines = []
    for key in CONFIG_KEYS:
        if not include_unhashed and key in _UNHASHED_KEYS:
            continue
        _, getter = _KEY_TABLE[key]
        lines.append(f"{key} = {getter(config)}")
    return "\n".join(lines) + "\n"


def config_hash(config: RunConfig) -> str:
    """Short content hash of everything that affects a run's results."""
    canonical = config_to_text(config, include_unhashed=False)
    return hashlib.sha1(canonical.encode("utf-8")).hexdigest()[:12]


# Section: Validation
def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def validate_config(config: RunConfig) -> None:
    """Check ranges and cross-field constraints. Messages start with the key."""
    _require(config.neck in VALID_NECKS, f"neck must be one of {list(VALID_NECKS)}")
    for name in (
        "prototypes", "channels", "backbone_channels", "heads", "queries", "ffn_dim",
        "epochs", "batch_size", "patch", "num_classes", "max_objects", "image_height",
        "image_width", "eval_every", "render_scale", "topk", "gn_groups",
    ):
        _require(getattr(config, name) > 0, f"{name} must be positive")
    _require(config.encoder_layers >= 0, "encoder_layers must be non-negative")
    _require(config.decoder_layers > 0, "decoder_layers must be positive")
    _require(config.num_classes <= len(SHAPE_NAMES), f"num_classes must be at most {len(SHAPE_NAMES)}")
    _require(config.channels % config.heads == 0, "heads must divide channels")
    _require(config.channels % config.gn_groups == 0, "gn_groups must divide channels")
    _require(
        config.image_height % config.patch == 0 and config.image_width % config.patch == 0,
        "patch must divide image_height and image_width",
    )
    _require(config.max_objects <= config.queries, "max_objects must not exceed queries")
    _require(0.0 <= config.argmax_start <= 100.0, "argmax_schedule start must be within [0, 100]")
    _require(0.0 <= config.argmax_end <= 100.0, "argmax_schedule end must be within [0, 100]")
    _require(config.argmax_grad_scale > 0, "argmax_grad_scale must be positive")
    _require(config.align_coef_start >= 0 and config.align_coef_end >= 0, "align_coef must be non-negative")
    _require(config.align_eps > 0, "align_eps must be positive")
    _require(config.lr > 0, "lr must be positive")
    _require(0.0 < config.lr_drop <= 1.0, "lr_drop must be within (0, 1]")
    _require(config.grad_clip >= 0, "grad_clip must be non-negative")
    _require(0.0 <= config.noise <= 1.0, "noise must be within [0, 1]")
    _require(0.0 <= config.overlay_alpha <= 1.0, "overlay_alpha must be within [0, 1]")
    _require(config.blur_sigma >= 0, "blur_sigma must be non-negative")
    _require(config.train_samples >= 0 and config.val_samples >= 0, "train_samples must be non-negative")
    _require(0 < config.eos_coef, "eos_coef must be positive")
    extra_total = 0
    for label, extra in config.protos_extra:
        _require(0 <= label < config.num_classes, f"protos_extra class {label} out of range")
        _require(extra >= 0, "protos_extra counts must be non-negative")
        extra_total += extra
    if config.has_neck:
        _require(
            config.prototypes >= config.num_classes + extra_total,
            "prototypes must cover every class plus protos_extra",
        )


# Section: Presets
def _few_prototypes(config: RunConfig) -> RunConfig:
    return replace(config, prototypes=max(config.num_classes, config.prototypes // 2))


PRESETS: Dict[str, Callable[[RunConfig], RunConfig]] = {
    "base": lambda c: c,
    "few-prototypes": _few_prototypes,
    "sparsemax": lambda c: replace(c, neck=NECK_SPARSEMAX),
    "argmax": lambda c: replace(c, neck=NECK_ARGMAX),
    "strong-alignment": lambda c: replace(c, align_coef_start=8.0, align_coef_end=8.0),
    "no-alignment": lambda c: replace(c, align_coef_start=0.0, align_coef_end=0.0),
    "no-neck": lambda c: replace(c, neck=NECK_NONE, align_coef_start=0.0, align_coef_end=0.0),
}


def apply_preset(config: RunConfig, name: str) -> RunConfig:
    """Apply one of the named comparison variants."""
    try:
        preset = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset '{name}'; choose from {sorted(PRESETS)}") from None
    updated = preset(config)
    validate_config(updated)
    return updated


def apply_overrides(config: RunConfig, **overrides: object) -> RunConfig:
    """Replace fields (ignoring None values) and re-validate."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    updated = replace(config, **updates)
    validate_config(updated)
    return updated
