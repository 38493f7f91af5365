"""Tests for run-config parsing, hashing and presets."""
from __future__ import annotations

from dataclasses import replace

import pytest

from src.core.models import ConfigError, RunConfig
from src.core.validation import (
    PRESETS,
    apply_overrides,
    apply_preset,
    config_hash,
    config_to_text,
    parse_config_text,
    parse_float_list,
    validate_config,
)


def test_defaults_are_valid():
    validate_config(RunConfig())


def test_parse_basic_keys():
    config = parse_config_text(
        """
        # sparse neck with a constant alignment weight
        neck = sparsemax
        prototypes = 12
        align_coef = 8.0
        argmax_schedule = 0, 10
        protos_extra = 0:2
        occlusion = yes
        """
    )
    assert config.neck == "sparsemax"
    assert config.prototypes == 12
    assert (config.align_coef_start, config.align_coef_end) == (8.0, 8.0)
    assert (config.argmax_start, config.argmax_end) == (0.0, 10.0)
    assert config.protos_extra == ((0, 2),)
    assert config.occlusion is True


def test_align_schedule_pair():
    config = parse_config_text("align_coef = 1.2, 0.7")
    assert (config.align_coef_start, config.align_coef_end) == (1.2, 0.7)


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("prototypes = 16\nbogus = 1", "line 2: unknown key 'bogus'"),
        ("epochs = 3\nepochs = 4", "line 2: duplicate key 'epochs'"),
        ("lr = fast", "line 1: invalid value for 'lr'"),
        ("just some words", "line 1: expected 'key = value'"),
        ("align_coef = 1, 2, 3", "line 1"),
        ("occlusion = maybe", "line 1"),
    ],
)
def test_parse_errors_name_the_line(text, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    assert fragment in str(info.value)


def test_range_error_points_at_its_line():
    with pytest.raises(ConfigError, match="line 2: heads must divide channels"):
        parse_config_text("channels = 10\nheads = 4")


@pytest.mark.parametrize(
    "changes",
    [
        {"neck": "maxout"},
        {"argmax_end": 120.0},
        {"patch": 7},
        {"prototypes": 3},
        {"max_objects": 20},
        {"align_eps": 0.0},
        {"num_classes": 6},
        {"lr_drop": 0.0},
        {"lr_drop": 1.5},
    ],
)
def test_invalid_configs(changes):
    with pytest.raises(ConfigError):
        validate_config(replace(RunConfig(), **changes))


def test_text_round_trip():
    config = RunConfig(neck="argmax", prototypes=20, protos_extra=((1, 3),), align_coef_start=2.0, lr=3e-4)
    assert parse_config_text(config_to_text(config)) == config


def test_hash_is_stable_and_ignores_output_dir():
    config = RunConfig()
    assert config_hash(config) == config_hash(RunConfig())
    assert len(config_hash(config)) == 12
    assert config_hash(replace(config, output_dir="/tmp/elsewhere")) == config_hash(config)
    assert config_hash(replace(config, seed=1)) != config_hash(config)


def test_presets():
    base = RunConfig()
    assert apply_preset(base, "argmax").neck == "argmax"
    assert apply_preset(base, "strong-alignment").align_coef_start == 8.0
    assert apply_preset(base, "no-neck").neck == "none"
    assert apply_preset(base, "few-prototypes").prototypes == 8
    assert set(PRESETS) >= {"base", "sparsemax", "no-alignment"}


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        apply_preset(RunConfig(), "turbo")


def test_overrides_skip_none_and_revalidate():
    assert apply_overrides(RunConfig(), seed=None).seed == 0
    assert apply_overrides(RunConfig(), seed=7).seed == 7
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), epochs=0)


def test_parse_float_list():
    assert parse_float_list("0, 0.5,2") == [0.0, 0.5, 2.0]
    with pytest.raises(ValueError):
        parse_float_list("1,,2")
