"""Core definitions for protoneck.

This package contains the data models, config parsing and hashing, result
aggregation, and the orchestrator that runs the train / eval / explain /
sweep / export-data commands.

Modules:
    models: Data structures (RunConfig, PrototypeMap, Detection, MetricsReport, ...)
    validation: Config parsing, presets and the config hash
    reporting: CSV rows and mean±std aggregation over seeds
    orchestrator: Command lifecycle and the error → exit-code wrapper

Example:
    from src.core import RunConfig, apply_preset

    config = apply_preset(RunConfig(), "sparsemax")
"""
from .models import (
    # Constants
    CHECKPOINT_VERSION,
    NECK_SOFTMAX,
    NECK_SPARSEMAX,
    NECK_ARGMAX,
    NECK_NONE,
    VALID_NECKS,
    SHAPE_NAMES,
    EXIT_OK,
    EXIT_FAILURE,
    EXIT_CONFIG,
    EXIT_CHECKPOINT,
    EXIT_DATA,
    # Exceptions
    ProtoNeckError,
    ContractError,
    DimensionError,
    NumericError,
    TrainingError,
    ConfigError,
    CheckpointError,
    DataError,
    # Enums
    NormKind,
    # Data classes
    NeckNormMode,
    RunConfig,
    Target,
    Detection,
    PrototypeMap,
    AttentionMap,
    SaliencyMap,
    PrototypeAssignment,
    MatchResult,
    SceneSample,
    DatasetSpec,
    LossReport,
    MetricsReport,
)

from .validation import (
    CONFIG_KEYS,
    PRESETS,
    parse_config_text,
    config_to_text,
    config_hash,
    validate_config,
    apply_preset,
    apply_overrides,
)

from .reporting import (
    metrics_row,
    aggregate_reports,
    format_mean_std,
)

# Note: ExperimentOrchestrator is NOT imported here to avoid circular imports.
# Import it directly from src.core.orchestrator when needed.

__all__ = [
    # Constants
    "CHECKPOINT_VERSION",
    "NECK_SOFTMAX",
    "NECK_SPARSEMAX",
    "NECK_ARGMAX",
    "NECK_NONE",
    "VALID_NECKS",
    "SHAPE_NAMES",
    "EXIT_OK",
    "EXIT_FAILURE",
    "EXIT_CONFIG",
    "EXIT_CHECKPOINT",
    "EXIT_DATA",
    # Exceptions
    "ProtoNeckError",
    "ContractError",
    "DimensionError",
    "NumericError",
    "TrainingError",
    "ConfigError",
    "CheckpointError",
    "DataError",
    # Enums
    "NormKind",
    # Data classes
    "NeckNormMode",
    "RunConfig",
    "Target",
    "Detection",
    "PrototypeMap",
    "AttentionMap",
    "SaliencyMap",
    "PrototypeAssignment",
    "MatchResult",
    "SceneSample",
    "DatasetSpec",
    "LossReport",
    "MetricsReport",
    # Validation
    "CONFIG_KEYS",
    "PRESETS",
    "parse_config_text",
    "config_to_text",
    "config_hash",
    "validate_config",
    "apply_preset",
    "apply_overrides",
    # Reporting
    "metrics_row",
    "aggregate_reports",
    "format_mean_std",
]
