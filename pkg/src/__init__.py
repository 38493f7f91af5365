"""protoneck - prototype-neck detection transformer, core package.

Package Structure:
    src/
    ├── autograd/  - Reverse-mode autodiff on numpy arrays, Adam
    ├── core/      - Models, config validation, reporting, orchestrator
    ├── data/      - Synthetic shapes dataset and binary export
    ├── evaluate/  - Explainability scores, COCO-style mAP, evaluation runner
    ├── infra/     - Logging, paths, config storage, worker pool
    ├── model/     - Sparse activations, prototype neck, detector, checkpoints
    ├── store/     - Run index and CSV results
    ├── train/     - Matching, losses and the training loop
    └── viz/       - Prototype / product map renderers

Logging Configuration:
    Set the following environment variables to configure logging:
    - PROTONECK_LOG_LEVEL: Log level (DEBUG, INFO, WARNING, ERROR). Default: INFO
    - PROTONECK_LOG_FILE: Path to log file. Default: .protoneck/protoneck.log in the
        current working directory. Set this to override the default.
    - PROTONECK_LOG_FORMAT: Custom log format string.

Example:
    export PROTONECK_LOG_LEVEL=DEBUG
    export PROTONECK_THREADS=4
"""
from .infra import configure_logging, get_logger

# Initialize logging when the package is imported
configure_logging()

__all__ = [
    "configure_logging",
    "get_logger",
]
