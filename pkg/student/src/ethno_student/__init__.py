"""Student-model trainer for teacher-labeled name classification exports.

Consumes the JSONL train/test files written by the teacher pipeline's
export step, fine-tunes a small byte-level causal LM with low-rank
adapters, and emits prediction files the teacher pipeline can score.
"""

from __future__ import annotations

from .config import TrainerConfig, load_config
from .data import LabelScheme, Row, load_rows, load_scheme
from .errors import (
    ConfigError,
    DataError,
    PredictError,
    StudentError,
    TrainError,
)
from .inference import predict_test
from .parsing import UNPARSEABLE, repair_label
from .prompts import DEFAULT_TEMPLATE, render_prompt, validate_template
from .training import TrainLog, train_student

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DEFAULT_TEMPLATE",
    "DataError",
    "LabelScheme",
    "PredictError",
    "Row",
    "StudentError",
    "TrainError",
    "TrainLog",
    "TrainerConfig",
    "UNPARSEABLE",
    "__version__",
    "load_config",
    "load_rows",
    "load_scheme",
    "predict_test",
    "render_prompt",
    "repair_label",
    "train_student",
    "validate_template",
]
