"""Error hierarchy: one base so the CLI can catch everything domain-level."""

from __future__ import annotations


class StudentError(Exception):
    """Base for all domain errors raised by this package."""


class ConfigError(StudentError):
    """Invalid trainer configuration or prompt template."""


class DataError(StudentError):
    """Malformed scheme, train, test, or prediction file."""


class TrainError(StudentError):
    """Training cannot proceed: empty input or labels outside the scheme."""


class PredictError(StudentError):
    """Prediction cannot proceed: adapter/config mismatch or bad artifact."""
