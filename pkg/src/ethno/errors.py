"""Exception hierarchy.

Every error raised on a data or contract violation derives from EthnoError,
so callers (and the CLI) can distinguish data problems (exit 1) from bugs.
"""


class EthnoError(Exception):
    """Base class for all data and contract errors raised by this package."""


class SchemeError(EthnoError):
    """Category scheme file is malformed or violates scheme invariants."""


class NormalizeError(EthnoError):
    """Name normalization produced an empty result."""


class IngestError(EthnoError):
    """Record file or column mapping cannot be ingested."""


class SampleError(EthnoError):
    """Stratified sampling precondition failed (missing or underfull stratum)."""


class TableError(EthnoError):
    """BISG table file is malformed or inconsistent with the scheme."""


class GeoUnknown(EthnoError):
    """Geography unit absent from the table, or record lacks the level.

    Callers decide the fallback (surname-only mode, skip, or abort).
    """


class PromptError(EthnoError):
    """Prompt cannot be built: unknown template or missing feature value."""


class AdapterError(EthnoError):
    """Backend adapter rejects the requested configuration."""


class BatchError(EthnoError):
    """Batch classification cannot start (e.g. missing credentials)."""


class MetricError(EthnoError):
    """Metric undefined for the given input (empty, zero variance, ...)."""


class AlignError(EthnoError):
    """Predictions and truth records cannot be joined by id."""


class DistillError(EthnoError):
    """Distillation export or scoring precondition failed."""
