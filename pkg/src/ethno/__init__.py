"""Toolkit for name-based demographic classification and its validation.

Two interchangeable engines produce predictions in one shared format: a
Bayesian surname-geography classifier built from probability tables, and
a prompted language-model classifier with caching, retries, and a repair
ladder for malformed outputs. Around them sit stratified sampling,
accuracy and recall metrics, aggregate share validation against census
benchmarks, an income-bias audit, and an export/score bridge for
distilling a teacher model into a small student.
"""

from .bisg import (
    GeoTable,
    PosteriorVector,
    SurnameTable,
    bisg_posterior,
    classify_bisg,
    geo_likelihood,
    load_bisg_tables,
)
from .distill import (
    DistillReport,
    DistillRow,
    DistillSplit,
    ExportReport,
    evaluate_student,
    export_teacher_set,
    load_distill_rows,
)
from .errors import (
    AdapterError,
    AlignError,
    BatchError,
    DistillError,
    EthnoError,
    GeoUnknown,
    IngestError,
    MetricError,
    NormalizeError,
    PromptError,
    SampleError,
    SchemeError,
    TableError,
)
from .ingest import (
    ColumnMapping,
    IngestReport,
    canonical_mapping,
    canonical_mapping_from_header,
    ingest_records,
    load_canonical_records,
    load_mapping,
    write_records_csv,
)
from .llm import (
    BackendConfig,
    MockBackend,
    PromptConfig,
    ResponseCache,
    TemplateRegistry,
    UsageReport,
    build_prompt,
    cache_key,
    classify_batch,
    parse_response,
)
from .metrics import (
    AggregateReport,
    BiasAuditReport,
    ConfusionMatrix,
    EvalReport,
    OlsResult,
    RaceAudit,
    VentileBin,
    accuracy_against,
    aggregate_error,
    aggregate_error_from_shares,
    confusion_matrix,
    evaluate,
    income_bias_audit,
    ols_slope,
    render_aggregate_text,
    render_bias_text,
    render_eval_text,
    write_ventile_csv,
)
from .predictions import (
    UNPARSEABLE,
    Prediction,
    read_predictions,
    write_predictions,
)
from .records import (
    CategoryScheme,
    NameRecord,
    RecordSet,
    load_scheme,
    normalize_name,
)
from .sampling import seeded_permutation, stratified_sample

__version__ = "0.1.0"

__all__ = [
    "AdapterError",
    "AggregateReport",
    "AlignError",
    "BackendConfig",
    "BatchError",
    "BiasAuditReport",
    "CategoryScheme",
    "ColumnMapping",
    "ConfusionMatrix",
    "DistillError",
    "DistillReport",
    "DistillRow",
    "DistillSplit",
    "EthnoError",
    "EvalReport",
    "ExportReport",
    "GeoTable",
    "GeoUnknown",
    "IngestError",
    "IngestReport",
    "MetricError",
    "MockBackend",
    "NameRecord",
    "NormalizeError",
    "OlsResult",
    "PosteriorVector",
    "Prediction",
    "PromptConfig",
    "PromptError",
    "RaceAudit",
    "RecordSet",
    "ResponseCache",
    "SampleError",
    "SchemeError",
    "SurnameTable",
    "TableError",
    "TemplateRegistry",
    "UNPARSEABLE",
    "UsageReport",
    "VentileBin",
    "accuracy_against",
    "aggregate_error",
    "aggregate_error_from_shares",
    "bisg_posterior",
    "build_prompt",
    "cache_key",
    "canonical_mapping",
    "canonical_mapping_from_header",
    "classify_batch",
    "classify_bisg",
    "confusion_matrix",
    "evaluate",
    "evaluate_student",
    "export_teacher_set",
    "geo_likelihood",
    "income_bias_audit",
    "ingest_records",
    "load_bisg_tables",
    "load_canonical_records",
    "load_distill_rows",
    "load_mapping",
    "load_scheme",
    "normalize_name",
    "ols_slope",
    "parse_response",
    "read_predictions",
    "render_aggregate_text",
    "render_bias_text",
    "render_eval_text",
    "seeded_permutation",
    "stratified_sample",
    "write_predictions",
    "write_records_csv",
    "write_ventile_csv",
    "__version__",
]
