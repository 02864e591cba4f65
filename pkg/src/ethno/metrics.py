"""Evaluation metrics: confusion matrices, accuracy and recall, aggregate
share validation against census benchmarks, and the income-bias audit.

Scoring is conservative throughout: an UNPARSEABLE prediction counts as
wrong, both in overall accuracy and in each category's recall denominator.
Percentages are kept at full precision internally and rounded only when
rendered.

The bias audit regresses a per-record misclassification indicator on
income in $10,000 units with ordinary least squares. The slope and its
standard error come from the closed-form textbook estimators; the
two-sided p-value always uses the exact Student t tail with n-2 degrees
of freedom (no normal approximation, regardless of sample size).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from statistics import fmean
from typing import Iterable, Mapping, Sequence

from scipy import stats

from .errors import AlignError, MetricError
from .predictions import Prediction, index_by_id
from .records import CategoryScheme, RecordSet

N_VENTILES = 20
_MIN_OLS = 3
_MIN_VENTILES = 20


@dataclass(frozen=True)
class ConfusionMatrix:
    """K by K counts with rows as truth and columns as prediction, plus a
    per-truth count of UNPARSEABLE predictions."""

    scheme: CategoryScheme
    counts: tuple[tuple[int, ...], ...]
    unparseable_per_truth: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts) + sum(self.unparseable_per_truth)

    @property
    def trace(self) -> int:
        return sum(self.counts[i][i] for i in range(len(self.counts)))

    def row_total(self, index: int) -> int:
        return sum(self.counts[index]) + self.unparseable_per_truth[index]


def confusion_matrix(
    preds: Iterable[Prediction], truths: RecordSet, scheme: CategoryScheme
) -> ConfusionMatrix:
    """Tabulate predictions against truth labels.

    Predictions whose label is UNPARSEABLE, or not a scheme label at all,
    land in the per-truth unparseable column. A prediction for an id not
    in truths is an AlignError; a matched record without a truth label is
    a MetricError.
    """
    by_id = {record.id: record for record in truths}
    k = len(scheme)
    label_index = {label: i for i, label in enumerate(scheme.labels)}
    counts = [[0] * k for _ in range(k)]
    unparseable = [0] * k
    for pred in preds:
        record = by_id.get(pred.record_id)
        if record is None:
            raise AlignError(f"prediction id {pred.record_id!r} not in truth set")
        if record.truth_label is None:
            raise MetricError(f"record {record.id!r} has no truth label")
        t = label_index[record.truth_label]
        p = label_index.get(pred.label)
        if p is None:
            unparseable[t] += 1
        else:
            counts[t][p] += 1
    return ConfusionMatrix(
        scheme=scheme,
        counts=tuple(tuple(row) for row in counts),
        unparseable_per_truth=tuple(unparseable),
    )


@dataclass(frozen=True)
class EvalReport:
    """Accuracy and recall summary for one engine on one record set.

    per_class_recall entries are None for truth categories with no
    records; macro_recall averages the defined entries.
    """

    accuracy: float
    per_class_recall: tuple[float | None, ...]
    macro_recall: float
    n: int
    matrix: ConfusionMatrix

    def to_dict(self) -> dict[str, object]:
        return {
            "accuracy": self.accuracy,
            "macro_recall": self.macro_recall,
            "n": self.n,
            "per_class_recall": {
                label: recall
                for label, recall in zip(self.matrix.scheme.labels, self.per_class_recall)
            },
            "counts": [list(row) for row in self.matrix.counts],
            "unparseable_per_truth": list(self.matrix.unparseable_per_truth),
        }


def evaluate(matrix: ConfusionMatrix) -> EvalReport:
    """Summarize a confusion matrix into accuracy and recalls."""
    total = matrix.total
    if total == 0:
        raise MetricError("cannot evaluate an empty confusion matrix")
    recalls: list[float | None] = []
    for i in range(len(matrix.counts)):
        denom = matrix.row_total(i)
        recalls.append(matrix.counts[i][i] / denom if denom else None)
    defined = [r for r in recalls if r is not None]
    return EvalReport(
        accuracy=matrix.trace / total,
        per_class_recall=tuple(recalls),
        macro_recall=fmean(defined),
        n=total,
        matrix=matrix,
    )


@dataclass(frozen=True)
class CategoryShare:
    """One category's predicted and benchmark shares, in percent."""

    label: str
    predicted_pct: float
    census_pct: float
    error_pp: float


@dataclass(frozen=True)
class AggregateReport:
    """Predicted-versus-census share comparison.

    avg_error averages absolute errors over the census categories only;
    predicted labels outside the benchmark are reported in
    extra_predicted and excluded from the average.
    """

    per_category: tuple[CategoryShare, ...]
    avg_error: float
    extra_predicted: Mapping[str, float]
    n: int

    def to_dict(self) -> dict[str, object]:
        return {
            "avg_error": self.avg_error,
            "n": self.n,
            "per_category": [
                {
                    "label": c.label,
                    "predicted_pct": c.predicted_pct,
                    "census_pct": c.census_pct,
                    "error_pp": c.error_pp,
                }
                for c in self.per_category
            ],
            "extra_predicted": dict(self.extra_predicted),
        }


def aggregate_error_from_shares(
    predicted: Mapping[str, float], census: Mapping[str, float], n: int = 0
) -> AggregateReport:
    """Compare share maps directly; census keys define the comparison set."""
    per_category = []
    for label, census_pct in census.items():
        predicted_pct = float(predicted.get(label, 0.0))
        per_category.append(
            CategoryShare(
                label=label,
                predicted_pct=predicted_pct,
                census_pct=float(census_pct),
                error_pp=abs(predicted_pct - float(census_pct)),
            )
        )
    if not per_category:
        raise MetricError("census benchmark lists no categories")
    extra = {
        label: float(share)
        for label, share in predicted.items()
        if label not in census and share > 0
    }
    avg = fmean(c.error_pp for c in per_category)
    return AggregateReport(
        per_category=tuple(per_category), avg_error=avg, extra_predicted=extra, n=n
    )


def aggregate_error(
    preds: Iterable[Prediction], census: Mapping[str, float], scheme: CategoryScheme
) -> AggregateReport:
    """Compare predicted label shares against census shares in percent.

    Shares are computed over parseable predictions only; a batch with no
    parseable prediction is a MetricError.
    """
    labels = set(scheme.labels)
    tallies: dict[str, int] = {}
    parseable = 0
    for pred in preds:
        if pred.label in labels:
            parseable += 1
            tallies[pred.label] = tallies.get(pred.label, 0) + 1
    if parseable == 0:
        raise MetricError("no parseable predictions to aggregate")
    shares = {label: 100.0 * count / parseable for label, count in tallies.items()}
    return aggregate_error_from_shares(shares, census, n=parseable)


@dataclass(frozen=True)
class OlsResult:
    """Simple least-squares fit of y on x."""

    slope: float
    se: float
    t: float
    p: float
    n: int

    def to_dict(self) -> dict[str, float | int]:
        return {"slope": self.slope, "se": self.se, "t": self.t, "p": self.p, "n": self.n}


def ols_slope(x: Sequence[float], y: Sequence[float]) -> OlsResult:
    """Fit y = a + b*x and test b = 0 with an exact Student t tail."""
    n = len(x)
    if n != len(y):
        raise MetricError(f"x and y lengths differ: {n} vs {len(y)}")
    if n < _MIN_OLS:
        raise MetricError(f"need at least {_MIN_OLS} points, got {n}")
    x_bar = fmean(x)
    y_bar = fmean(y)
    sxx = sum((xi - x_bar) ** 2 for xi in x)
    if sxx == 0:
        raise MetricError("x has zero variance")
    sxy = sum((xi - x_bar) * (yi - y_bar) for xi, yi in zip(x, y))
    slope = sxy / sxx
    intercept = y_bar - slope * x_bar
    rss = sum((yi - intercept - slope * xi) ** 2 for xi, yi in zip(x, y))
    sigma2 = rss / (n - 2)
    se = math.sqrt(sigma2 / sxx)
    if se == 0:
        t = math.inf if slope > 0 else (-math.inf if slope < 0 else 0.0)
        p = 0.0 if slope != 0 else 1.0
    else:
        t = slope / se
        p = 2.0 * float(stats.t.sf(abs(t), n - 2))
    return OlsResult(slope=slope, se=se, t=t, p=p, n=n)


@dataclass(frozen=True)
class VentileBin:
    """One equal-frequency income bin: 1-based index, income range, mean
    misclassification rate, and size."""

    index: int
    lo: float
    hi: float
    rate: float
    n: int


@dataclass(frozen=True)
class RaceAudit:
    """Per-category audit results; ventiles or ols are None when the
    subset is too small, with the reason in note."""

    label: str
    n: int
    ventiles: tuple[VentileBin, ...] | None
    ols: OlsResult | None
    note: str | None = None

    def to_dict(self) -> dict[str, object]:
        return {
            "label": self.label,
            "n": self.n,
            "ventiles": None
            if self.ventiles is None
            else [
                {"bin": b.index, "lo": b.lo, "hi": b.hi, "rate": b.rate, "n": b.n}
                for b in self.ventiles
            ],
            "ols": None if self.ols is None else self.ols.to_dict(),
            "note": self.note,
        }


@dataclass(frozen=True)
class BiasAuditReport:
    """Income-bias audit over every truth category with enough records."""

    engine: str
    per_race: tuple[RaceAudit, ...]

    def to_dict(self) -> dict[str, object]:
        return {
            "engine": self.engine,
            "per_race": [audit.to_dict() for audit in self.per_race],
        }


def _ventile_bins(
    rows: list[tuple[float, int]],
) -> tuple[VentileBin, ...]:
    """Split (income, misclassified) rows, already sorted, into 20
    equal-frequency bins; the first n % 20 bins take the extra record."""
    n = len(rows)
    base, rem = divmod(n, N_VENTILES)
    bins: list[VentileBin] = []
    start = 0
    for index in range(1, N_VENTILES + 1):
        size = base + (1 if index <= rem else 0)
        chunk = rows[start : start + size]
        start += size
        incomes = [income for income, _ in chunk]
        bins.append(
            VentileBin(
                index=index,
                lo=min(incomes),
                hi=max(incomes),
                rate=fmean(mis for _, mis in chunk),
                n=size,
            )
        )
    return tuple(bins)


def income_bias_audit(
    preds: Iterable[Prediction],
    truths: RecordSet,
    scheme: CategoryScheme,
    engine: str,
) -> BiasAuditReport:
    """Audit misclassification against income, per truth category.

    Records without income are skipped. Within a category, records sort
    by income with ties broken by record id; the sorted order feeds 20
    equal-frequency bins. Categories with under 3 records are omitted
    with a note; 3 to 19 records get the regression but no ventile table.
    Raises MetricError when no category is analyzable.
    """
    pred_by_id = index_by_id(preds)
    subsets: dict[str, list[tuple[float, int, str]]] = {label: [] for label in scheme.labels}
    for record in truths:
        if record.income is None:
            continue
        if record.truth_label is None:
            raise MetricError(f"record {record.id!r} has no truth label")
        pred = pred_by_id.get(record.id)
        if pred is None:
            raise AlignError(f"record {record.id!r} has no prediction")
        mis = 0 if pred.label == record.truth_label else 1
        subsets[record.truth_label].append((float(record.income), mis, record.id))

    audits: list[RaceAudit] = []
    analyzable = 0
    for label in scheme.labels:
        rows = sorted(subsets[label], key=lambda row: (row[0], row[2]))
        n = len(rows)
        if n < _MIN_OLS:
            audits.append(
                RaceAudit(
                    label=label,
                    n=n,
                    ventiles=None,
                    ols=None,
                    note=f"omitted: {n} records with income, need {_MIN_OLS}",
                )
            )
            continue
        analyzable += 1
        x = [income / 10_000.0 for income, _, _ in rows]
        y = [mis for _, mis, _ in rows]
        fit = ols_slope(x, y)
        if n < _MIN_VENTILES:
            audits.append(
                RaceAudit(
                    label=label,
                    n=n,
                    ventiles=None,
                    ols=fit,
                    note=f"ventiles omitted: {n} records, need {_MIN_VENTILES}",
                )
            )
        else:
            bins = _ventile_bins([(income, mis) for income, mis, _ in rows])
            audits.append(RaceAudit(label=label, n=n, ventiles=bins, ols=fit))
    if analyzable == 0:
        raise MetricError("no category has enough records with income to audit")
    return BiasAuditReport(engine=engine, per_race=tuple(audits))


def write_ventile_csv(audit: RaceAudit, path: str | Path) -> None:
    """Write one category's ventile table as CSV for plotting."""
    if audit.ventiles is None:
        raise MetricError(f"no ventile table for {audit.label!r}")
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin", "lo", "hi", "rate", "n"])
        for b in audit.ventiles:
            writer.writerow([b.index, f"{b.lo:g}", f"{b.hi:g}", f"{b.rate:.6f}", b.n])


def accuracy_against(preds: Iterable[Prediction], truths: RecordSet) -> float:
    """Share of predictions matching the truth label, UNPARSEABLE wrong."""
    by_id = {record.id: record for record in truths}
    total = 0
    hits = 0
    for pred in preds:
        record = by_id.get(pred.record_id)
        if record is None:
            raise AlignError(f"prediction id {pred.record_id!r} not in truth set")
        if record.truth_label is None:
            raise MetricError(f"record {record.id!r} has no truth label")
        total += 1
        if pred.label == record.truth_label:
            hits += 1
    if total == 0:
        raise MetricError("no predictions to score")
    return hits / total


def _pct(value: float | None) -> str:
    return "-" if value is None else f"{100.0 * value:.2f}%"


def render_eval_text(report: EvalReport) -> str:
    """Aligned-column text rendering of an EvalReport."""
    labels = report.matrix.scheme.labels
    width = max(len(label) for label in labels)
    lines = [
        f"n             {report.n}",
        f"accuracy      {_pct(report.accuracy)}",
        f"macro recall  {_pct(report.macro_recall)}",
        "recall by category:",
    ]
    for label, recall in zip(labels, report.per_class_recall):
        lines.append(f"  {label:<{width}}  {_pct(recall)}")
    return "\n".join(lines)


def render_aggregate_text(report: AggregateReport) -> str:
    """Aligned-column text rendering of an AggregateReport."""
    width = max(len(c.label) for c in report.per_category)
    lines = [f"{'category':<{width}}  {'pred%':>7}  {'census%':>7}  {'err pp':>6}"]
    for c in report.per_category:
        lines.append(
            f"{c.label:<{width}}  {c.predicted_pct:>7.1f}  {c.census_pct:>7.1f}  {c.error_pp:>6.1f}"
        )
    lines.append(f"avg error: {report.avg_error:.1f} pp over {len(report.per_category)} categories")
    for label, share in sorted(report.extra_predicted.items()):
        lines.append(f"extra predicted label {label}: {share:.1f}%")
    return "\n".join(lines)


def render_bias_text(report: BiasAuditReport) -> str:
    """Aligned-column text rendering of a BiasAuditReport."""
    lines = [f"income bias audit ({report.engine})"]
    for audit in report.per_race:
        if audit.ols is None:
            lines.append(f"{audit.label}: {audit.note}")
            continue
        fit = audit.ols
        lines.append(
            f"{audit.label}: n={audit.n} slope_per_$10k={fit.slope:+.4f} "
            f"se={fit.se:.4f} t={fit.t:.2f} p={fit.p:.4g}"
        )
        if audit.note:
            lines.append(f"  {audit.note}")
    return "\n".join(lines)
