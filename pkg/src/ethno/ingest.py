"""Tabular ingestion of person records.

Reads delimited text (RFC-4180 CSV with header, or TSV) and JSON-lines
files through an explicit column mapping. Rows violating record invariants
are excluded and itemized in the ingest report, never silently dropped, so
downstream sample sizes stay auditable. Ingestion streams: memory holds
only the retained records.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import IngestError, NormalizeError
from .records import CategoryScheme, NameRecord, RecordSet, normalize_name

CANONICAL_FIELDS = ("id", "given_names", "surname", "age", "gender", "party", "income", "truth")


@dataclass(frozen=True)
class ColumnMapping:
    """Names the input columns holding each record field.

    Voter-file schemas differ by state and country, so the mapping is
    explicit configuration rather than inference. geography maps level
    names (county, state, zip, ...) to their columns.
    """

    id: str
    surname: str
    given_names: str | None = None
    geography: Mapping[str, str] = field(default_factory=dict)
    age: str | None = None
    gender: str | None = None
    party: str | None = None
    income: str | None = None
    truth: str | None = None

    def mapped_columns(self) -> list[str]:
        cols = [self.id, self.surname]
        cols += [c for c in (self.given_names, self.age, self.gender, self.party, self.income, self.truth) if c]
        cols += list(self.geography.values())
        return cols


def load_mapping(path: str | Path) -> ColumnMapping:
    """Load a ColumnMapping from its JSON document form."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IngestError(f"cannot read mapping file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestError(f"mapping file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise IngestError(f"mapping file {path} must contain a JSON object")
    for required in ("id", "surname"):
        if not doc.get(required):
            raise IngestError(f"mapping file {path} must name an {required!r} column")
    geography = doc.get("geography") or {}
    if not isinstance(geography, dict):
        raise IngestError(f"mapping file {path}: 'geography' must be an object")
    return ColumnMapping(
        id=doc["id"],
        surname=doc["surname"],
        given_names=doc.get("given_names"),
        geography=dict(geography),
        age=doc.get("age"),
        gender=doc.get("gender"),
        party=doc.get("party"),
        income=doc.get("income"),
        truth=doc.get("truth"),
    )


def canonical_mapping(levels: Iterable[str]) -> ColumnMapping:
    """Mapping matching the canonical layout written by write_records_csv."""
    return ColumnMapping(
        id="id",
        surname="surname",
        given_names="given_names",
        geography={level: level for level in levels},
        age="age",
        gender="gender",
        party="party",
        income="income",
        truth="truth",
    )


def canonical_mapping_from_header(header: Iterable[str]) -> ColumnMapping:
    """Infer the canonical mapping from a header: non-reserved columns are
    geography levels."""
    levels = [col for col in header if col not in CANONICAL_FIELDS]
    return canonical_mapping(levels)


@dataclass(frozen=True)
class RejectedRow:
    row: int
    reason: str


@dataclass(frozen=True)
class IngestReport:
    """Accounting for one ingestion: total rows = kept + rejected."""

    total_rows: int
    kept: int
    rejects: tuple[RejectedRow, ...]

    def summary(self) -> str:
        lines = [f"rows={self.total_rows} kept={self.kept} rejected={len(self.rejects)}"]
        for rej in self.rejects:
            lines.append(f"  row {rej.row}: {rej.reason}")
        return "\n".join(lines)


def _iter_rows(path: Path) -> Iterator[dict[str, str]]:
    """Yield one field dict per data row; format chosen by extension."""
    suffix = path.suffix.lower()
    if suffix in (".jsonl", ".ndjson"):
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                yield {str(k): "" if v is None else str(v) for k, v in obj.items()}
    elif suffix in (".csv", ".tsv", ".txt"):
        delimiter = "\t" if suffix == ".tsv" else ","
        with path.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh, delimiter=delimiter)
            if reader.fieldnames is None:
                raise IngestError(f"{path}: empty file, no header row")
            for row in reader:
                yield {k: (v or "") for k, v in row.items() if k is not None}
    else:
        raise IngestError(f"{path}: unsupported extension {suffix!r} (use .csv, .tsv, .jsonl)")


def _check_columns(path: Path, mapping: ColumnMapping) -> None:
    suffix = path.suffix.lower()
    if suffix not in (".csv", ".tsv", ".txt"):
        return  # JSON-lines rows are validated per object
    delimiter = "\t" if suffix == ".tsv" else ","
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file, no header row") from None
    missing = [c for c in mapping.mapped_columns() if c not in header]
    if missing:
        raise IngestError(f"{path}: mapped columns missing from header: {missing}")


def ingest_records(
    path: str | Path, mapping: ColumnMapping, scheme: CategoryScheme
) -> tuple[RecordSet, IngestReport]:
    """Ingest a record file, excluding and reporting invalid rows.

    Row numbers in the report are 1-based data-row indices (the header does
    not count). A row is rejected when its id is empty or duplicated, its
    surname is empty after display normalization, its age or income does not
    parse (income must be > 0), or its truth value does not resolve to a
    scheme label. Fatal problems (unreadable file, missing mapped columns)
    raise IngestError instead.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"record file not found: {path}")
    _check_columns(path, mapping)

    records: list[NameRecord] = []
    rejects: list[RejectedRow] = []
    seen_ids: set[str] = set()
    total = 0

    def value(row: dict[str, str], column: str | None) -> str:
        if column is None or column not in row:
            return ""
        return row[column].strip()

    try:
        row_iter = _iter_rows(path)
        for rownum, row in enumerate(row_iter, start=1):
            total += 1
            if mapping.id not in row or mapping.surname not in row:
                absent = mapping.id if mapping.id not in row else mapping.surname
                rejects.append(RejectedRow(rownum, f"missing mapped field {absent!r}"))
                continue
            rec_id = value(row, mapping.id)
            raw_surname = value(row, mapping.surname)
            if not rec_id:
                rejects.append(RejectedRow(rownum, "empty id"))
                continue
            if rec_id in seen_ids:
                rejects.append(RejectedRow(rownum, f"duplicate id {rec_id!r}"))
                continue
            try:
                surname = normalize_name(raw_surname, "display")
            except NormalizeError:
                rejects.append(RejectedRow(rownum, "empty surname"))
                continue

            given = value(row, mapping.given_names)
            geography: dict[str, str] = {}
            for level, column in mapping.geography.items():
                geo_value = value(row, column)
                if geo_value:
                    geography[level] = " ".join(geo_value.split())

            age: int | None = None
            raw_age = value(row, mapping.age)
            if raw_age:
                try:
                    age = int(raw_age)
                except ValueError:
                    rejects.append(RejectedRow(rownum, f"invalid age {raw_age!r}"))
                    continue
                if age < 0:
                    rejects.append(RejectedRow(rownum, f"negative age {age}"))
                    continue

            income: float | None = None
            raw_income = value(row, mapping.income)
            if raw_income:
                try:
                    income = float(raw_income)
                except ValueError:
                    rejects.append(RejectedRow(rownum, f"invalid income {raw_income!r}"))
                    continue
                if income <= 0:
                    rejects.append(RejectedRow(rownum, f"non-positive income {income}"))
                    continue

            truth: str | None = None
            raw_truth = value(row, mapping.truth)
            if raw_truth:
                truth = scheme.canonical(raw_truth)
                if truth is None:
                    rejects.append(RejectedRow(rownum, f"unknown truth label {raw_truth!r}"))
                    continue

            gender = value(row, mapping.gender) or None
            party = value(row, mapping.party) or None

            records.append(
                NameRecord(
                    id=rec_id,
                    surname=surname,
                    given_names=" ".join(given.split()),
                    geography=geography,
                    age=age,
                    gender=gender,
                    party=party,
                    income=income,
                    truth_label=truth,
                )
            )
            seen_ids.add(rec_id)
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestError(f"cannot read record file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path}: invalid JSON on a line: {exc}") from exc

    record_set = RecordSet(records=tuple(records), scheme=scheme, source=str(path))
    report = IngestReport(total_rows=total, kept=len(records), rejects=tuple(rejects))
    return record_set, report


def geography_levels(record_set: RecordSet) -> list[str]:
    """Geography levels present across the set, in first-seen order."""
    levels: list[str] = []
    for rec in record_set:
        for level in rec.geography:
            if level not in levels:
                levels.append(level)
    return levels


def write_records_csv(record_set: RecordSet, path: str | Path) -> None:
    """Write records in the canonical CSV layout (re-ingestable via
    canonical_mapping_from_header)."""
    path = Path(path)
    levels = geography_levels(record_set)
    header = ["id", "given_names", "surname", *levels, "age", "gender", "party", "income", "truth"]
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in record_set:
            row = [rec.id, rec.given_names, rec.surname]
            row += [rec.geography.get(level, "") for level in levels]
            row += [
                "" if rec.age is None else str(rec.age),
                rec.gender or "",
                rec.party or "",
                "" if rec.income is None else format(rec.income, "g"),
                rec.truth_label or "",
            ]
            writer.writerow(row)


def load_canonical_records(path: str | Path, scheme: CategoryScheme) -> tuple[RecordSet, IngestReport]:
    """Ingest a file written by write_records_csv (or shaped like one)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".jsonl", ".ndjson"):
        first = None
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    first = json.loads(line)
                    break
        header = list(first.keys()) if isinstance(first, dict) else []
    else:
        delimiter = "\t" if suffix == ".tsv" else ","
        with path.open("r", encoding="utf-8", newline="") as fh:
            try:
                header = next(csv.reader(fh, delimiter=delimiter))
            except StopIteration:
                raise IngestError(f"{path}: empty file, no header row") from None
    return ingest_records(path, canonical_mapping_from_header(header), scheme)
