"""Teacher-student bridge: export teacher-labeled splits for fine-tuning
and score student predictions that come back.

Exported rows are deliberately minimal JSON-lines so the trainer needs no
knowledge of this package: {"id", "name", "geography", "label"} for train
rows, plus "truth" on test rows when ground truth is known. Records whose
teacher label is UNPARSEABLE are excluded from export and counted, not
mapped to a default, since training on noise labels would corrupt the
student silently.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import AlignError, DistillError
from .predictions import UNPARSEABLE, Prediction, index_by_id
from .records import NameRecord, RecordSet
from .sampling import seeded_permutation

_MIN_USABLE = 10


@dataclass(frozen=True)
class DistillRow:
    """One exported example: display name, geography, teacher label, and
    the truth label when known."""

    id: str
    name: str
    geography: Mapping[str, str]
    label: str
    truth: str | None = None

    def to_dict(self) -> dict[str, object]:
        payload: dict[str, object] = {
            "id": self.id,
            "name": self.name,
            "geography": dict(self.geography),
            "label": self.label,
        }
        if self.truth is not None:
            payload["truth"] = self.truth
        return payload

    @classmethod
    def from_dict(cls, payload: Mapping[str, object]) -> "DistillRow":
        return cls(
            id=str(payload["id"]),
            name=str(payload["name"]),
            geography={str(k): str(v) for k, v in dict(payload.get("geography") or {}).items()},
            label=str(payload["label"]),
            truth=str(payload["truth"]) if payload.get("truth") is not None else None,
        )


@dataclass(frozen=True)
class DistillSplit:
    """Disjoint train/test row sets produced by one seeded split."""

    train: tuple[DistillRow, ...]
    test: tuple[DistillRow, ...]
    seed: int
    fraction: float

    def __post_init__(self) -> None:
        train_ids = {row.id for row in self.train}
        test_ids = {row.id for row in self.test}
        overlap = train_ids & test_ids
        if overlap:
            raise DistillError(f"train/test overlap on ids {sorted(overlap)[:5]}")
        total = len(self.train) + len(self.test)
        if total and abs(len(self.train) - self.fraction * total) > 1:
            raise DistillError(
                f"train size {len(self.train)} is more than one record from "
                f"fraction {self.fraction} of {total}"
            )


@dataclass(frozen=True)
class ExportReport:
    """Accounting for one export: input size, usable rows after dropping
    unparseable teacher labels, and the resulting split sizes."""

    total: int
    usable: int
    excluded_unparseable: int
    n_train: int
    n_test: int


def write_distill_rows(rows: Iterable[DistillRow], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row.to_dict(), ensure_ascii=False) + "\n")


def load_distill_rows(path: str | Path) -> tuple[DistillRow, ...]:
    rows: list[DistillRow] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(DistillRow.from_dict(json.loads(line)))
            except (ValueError, KeyError) as exc:
                raise DistillError(f"{path} line {lineno}: bad row: {exc}") from exc
    return tuple(rows)


def _split_sizes(n: int, fraction: float) -> int:
    """Train-side size: nearest integer to fraction*n, both sides kept
    non-empty."""
    n_train = round(fraction * n)
    return min(max(n_train, 1), n - 1)


def export_teacher_set(
    records: RecordSet,
    teacher_preds: Iterable[Prediction],
    fraction: float,
    seed: int,
    train_path: str | Path,
    test_path: str | Path,
    stratify: bool = False,
) -> tuple[DistillSplit, ExportReport]:
    """Split teacher-labeled records and write train/test JSON-lines.

    The split is a seeded uniform shuffle, unstratified by default; with
    stratify=True the fraction is applied within each teacher label
    instead. File row order follows the input record order, so the same
    seed always produces byte-identical files.
    """
    if not 0 < fraction < 1:
        raise DistillError(f"fraction must be strictly between 0 and 1, got {fraction}")
    by_id = index_by_id(teacher_preds)

    usable: list[tuple[NameRecord, str]] = []
    excluded = 0
    for record in records:
        pred = by_id.get(record.id)
        if pred is None:
            raise AlignError(f"record {record.id!r} has no teacher prediction")
        if pred.label == UNPARSEABLE:
            excluded += 1
            continue
        usable.append((record, pred.label))
    if len(usable) < _MIN_USABLE:
        raise DistillError(
            f"only {len(usable)} usable records after excluding unparseable "
            f"teacher labels, need {_MIN_USABLE}"
        )

    rng = random.Random(seed)
    train_ids: set[str] = set()
    if stratify:
        groups: dict[str, list[tuple[NameRecord, str]]] = {}
        for item in usable:
            groups.setdefault(item[1], []).append(item)
        for label in sorted(groups):
            shuffled = seeded_permutation(groups[label], rng)
            take = _split_sizes(len(shuffled), fraction) if len(shuffled) > 1 else len(shuffled)
            train_ids.update(record.id for record, _ in shuffled[:take])
    else:
        shuffled = seeded_permutation(usable, rng)
        take = _split_sizes(len(shuffled), fraction)
        train_ids.update(record.id for record, _ in shuffled[:take])

    train_rows: list[DistillRow] = []
    test_rows: list[DistillRow] = []
    for record, label in usable:
        if record.id in train_ids:
            train_rows.append(
                DistillRow(
                    id=record.id,
                    name=record.display_name(),
                    geography=dict(record.geography),
                    label=label,
                )
            )
        else:
            test_rows.append(
                DistillRow(
                    id=record.id,
                    name=record.display_name(),
                    geography=dict(record.geography),
                    label=label,
                    truth=record.truth_label,
                )
            )

    split = DistillSplit(
        train=tuple(train_rows), test=tuple(test_rows), seed=seed, fraction=fraction
    )
    write_distill_rows(split.train, train_path)
    write_distill_rows(split.test, test_path)
    report = ExportReport(
        total=len(records),
        usable=len(usable),
        excluded_unparseable=excluded,
        n_train=len(train_rows),
        n_test=len(test_rows),
    )
    return split, report


@dataclass(frozen=True)
class DistillReport:
    """Teacher, zero-shot student, and fine-tuned student accuracies on
    the test split's truth labels, the fine-tuned-minus-teacher gap in
    percentage points, and fine-tuned agreement with the teacher."""

    teacher_accuracy: float
    base_accuracy: float
    finetuned_accuracy: float
    gap: float
    agreement: float
    n_test: int
    n_scored: int

    def to_dict(self) -> dict[str, float | int]:
        return {
            "teacher_accuracy": self.teacher_accuracy,
            "base_accuracy": self.base_accuracy,
            "finetuned_accuracy": self.finetuned_accuracy,
            "gap": self.gap,
            "agreement": self.agreement,
            "n_test": self.n_test,
            "n_scored": self.n_scored,
        }


def load_student_predictions(path: str | Path) -> dict[str, str]:
    """Read a student prediction file: JSON-lines of {"id", "label"}."""
    labels: dict[str, str] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
                record_id = str(payload["id"])
                label = str(payload["label"])
            except (ValueError, KeyError) as exc:
                raise DistillError(f"{path} line {lineno}: bad row: {exc}") from exc
            if record_id in labels:
                raise DistillError(f"{path} line {lineno}: duplicate id {record_id!r}")
            labels[record_id] = label
    return labels


def _as_label_map(preds: str | Path | Mapping[str, str]) -> Mapping[str, str]:
    if isinstance(preds, (str, Path)):
        return load_student_predictions(preds)
    return preds


def evaluate_student(
    split: DistillSplit,
    base_preds: str | Path | Mapping[str, str],
    finetuned_preds: str | Path | Mapping[str, str],
    teacher_preds: Mapping[str, str] | None = None,
) -> DistillReport:
    """Score student prediction files against the test split.

    Accuracies use only test rows that carry truth; agreement with the
    teacher uses every test row. Missing ids raise AlignError.
    """
    base = _as_label_map(base_preds)
    finetuned = _as_label_map(finetuned_preds)

    def student_label(labels: Mapping[str, str], row: DistillRow, which: str) -> str:
        try:
            return labels[row.id]
        except KeyError:
            raise AlignError(f"{which} predictions missing test id {row.id!r}") from None

    def teacher_label(row: DistillRow) -> str:
        if teacher_preds is None:
            return row.label
        try:
            return teacher_preds[row.id]
        except KeyError:
            raise AlignError(f"teacher predictions missing test id {row.id!r}") from None

    scored = 0
    teacher_hits = 0
    base_hits = 0
    finetuned_hits = 0
    agree = 0
    for row in split.test:
        t_label = teacher_label(row)
        b_label = student_label(base, row, "base")
        f_label = student_label(finetuned, row, "finetuned")
        if f_label == t_label:
            agree += 1
        if row.truth is None:
            continue
        scored += 1
        teacher_hits += t_label == row.truth
        base_hits += b_label == row.truth
        finetuned_hits += f_label == row.truth
    if not split.test:
        raise DistillError("test split is empty")
    if scored == 0:
        raise DistillError("no test rows carry truth labels")

    teacher_acc = teacher_hits / scored
    base_acc = base_hits / scored
    finetuned_acc = finetuned_hits / scored
    return DistillReport(
        teacher_accuracy=teacher_acc,
        base_accuracy=base_acc,
        finetuned_accuracy=finetuned_acc,
        gap=100.0 * (finetuned_acc - teacher_acc),
        agreement=agree / len(split.test),
        n_test=len(split.test),
        n_scored=scored,
    )
