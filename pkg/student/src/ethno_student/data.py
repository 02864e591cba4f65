"""Input file formats: label schemes and teacher-labeled JSON-lines rows.

These mirror the producing toolkit's documented formats exactly; nothing
is imported from it. A scheme is a JSON object {"name", "labels",
"aliases"}; a data row is one JSON object per line with "id", "name",
"geography" (level -> unit), "label", and optionally "truth".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .errors import DataError, TrainError


@dataclass(frozen=True)
class LabelScheme:
    """Closed label set with optional alias spellings."""

    name: str
    labels: tuple[str, ...]
    aliases: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.labels) < 2:
            raise DataError(f"scheme {self.name!r} needs at least 2 labels")
        folded = [label.casefold() for label in self.labels]
        if len(set(folded)) != len(folded):
            raise DataError(f"scheme {self.name!r} has case-insensitively duplicate labels")
        for alias, target in self.aliases.items():
            if target not in self.labels:
                raise DataError(
                    f"scheme {self.name!r}: alias {alias!r} maps to unknown label {target!r}"
                )


def load_scheme(path: str | Path) -> LabelScheme:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise DataError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or "labels" not in payload:
        raise DataError(f"{path}: expected an object with a 'labels' array")
    return LabelScheme(
        name=str(payload.get("name", path.stem)),
        labels=tuple(str(label) for label in payload["labels"]),
        aliases={str(k): str(v) for k, v in dict(payload.get("aliases") or {}).items()},
    )


@dataclass(frozen=True)
class Row:
    """One teacher-labeled example."""

    id: str
    name: str
    geography: Mapping[str, str]
    label: str
    truth: str | None = None


def load_rows(path: str | Path) -> tuple[Row, ...]:
    """Read JSON-lines rows; blank lines are skipped, ids must be unique."""
    path = Path(path)
    rows: list[Row] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
                row = Row(
                    id=str(payload["id"]),
                    name=str(payload["name"]),
                    geography={
                        str(k): str(v)
                        for k, v in dict(payload.get("geography") or {}).items()
                    },
                    label=str(payload["label"]),
                    truth=str(payload["truth"]) if payload.get("truth") is not None else None,
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise DataError(f"{path} line {lineno}: bad row: {exc}") from exc
            if row.id in seen:
                raise DataError(f"{path} line {lineno}: duplicate id {row.id!r}")
            seen.add(row.id)
            rows.append(row)
    return tuple(rows)


def check_train_labels(rows: tuple[Row, ...], scheme: LabelScheme, source: str) -> None:
    """Format check before training: every label must be a scheme member."""
    if not rows:
        raise TrainError(f"{source}: no rows to train on")
    allowed = set(scheme.labels)
    for row in rows:
        if row.label not in allowed:
            raise TrainError(
                f"{source}: row {row.id!r} has label {row.label!r} "
                f"absent from scheme {scheme.name!r}"
            )
