"""Shared fixtures: a four-label scheme and synthetic record builders."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from ethno import CategoryScheme, NameRecord, RecordSet

US4_LABELS = ("White", "Black", "Hispanic", "Asian")

# Name pools keyed by label; the synthetic truth assignment cycles through
# them so record sets are balanced and deterministic.
_GIVEN = {
    "White": ("James", "Mary", "Robert", "Linda"),
    "Black": ("Darnell", "Keisha", "Tyrone", "Latoya"),
    "Hispanic": ("Maria", "Jose", "Ana", "Carlos"),
    "Asian": ("Wei", "Mei", "Hiroshi", "Anh"),
}
_SURNAME = {
    "White": ("Miller", "Smith", "Olson", "Baker"),
    "Black": ("Washington", "Jackson", "Booker", "Freeman"),
    "Hispanic": ("Lopez", "Garcia", "Hernandez", "Martinez"),
    "Asian": ("Chen", "Wang", "Tanaka", "Nguyen"),
}
_COUNTIES = (
    "Miami-Dade County, Florida",
    "Duval County, Florida",
    "Broward County, Florida",
    "Orange County, Florida",
)


@pytest.fixture
def us4() -> CategoryScheme:
    return CategoryScheme(
        name="us4",
        labels=US4_LABELS,
        aliases={"African American": "Black", "Latino": "Hispanic", "Caucasian": "White"},
    )


@pytest.fixture
def us4_path(tmp_path: Path, us4: CategoryScheme) -> Path:
    path = tmp_path / "us4.json"
    path.write_text(
        json.dumps(
            {"name": us4.name, "labels": list(us4.labels), "aliases": dict(us4.aliases)}
        ),
        encoding="utf-8",
    )
    return path


def make_record(
    i: int,
    label: str,
    county: str | None = None,
    income: float | None = None,
    zip_code: str | None = None,
) -> NameRecord:
    given = _GIVEN[label][i % 4]
    surname = _SURNAME[label][(i // 4) % 4]
    geography = {"county": county or _COUNTIES[i % 4]}
    if zip_code:
        geography["zip"] = zip_code
    return NameRecord(
        id=f"r{label[0]}{i}",
        surname=surname,
        given_names=given,
        geography=geography,
        age=25 + (i % 40),
        gender="F" if i % 2 else "M",
        party=("DEM", "REP", "NPA")[i % 3],
        income=income,
        truth_label=label,
    )


def make_record_set(
    scheme: CategoryScheme, per_label: int, incomes: bool = False
) -> RecordSet:
    records = []
    for label in scheme.labels:
        for i in range(per_label):
            income = 30_000.0 + 1_000.0 * (i % 50) if incomes else None
            records.append(make_record(i, label, income=income))
    return RecordSet(records=tuple(records), scheme=scheme, source="synthetic")


@pytest.fixture
def balanced_80(us4: CategoryScheme) -> RecordSet:
    return make_record_set(us4, 20)
