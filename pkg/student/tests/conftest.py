"""Shared fixtures: a 3-label scheme and a synthetic separable task.

The task plants a marker token as the first name; the marker alone
determines the label, and no marker shares characters positionally with
a label string, so any accuracy above chance demonstrates that the model
reads the input rather than memorizing label frequencies.
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from ethno_student import LabelScheme, TrainerConfig

MARKERS = {"Tokara": "Red", "Velmin": "Blue", "Ossek": "Gold"}

TEMPLATE = "Name: {name}.\nOne of: {categories}.\n"


@pytest.fixture()
def scheme() -> LabelScheme:
    return LabelScheme(
        name="toy",
        labels=("Red", "Blue", "Gold"),
        aliases={"Crimson": "Red", "Navy": "Blue"},
    )


def small_config(**overrides) -> TrainerConfig:
    fields: dict = dict(
        base_model_id="toy-base-v1",
        rank=4,
        learning_rate=5e-3,
        epochs=20,
        max_sequence_length=64,
        seed=7,
        prompt_template=TEMPLATE,
    )
    fields.update(overrides)
    return TrainerConfig(**fields)


def marked_rows(n_per_label: int, start: int = 0, truth: bool = False) -> list[dict]:
    """Rows whose label is determined by the leading marker token."""
    rows = []
    i = start
    for marker, label in MARKERS.items():
        for _ in range(n_per_label):
            row: dict = {
                "id": f"x{i:05d}",
                "name": f"{marker} A{i:05d}",
                "geography": {},
                "label": label,
            }
            if truth:
                row["truth"] = label
            rows.append(row)
            i += 1
    return rows


def write_rows(rows: list[dict], path: Path) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path
