"""Prompt rendering for train and inference sequences.

The template grammar matches the upstream classifier's: plain text, one
component per line, with the placeholders {name}, {location},
{categories}, {age}, {party}, {gender}, {zip}. Exported rows carry only
a name and a geography mapping, so a line is dropped when any of its
placeholders has no value for the row; surviving lines are filled and
joined with single spaces. {name} and {categories} always resolve, so a
template restricted to those renders fully for every row.
"""

from __future__ import annotations

import re

from .data import LabelScheme, Row
from .errors import ConfigError

DEFAULT_TEMPLATE = """\
Classify the race/ethnicity of this person based on their name and location.
Name: {name}.
Location: {location}.
ZIP code: {zip}.
Return only one of: {categories}.
"""

_PLACEHOLDERS = ("name", "location", "categories", "age", "party", "gender", "zip")
_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")


def _placeholders_in(line: str) -> tuple[str, ...]:
    return tuple(m.group(1) for m in _PLACEHOLDER_RE.finditer(line))


def validate_template(text: str) -> None:
    """Reject templates that use placeholders outside the grammar."""
    if not text.strip():
        raise ConfigError("prompt template is empty")
    for name in _placeholders_in(text):
        if name not in _PLACEHOLDERS:
            raise ConfigError(f"template uses unknown placeholder {{{name}}}")


def _feature_value(row: Row, scheme: LabelScheme, name: str) -> str | None:
    """Resolve one placeholder; None means the row lacks the feature."""
    if name == "name":
        return row.name or None
    if name == "categories":
        return ", ".join(scheme.labels)
    if name == "location":
        values = [row.geography[key] for key in sorted(row.geography) if key != "zip"]
        values = [v for v in values if v]
        return ", ".join(values) or None
    if name == "zip":
        return row.geography.get("zip") or None
    # age, party, gender never appear in exported rows.
    return None


def render_prompt(row: Row, scheme: LabelScheme, template: str) -> str:
    """Render the template for one row; deterministic, no trailing space."""
    parts: list[str] = []
    for raw_line in template.splitlines():
        line = raw_line.strip()
        if not line:
            continue
        names = _placeholders_in(line)
        values = {n: _feature_value(row, scheme, n) for n in names}
        if any(v is None for v in values.values()):
            continue
        for n, v in values.items():
            line = line.replace("{" + n + "}", v or "")
        parts.append(line)
    return " ".join(parts).strip()
