"""Domain types: person records, category schemes, and name normalization.

All types are immutable after construction; operations here are pure and
safe to call from multiple threads.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Literal, Mapping

from .errors import NormalizeError, SchemeError

_WS = re.compile(r"\s+")

# Trailing generational suffixes stripped from lookup keys (US census-file
# join convention; display form keeps them).
_GENERATIONAL_SUFFIXES = {"JR", "SR", "II", "III", "IV"}

# Latin letters that survive NFKD undecomposed; folded explicitly so lookup
# keys stay ASCII.
_ASCII_FOLD = {
    "Æ": "AE", "æ": "ae",   # Æ æ
    "Ø": "O", "ø": "o",     # Ø ø
    "Ð": "D", "ð": "d",     # Ð ð
    "Đ": "D", "đ": "d",     # Đ đ
    "Þ": "TH", "þ": "th",   # Þ þ
    "ß": "ss",                    # ß
    "Ł": "L", "ł": "l",     # Ł ł
    "Œ": "OE", "œ": "oe",   # Œ œ
}


def normalize_name(raw: str, purpose: Literal["display", "lookup"] = "display") -> str:
    """Normalize a name part for prompts (display) or table joins (lookup).

    display: trim and collapse internal whitespace; case and diacritics are
    preserved (this is the form sent to language models).

    lookup: additionally upper-case, strip diacritics to ASCII, drop
    apostrophes and periods, and strip trailing generational suffixes
    (JR, SR, II, III, IV). Idempotent.

    Raises NormalizeError if the result is empty.
    """
    text = _WS.sub(" ", raw).strip()
    if purpose == "lookup":
        text = text.upper()
        text = "".join(_ASCII_FOLD.get(ch, ch) for ch in text)
        text = unicodedata.normalize("NFKD", text)
        text = "".join(ch for ch in text if not unicodedata.combining(ch))
        text = text.replace("'", "").replace("’", "").replace(".", "")
        text = text.encode("ascii", "ignore").decode("ascii")
        text = _WS.sub(" ", text).strip()
        # Strip trailing generational suffixes, but never the whole name:
        # a bare "JR" is somebody's entire surname entry.
        tokens = text.split(" ")
        while len(tokens) > 1 and tokens[-1] in _GENERATIONAL_SUFFIXES:
            tokens.pop()
        text = " ".join(tokens)
    if not text:
        raise NormalizeError(f"name {raw!r} normalized to an empty string")
    return text


@dataclass(frozen=True)
class CategoryScheme:
    """An ordered, named set of target labels with an alias table.

    Label order is significant: it drives deterministic tie-breaking and the
    order of strata and report rows. Aliases map alternative spellings
    (case-insensitively) onto canonical labels.
    """

    name: str
    labels: tuple[str, ...]
    aliases: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.labels) < 2:
            raise SchemeError(f"scheme {self.name!r} needs at least 2 labels")
        folded = [label.casefold() for label in self.labels]
        if len(set(folded)) != len(folded):
            dupes = sorted({f for f in folded if folded.count(f) > 1})
            raise SchemeError(f"scheme {self.name!r} has case-fold duplicate labels: {dupes}")
        for alias, target in self.aliases.items():
            if target not in self.labels:
                raise SchemeError(
                    f"scheme {self.name!r}: alias {alias!r} maps to unknown label {target!r}"
                )

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def canonical(self, text: str) -> str | None:
        """Resolve text to a canonical label via case-fold match, then aliases."""
        folded = text.strip().casefold()
        for label in self.labels:
            if label.casefold() == folded:
                return label
        for alias, target in self.aliases.items():
            if alias.casefold() == folded:
                return target
        return None


def load_scheme(path: str | Path) -> CategoryScheme:
    """Load a CategoryScheme from a JSON document.

    Expected shape: {"name": str, "labels": [str, ...], "aliases": {str: str}}.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemeError(f"cannot read scheme file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemeError(f"scheme file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemeError(f"scheme file {path} must contain a JSON object")
    labels = doc.get("labels")
    if not isinstance(labels, list) or not all(isinstance(l, str) and l.strip() for l in labels):
        raise SchemeError(f"scheme file {path}: 'labels' must be a list of non-empty strings")
    aliases = doc.get("aliases", {})
    if not isinstance(aliases, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in aliases.items()
    ):
        raise SchemeError(f"scheme file {path}: 'aliases' must map strings to strings")
    name = doc.get("name") or path.stem
    return CategoryScheme(name=str(name), labels=tuple(l.strip() for l in labels), aliases=dict(aliases))


@dataclass(frozen=True)
class NameRecord:
    """One person: name parts, geography, optional metadata, optional truth.

    geography maps a level name (county, state, zip, region, ...) to its
    value for this record. income, when present, is the neighborhood median
    household income in US dollars (attached for bias audits).
    """

    id: str
    surname: str
    given_names: str = ""
    geography: Mapping[str, str] = field(default_factory=dict)
    age: int | None = None
    gender: str | None = None
    party: str | None = None
    income: float | None = None
    truth_label: str | None = None

    def display_name(self, surname_only: bool = False) -> str:
        """Whitespace-normalized name as sent in prompts."""
        if surname_only or not self.given_names:
            return normalize_name(self.surname, "display")
        return normalize_name(f"{self.given_names} {self.surname}", "display")


@dataclass(frozen=True)
class RecordSet:
    """Ordered, immutable collection of records bound to one scheme."""

    records: tuple[NameRecord, ...]
    scheme: CategoryScheme
    source: str = ""

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for rec in self.records:
            if rec.id in seen:
                raise ValueError(f"duplicate record id {rec.id!r} in set")
            seen.add(rec.id)
            if rec.truth_label is not None and rec.truth_label not in self.scheme.labels:
                raise ValueError(
                    f"record {rec.id!r} truth label {rec.truth_label!r} is not canonical "
                    f"in scheme {self.scheme.name!r}"
                )

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[NameRecord]:
        return iter(self.records)

    def ids(self) -> tuple[str, ...]:
        return tuple(rec.id for rec in self.records)
