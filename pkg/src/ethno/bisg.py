"""Bayesian surname-geocoding classifier.

Combines a surname prior P(category|surname) with a geography likelihood
P(unit|category) derived from population counts:

    posterior[r]  proportional to  prior[r] * counts[unit][r] / totals[r]

normalized over categories. Unknown surnames back off to the national
marginal (population shares from the geography table), so a posterior is
defined for every record and degrades gracefully to geography-only
evidence. A zero normalizer falls back to the marginal with a degeneracy
flag rather than propagating NaNs into metrics.

Tables are immutable after load; posterior and classify calls are pure and
safe to run concurrently.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .errors import GeoUnknown, TableError
from .predictions import Prediction
from .records import CategoryScheme, NameRecord, normalize_name

_ROW_SUM_SLACK = 1e-6


@dataclass(frozen=True)
class SurnameTable:
    """Lookup-normalized surname -> P(category|surname), plus the national
    marginal over categories."""

    scheme: CategoryScheme
    entries: Mapping[str, tuple[float, ...]]
    marginal: tuple[float, ...]

    def prior(self, lookup_surname: str) -> tuple[float, ...]:
        """Prior for a lookup-normalized surname; marginal when unknown."""
        return self.entries.get(lookup_surname, self.marginal)


@dataclass(frozen=True)
class GeoTable:
    """Geography unit -> population count per category, with per-category
    totals over all units."""

    scheme: CategoryScheme
    counts: Mapping[str, tuple[float, ...]]
    totals: tuple[float, ...]


@dataclass(frozen=True)
class PosteriorVector:
    """Normalized posterior with its argmax (ties -> smallest index).

    degenerate marks the zero-normalizer fallback to the marginal.
    """

    probs: tuple[float, ...]
    mode_index: int
    degenerate: bool = False


def _mode_index(probs: tuple[float, ...]) -> int:
    top = max(probs)
    return next(i for i, p in enumerate(probs) if p == top)


def _resolve_label_columns(header: list[str], scheme: CategoryScheme, path: Path) -> list[int]:
    """Map scheme labels onto header columns (case-insensitive, any order)."""
    folded = [col.strip().casefold() for col in header]
    positions: list[int] = []
    for label in scheme.labels:
        want = label.casefold()
        hits = [i for i, col in enumerate(folded) if col == want]
        if len(hits) != 1:
            raise TableError(
                f"{path}: expected exactly one column for label {label!r}, found {len(hits)}"
            )
        positions.append(hits[0])
    extra = set(range(1, len(header))) - set(positions)
    if extra:
        names = [header[i] for i in sorted(extra)]
        raise TableError(f"{path}: columns {names} do not match scheme {scheme.name!r}")
    return positions


def load_surname_table(path: str | Path, scheme: CategoryScheme, marginal: tuple[float, ...]) -> SurnameTable:
    """Load `surname,<label...>` probability rows; keys stored under lookup
    normalization. Rows must sum to 1 within 1e-6 and are renormalized."""
    path = Path(path)
    entries: dict[str, tuple[float, ...]] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TableError(f"{path}: empty surname table") from None
        positions = _resolve_label_columns(header, scheme, path)
        for rownum, row in enumerate(reader, start=2):
            if not row or not any(cell.strip() for cell in row):
                continue
            key = normalize_name(row[0], "lookup")
            if key in entries:
                raise TableError(f"{path} line {rownum}: duplicate surname {key!r} after normalization")
            try:
                vec = [float(row[i]) for i in positions]
            except (ValueError, IndexError) as exc:
                raise TableError(f"{path} line {rownum}: bad probability row: {exc}") from exc
            if any(p < 0 for p in vec):
                raise TableError(f"{path} line {rownum}: negative probability")
            total = sum(vec)
            if not (1 - _ROW_SUM_SLACK <= total <= 1 + _ROW_SUM_SLACK):
                raise TableError(f"{path} line {rownum}: probabilities sum to {total!r}, not 1")
            entries[key] = tuple(p / total for p in vec)
    return SurnameTable(scheme=scheme, entries=entries, marginal=marginal)


def load_geo_table(path: str | Path, scheme: CategoryScheme) -> GeoTable:
    """Load `unit,<label...>` non-negative count rows."""
    path = Path(path)
    counts: dict[str, tuple[float, ...]] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TableError(f"{path}: empty geography table") from None
        positions = _resolve_label_columns(header, scheme, path)
        for rownum, row in enumerate(reader, start=2):
            if not row or not any(cell.strip() for cell in row):
                continue
            unit = row[0].strip()
            if not unit:
                raise TableError(f"{path} line {rownum}: empty geography unit")
            if unit in counts:
                raise TableError(f"{path} line {rownum}: duplicate geography unit {unit!r}")
            try:
                vec = [float(row[i]) for i in positions]
            except (ValueError, IndexError) as exc:
                raise TableError(f"{path} line {rownum}: bad count row: {exc}") from exc
            if any(c < 0 for c in vec):
                raise TableError(f"{path} line {rownum}: negative count")
            counts[unit] = tuple(vec)
    if not counts:
        raise TableError(f"{path}: geography table has no units")
    totals = tuple(sum(vec[r] for vec in counts.values()) for r in range(len(scheme)))
    if sum(totals) <= 0:
        raise TableError(f"{path}: geography table is all zero")
    return GeoTable(scheme=scheme, counts=counts, totals=totals)


def load_bisg_tables(
    surname_path: str | Path, geo_path: str | Path, scheme: CategoryScheme
) -> tuple[SurnameTable, GeoTable]:
    """Load both tables against one scheme; the surname marginal is the
    geography table's normalized totals."""
    geo = load_geo_table(geo_path, scheme)
    grand = sum(geo.totals)
    marginal = tuple(t / grand for t in geo.totals)
    surnames = load_surname_table(surname_path, scheme, marginal)
    return surnames, geo


def geo_likelihood(table: GeoTable, unit: str) -> tuple[float, ...]:
    """P(unit|category) per category: counts[unit][r] / totals[r], with 0
    where the category total is 0. Raises GeoUnknown for unseen units."""
    if unit not in table.counts:
        raise GeoUnknown(f"geography unit {unit!r} not in table")
    vec = table.counts[unit]
    return tuple(
        0.0 if table.totals[r] == 0 else vec[r] / table.totals[r] for r in range(len(vec))
    )


def bisg_posterior(
    surname: str,
    unit: str | None,
    surnames: SurnameTable,
    geo: GeoTable | None = None,
    scheme: CategoryScheme | None = None,
) -> PosteriorVector:
    """Posterior over categories for one surname at one geography unit.

    unit=None selects surname-only mode: the result is exactly the surname
    prior (or the marginal for unknown surnames). Otherwise the prior is
    multiplied by the geography likelihood and normalized.
    """
    if scheme is not None and scheme != surnames.scheme:
        raise TableError("surname table was loaded against a different scheme")
    if geo is not None and geo.scheme != surnames.scheme:
        raise TableError("surname and geography tables use different schemes")

    prior = surnames.prior(normalize_name(surname, "lookup"))
    if unit is None:
        return PosteriorVector(probs=prior, mode_index=_mode_index(prior))
    if geo is None:
        raise TableError("geography table required unless surname-only mode is selected")

    lik = geo_likelihood(geo, unit)
    unnorm = tuple(p * l for p, l in zip(prior, lik))
    norm = sum(unnorm)
    if norm == 0:
        marginal = surnames.marginal
        return PosteriorVector(probs=marginal, mode_index=_mode_index(marginal), degenerate=True)
    probs = tuple(u / norm for u in unnorm)
    return PosteriorVector(probs=probs, mode_index=_mode_index(probs))


def classify_bisg(
    record: NameRecord,
    surnames: SurnameTable,
    geo: GeoTable | None,
    scheme: CategoryScheme,
    geo_level: str | None,
) -> Prediction:
    """Classify one record to the highest-posterior category.

    geo_level=None selects surname-only mode. Ties break to the smallest
    scheme index. Raises GeoUnknown when the record lacks the level or the
    unit is not in the table.
    """
    unit: str | None = None
    if geo_level is not None:
        unit = record.geography.get(geo_level)
        if not unit:
            raise GeoUnknown(f"record {record.id!r} has no geography at level {geo_level!r}")
    posterior = bisg_posterior(record.surname, unit, surnames, geo, scheme)
    return Prediction(
        record_id=record.id,
        label=scheme.labels[posterior.mode_index],
        engine="bisg",
        model_id="bisg",
        probs=posterior.probs,
    )
