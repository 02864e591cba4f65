"""Seeded stratified sampling with a portable, documented draw algorithm.

Replication across implementations matters more than raw speed here, so the
generator and selection procedure are pinned exactly:

  * generator: Mersenne Twister as exposed by ``random.Random(seed)``; only
    ``random()`` is consumed (Python guarantees that sequence stable across
    versions for a given seed);
  * strata are processed in scheme label order (non-label strata
    lexicographically), sharing the single generator;
  * within a stratum of m records (input order) a partial Fisher-Yates pass
    draws n without replacement: for slot i, j = i + floor(random() * (m - i)),
    swap positions i and j, emit position i.

Identical (records, field, n, seed) therefore give byte-identical samples on
any conforming implementation.
"""

from __future__ import annotations

import math
import random

from .errors import SampleError
from .records import NameRecord, RecordSet


def stratum_value(record: NameRecord, field: str) -> str | None:
    """The stratum key for a record: a record field or a geography level."""
    if field in ("truth", "truth_label"):
        return record.truth_label
    if field == "gender":
        return record.gender
    if field == "party":
        return record.party
    if field == "age":
        return None if record.age is None else str(record.age)
    return record.geography.get(field)


def seeded_permutation(items: list, rng: random.Random) -> list:
    """Full Fisher-Yates shuffle driven only by rng.random() draws."""
    pool = list(items)
    for i in range(len(pool) - 1):
        j = i + math.floor(rng.random() * (len(pool) - i))
        pool[i], pool[j] = pool[j], pool[i]
    return pool


def _draw_without_replacement(pool: list, n: int, rng: random.Random) -> list:
    picked = list(pool)
    for i in range(n):
        j = i + math.floor(rng.random() * (len(picked) - i))
        picked[i], picked[j] = picked[j], picked[i]
    return picked[:n]


def stratified_sample(
    record_set: RecordSet, stratum_field: str, n_per_stratum: int, seed: int
) -> RecordSet:
    """Draw exactly n_per_stratum records from every stratum, without
    replacement, deterministically under seed.

    Output order: strata in scheme order (labels) or lexicographic order
    (other fields), records within a stratum in sampled order. Raises
    SampleError when a record lacks the stratum field or a stratum holds
    fewer than n_per_stratum records.
    """
    if n_per_stratum < 0:
        raise SampleError("n_per_stratum must be >= 0")

    strata: dict[str, list[NameRecord]] = {}
    for rec in record_set:
        value = stratum_value(rec, stratum_field)
        if value is None or value == "":
            raise SampleError(f"record {rec.id!r} has no value for stratum field {stratum_field!r}")
        strata.setdefault(value, []).append(rec)

    labels = record_set.scheme.labels
    if set(strata) <= set(labels):
        ordered = [label for label in labels if label in strata]
    else:
        ordered = sorted(strata)

    for name in ordered:
        size = len(strata[name])
        if size < n_per_stratum:
            raise SampleError(
                f"stratum {name!r} has {size} records, fewer than n_per_stratum={n_per_stratum}"
            )

    rng = random.Random(seed)
    sampled: list[NameRecord] = []
    for name in ordered:
        sampled.extend(_draw_without_replacement(strata[name], n_per_stratum, rng))

    source = (
        f"{record_set.source} [stratified: {n_per_stratum} per {stratum_field!r}, seed={seed}]"
    )
    return RecordSet(records=tuple(sampled), scheme=record_set.scheme, source=source)
