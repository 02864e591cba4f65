"""Decoded-output repair with a three-step ladder.

Greedy decoding should emit exactly one label, but small models drift.
Repair proceeds strictly in order and stops at the first hit:

  R1  exact label match after trimming, case-folding, and stripping
      surrounding punctuation;
  R2  alias match under the same normalizations;
  R3  exactly one label appears as a whole-word substring of the
      whitespace-collapsed output.

Anything else, including outputs mentioning several labels, maps to the
UNPARSEABLE sentinel. Repair is total: it never raises.
"""

from __future__ import annotations

import re
import string

from .data import LabelScheme

UNPARSEABLE = "UNPARSEABLE"

_STRIP_CHARS = string.punctuation + string.whitespace


def repair_label(text: str, scheme: LabelScheme) -> str:
    """Map decoded text to a canonical label or UNPARSEABLE."""
    trimmed = text.strip().casefold()
    stripped = trimmed.strip(_STRIP_CHARS)

    for label in scheme.labels:
        folded = label.casefold()
        if trimmed == folded or stripped == folded:
            return label

    for alias, target in scheme.aliases.items():
        folded = alias.casefold()
        if trimmed == folded or stripped == folded:
            return target

    collapsed = " ".join(text.split())
    found: list[str] = []
    for label in scheme.labels:
        pattern = r"(?<!\w)" + re.escape(label) + r"(?!\w)"
        if re.search(pattern, collapsed, re.IGNORECASE):
            found.append(label)
    if len(found) == 1:
        return found[0]
    return UNPARSEABLE
