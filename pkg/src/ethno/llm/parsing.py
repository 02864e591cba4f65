"""Constrained-output parsing with a three-step repair ladder.

Responses should be exactly one category label, but models editorialize.
Repair proceeds strictly in order and stops at the first hit:

  R1  exact label match after trimming, case-folding, and stripping
      surrounding punctuation;
  R2  alias match under the same normalizations;
  R3  exactly one label appears as a whole-word substring of the
      whitespace-collapsed response.

Anything else, including responses mentioning several labels, maps to the
UNPARSEABLE sentinel. Parsing is total: it never raises and always returns
a label or UNPARSEABLE.
"""

from __future__ import annotations

import re
import string

from ..predictions import UNPARSEABLE
from ..records import CategoryScheme

_STRIP_CHARS = string.punctuation + string.whitespace


def _candidate_forms(text: str) -> tuple[str, str]:
    """Trimmed and punctuation-stripped case-folds of the response."""
    trimmed = text.strip().casefold()
    return trimmed, trimmed.strip(_STRIP_CHARS)


def parse_response(text: str, scheme: CategoryScheme) -> str:
    """Map a raw model response to a canonical label or UNPARSEABLE."""
    trimmed, stripped = _candidate_forms(text)

    # R1: the response is a label, modulo case and surrounding punctuation.
    # Both forms are compared so labels that themselves end in punctuation
    # still match their verbatim echo.
    for label in scheme.labels:
        folded = label.casefold()
        if trimmed == folded or stripped == folded:
            return label

    # R2: the response is a registered alias.
    for alias, target in scheme.aliases.items():
        folded = alias.casefold()
        if trimmed == folded or stripped == folded:
            return target

    # R3: exactly one label occurs as a whole word somewhere in the text.
    collapsed = " ".join(text.split())
    found: list[str] = []
    for label in scheme.labels:
        pattern = r"(?<!\w)" + re.escape(label) + r"(?!\w)"
        if re.search(pattern, collapsed, re.IGNORECASE):
            found.append(label)
    if len(found) == 1:
        return found[0]
    return UNPARSEABLE
