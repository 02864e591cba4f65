"""Prompt templates and deterministic prompt construction.

A template is plain text with one component per line. Lines may carry the
placeholders {name}, {location}, {categories}, {age}, {party}, {gender},
{zip}. At build time a line is dropped when any of its placeholders refers
to a feature the PromptConfig disables; surviving lines are filled and
joined with single spaces into one prompt string. Templates live in a
registry keyed by id so alternative phrasings can be loaded from a
directory of text files and compared.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import PromptError
from ..records import CategoryScheme, NameRecord

DEFAULT_TEMPLATE_ID = "baseline"

EXTRA_FEATURES = ("age", "party", "zip", "gender")

_PLACEHOLDERS = ("name", "location", "categories", "age", "party", "gender", "zip")
_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")

_BASELINE_TEMPLATE = """\
Classify the race/ethnicity of this person based on their name and location.
Name: {name}.
Location: {location}.
Age: {age}.
Party registration: {party}.
Gender: {gender}.
ZIP code: {zip}.
Return only one of: {categories}.
"""


def _placeholders_in(line: str) -> tuple[str, ...]:
    return tuple(m.group(1) for m in _PLACEHOLDER_RE.finditer(line))


def _validate_template(template_id: str, text: str) -> None:
    for name in _placeholders_in(text):
        if name not in _PLACEHOLDERS:
            raise PromptError(
                f"template {template_id!r} uses unknown placeholder {{{name}}}"
            )


class TemplateRegistry:
    """Named prompt templates; ships with the built-in baseline."""

    def __init__(self) -> None:
        self._templates: dict[str, str] = {}
        self.register(DEFAULT_TEMPLATE_ID, _BASELINE_TEMPLATE)

    @classmethod
    def from_dir(cls, path: str | Path) -> "TemplateRegistry":
        """Load every *.txt file in a directory; the id is the file stem."""
        registry = cls()
        root = Path(path)
        if not root.is_dir():
            raise PromptError(f"template directory {root} does not exist")
        for file in sorted(root.glob("*.txt")):
            registry.register(file.stem, file.read_text(encoding="utf-8"))
        return registry

    def register(self, template_id: str, text: str) -> None:
        _validate_template(template_id, text)
        self._templates[template_id] = text

    def get(self, template_id: str) -> str:
        try:
            return self._templates[template_id]
        except KeyError:
            raise PromptError(f"unknown template id {template_id!r}") from None

    def ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._templates))

    def __contains__(self, template_id: str) -> bool:
        return template_id in self._templates


_DEFAULT_REGISTRY = TemplateRegistry()


@dataclass(frozen=True)
class PromptConfig:
    """Which record features go into the prompt, and from which template.

    extra_features accepts age, party, zip, gender, or the shorthand all.
    """

    scheme: CategoryScheme
    name_mode: str = "full"
    include_geo: bool = True
    geo_level: str | None = None
    extra_features: frozenset[str] = field(default_factory=frozenset)
    template_id: str = DEFAULT_TEMPLATE_ID

    def __post_init__(self) -> None:
        if self.name_mode not in ("full", "surname_only"):
            raise PromptError(f"name_mode must be full or surname_only, got {self.name_mode!r}")
        extras = frozenset(self.extra_features)
        unknown = extras - set(EXTRA_FEATURES) - {"all"}
        if unknown:
            raise PromptError(f"unknown extra features: {sorted(unknown)}")
        object.__setattr__(self, "extra_features", extras)
        if self.include_geo and not self.geo_level:
            raise PromptError("include_geo requires a geo_level")

    @property
    def enabled_extras(self) -> frozenset[str]:
        if "all" in self.extra_features:
            return frozenset(EXTRA_FEATURES)
        return self.extra_features


def _feature_value(record: NameRecord, cfg: PromptConfig, name: str) -> str:
    """Resolve one placeholder; a missing value is a PromptError naming it."""
    if name == "name":
        surname_only = cfg.name_mode == "surname_only"
        value = record.display_name(surname_only=surname_only)
        if not value:
            raise PromptError(f"record {record.id!r} has no name")
        return value
    if name == "categories":
        return ", ".join(cfg.scheme.labels)
    if name == "location":
        value = record.geography.get(cfg.geo_level or "", "")
        if not value:
            raise PromptError(
                f"record {record.id!r} has no geography at level {cfg.geo_level!r}"
            )
        return value
    if name == "zip":
        value = record.geography.get("zip", "")
        if not value:
            raise PromptError(f"record {record.id!r} has no zip")
        return value
    if name == "age":
        if record.age is None:
            raise PromptError(f"record {record.id!r} has no age")
        return str(record.age)
    if name == "party":
        if not record.party:
            raise PromptError(f"record {record.id!r} has no party")
        return record.party
    if name == "gender":
        if not record.gender:
            raise PromptError(f"record {record.id!r} has no gender")
        return record.gender
    raise PromptError(f"unknown placeholder {{{name}}}")


def build_prompt(
    record: NameRecord,
    cfg: PromptConfig,
    registry: TemplateRegistry | None = None,
) -> str:
    """Render the configured template for one record.

    Deterministic: same record and config always yield the same string,
    with no trailing whitespace.
    """
    registry = registry if registry is not None else _DEFAULT_REGISTRY
    template = registry.get(cfg.template_id)

    enabled = {"name", "categories"}
    if cfg.include_geo:
        enabled.add("location")
    enabled |= cfg.enabled_extras

    parts: list[str] = []
    for raw_line in template.splitlines():
        line = raw_line.strip()
        if not line:
            continue
        names = _placeholders_in(line)
        if any(n not in enabled for n in names):
            continue
        for n in names:
            line = line.replace("{" + n + "}", _feature_value(record, cfg, n))
        parts.append(line)
    return " ".join(parts).strip()
