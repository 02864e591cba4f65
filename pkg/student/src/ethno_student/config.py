"""Trainer configuration: a JSON file, validated, with a stable digest.

The digest is a SHA-256 over the canonical JSON encoding of the config
fields, so two runs with the same configuration produce the same digest
regardless of key order in the source file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import ConfigError
from .prompts import validate_template


@dataclass(frozen=True)
class TrainerConfig:
    """Everything that determines a training run besides the data."""

    base_model_id: str
    rank: int
    learning_rate: float
    epochs: int
    max_sequence_length: int
    seed: int
    prompt_template: str

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ConfigError(f"rank must be >= 1, got {self.rank}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_sequence_length < 8:
            raise ConfigError(
                f"max_sequence_length must be >= 8, got {self.max_sequence_length}"
            )
        if not self.base_model_id:
            raise ConfigError("base_model_id must be non-empty")
        validate_template(self.prompt_template)

    def to_dict(self) -> dict[str, object]:
        return asdict(self)

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: str | Path) -> TrainerConfig:
    """Load a TrainerConfig from a JSON object file."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    required = {
        "base_model_id", "rank", "learning_rate", "epochs",
        "max_sequence_length", "seed", "prompt_template",
    }
    missing = required - payload.keys()
    if missing:
        raise ConfigError(f"{path}: missing fields: {sorted(missing)}")
    extra = payload.keys() - required
    if extra:
        raise ConfigError(f"{path}: unknown fields: {sorted(extra)}")
    try:
        return TrainerConfig(
            base_model_id=str(payload["base_model_id"]),
            rank=int(payload["rank"]),
            learning_rate=float(payload["learning_rate"]),
            epochs=int(payload["epochs"]),
            max_sequence_length=int(payload["max_sequence_length"]),
            seed=int(payload["seed"]),
            prompt_template=str(payload["prompt_template"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: bad field value: {exc}") from exc
