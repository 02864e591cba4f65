"""Engine-agnostic per-record prediction and its JSON-lines serialization.

Both classification engines (and fine-tuned students) emit the same shape,
so the whole evaluation path is engine-blind.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import AlignError

# Sentinel label for responses that cannot be mapped to a scheme category.
# Scored as incorrect everywhere (conservative).
UNPARSEABLE = "UNPARSEABLE"


@dataclass(frozen=True)
class Prediction:
    """One record's classification plus provenance.

    engine is "bisg", "llm", or "student". prompt_hash is the request cache
    key for LLM predictions and empty otherwise. probs carries the posterior
    for engines that produce one.
    """

    record_id: str
    label: str
    engine: str
    raw_response: str = ""
    model_id: str = ""
    prompt_hash: str = ""
    cached: bool = False
    probs: tuple[float, ...] | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        doc: dict = {
            "id": self.record_id,
            "label": self.label,
            "raw_response": self.raw_response,
            "engine": self.engine,
            "model_id": self.model_id,
            "prompt_hash": self.prompt_hash,
            "cached": self.cached,
        }
        if self.probs is not None:
            doc["probs"] = list(self.probs)
        if self.error is not None:
            doc["error"] = self.error
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Prediction":
        probs = doc.get("probs")
        return cls(
            record_id=str(doc["id"]),
            label=str(doc["label"]),
            engine=str(doc.get("engine", "")),
            raw_response=str(doc.get("raw_response", "")),
            model_id=str(doc.get("model_id", "")),
            prompt_hash=str(doc.get("prompt_hash", "")),
            cached=bool(doc.get("cached", False)),
            probs=None if probs is None else tuple(float(p) for p in probs),
            error=doc.get("error"),
        )


def write_predictions(preds: Iterable[Prediction], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for pred in preds:
            fh.write(json.dumps(pred.to_dict(), ensure_ascii=False) + "\n")


def read_predictions(path: str | Path) -> list[Prediction]:
    path = Path(path)
    preds: list[Prediction] = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                preds.append(Prediction.from_dict(json.loads(line)))
    return preds


def index_by_id(preds: Sequence[Prediction]) -> dict[str, Prediction]:
    """Map record id to prediction, rejecting duplicates."""
    by_id: dict[str, Prediction] = {}
    for pred in preds:
        if pred.record_id in by_id:
            raise AlignError(f"duplicate prediction for id {pred.record_id!r}")
        by_id[pred.record_id] = pred
    return by_id
