"""On-disk response cache keyed by a digest of the full request vector.

Layout: one file per request, <digest>.json, holding the canonical request
fields, the raw response text, and a timestamp. Writes go through a
temporary file and an atomic rename, so concurrent writers of distinct
keys never interleave and duplicate writes of the same key are idempotent
(last writer wins with identical content).
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

_SEP = "\x1f"


def cache_key(
    model_id: str,
    template_id: str,
    prompt: str,
    temperature: float,
    reasoning_level: str,
) -> str:
    """SHA-256 digest of the unit-separator-joined request vector.

    The temperature is canonicalized through repr(float(...)) so 0, 0.0,
    and "0" hash identically on every platform.
    """
    payload = _SEP.join(
        [model_id, template_id, prompt, repr(float(temperature)), reasoning_level]
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CacheEntry:
    """One cached response plus the request that produced it."""

    request: dict[str, object]
    raw_response: str
    timestamp: str

    @classmethod
    def build(
        cls,
        model_id: str,
        template_id: str,
        prompt: str,
        temperature: float,
        reasoning_level: str,
        raw_response: str,
    ) -> "CacheEntry":
        request = {
            "model_id": model_id,
            "template_id": template_id,
            "prompt": prompt,
            "temperature": float(temperature),
            "reasoning_level": reasoning_level,
        }
        stamp = datetime.now(timezone.utc).isoformat()
        return cls(request=request, raw_response=raw_response, timestamp=stamp)


class ResponseCache:
    """Directory-backed cache of CacheEntry files named <digest>.json."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._counter = 0
        self._lock = threading.Lock()

    def path_for(self, digest: str) -> Path:
        return self.root / f"{digest}.json"

    def get(self, digest: str) -> CacheEntry | None:
        """Return the cached entry, or None on miss or unreadable file."""
        path = self.path_for(digest)
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
            return CacheEntry(
                request=payload["request"],
                raw_response=payload["raw_response"],
                timestamp=payload["timestamp"],
            )
        except (OSError, ValueError, KeyError):
            return None

    def put(self, digest: str, entry: CacheEntry) -> None:
        """Write one entry atomically (temp file, then rename)."""
        payload = {
            "request": entry.request,
            "raw_response": entry.raw_response,
            "timestamp": entry.timestamp,
        }
        with self._lock:
            self._counter += 1
            serial = self._counter
        tmp = self.root / f".tmp-{os.getpid()}-{serial}-{digest}.json"
        tmp.write_text(
            json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
        os.replace(tmp, self.path_for(digest))

    def __contains__(self, digest: str) -> bool:
        return self.path_for(digest).is_file()

    def __len__(self) -> int:
        return sum(1 for _ in self.root.glob("*.json"))
