"""Bounded-concurrency batch classification with caching and retries.

All prompts are built before any network activity, so template and
feature problems fail the whole run up front. Cached responses are served
without touching the backend; a fully cached batch never needs one at
all. Misses run on a thread pool no wider than the configured concurrency
limit. Transient call failures retry with exponential backoff and jitter;
a record that exhausts its retries yields an UNPARSEABLE prediction with
an error annotation instead of aborting the batch. Output order always
matches input order.
"""

from __future__ import annotations

import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

from ..errors import AdapterError, BatchError
from ..predictions import UNPARSEABLE, Prediction
from ..records import RecordSet
from .backends import Backend, BackendConfig, CallError, get_backend
from .cache import CacheEntry, ResponseCache, cache_key
from .parsing import parse_response
from .prompts import PromptConfig, TemplateRegistry, build_prompt

_BACKOFF_BASE = 0.5
_BACKOFF_JITTER = 0.25


@dataclass(frozen=True)
class UsageReport:
    """Work accounting for one batch.

    calls counts every backend invocation including retry attempts;
    retries counts just the re-attempts; unparseable counts predictions
    that ended up with the UNPARSEABLE label for any reason.
    """

    calls: int = 0
    cache_hits: int = 0
    retries: int = 0
    unparseable: int = 0


@dataclass(frozen=True)
class _FetchResult:
    raw_response: str | None
    attempts: int
    error: str | None


def _fetch(
    backend: Backend,
    prompt: str,
    max_retries: int,
    sleep: Callable[[float], None],
) -> _FetchResult:
    """Call the backend for one prompt, retrying transient failures."""
    attempts = 0
    while True:
        attempts += 1
        try:
            raw = backend.complete(prompt)
            return _FetchResult(raw_response=raw, attempts=attempts, error=None)
        except CallError as exc:
            if not exc.retryable or attempts > max_retries:
                return _FetchResult(raw_response=None, attempts=attempts, error=str(exc))
            delay = _BACKOFF_BASE * (2 ** (attempts - 1))
            sleep(delay + random.random() * _BACKOFF_JITTER)


def classify_batch(
    records: RecordSet,
    pcfg: PromptConfig,
    bcfg: BackendConfig,
    cache: ResponseCache | None = None,
    backend: Backend | None = None,
    registry: TemplateRegistry | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> tuple[list[Prediction], UsageReport]:
    """Classify every record, returning predictions in input order.

    Raises PromptError before any call if a record cannot fill the
    template, and BatchError if a backend is needed but not ready.
    """
    items = list(records)
    prompts = [build_prompt(record, pcfg, registry) for record in items]
    digests = [
        cache_key(
            bcfg.model_id, pcfg.template_id, prompt, bcfg.temperature, bcfg.reasoning_level
        )
        for prompt in prompts
    ]

    cached_raw: dict[int, str] = {}
    if cache is not None:
        for i, digest in enumerate(digests):
            entry = cache.get(digest)
            if entry is not None:
                cached_raw[i] = entry.raw_response

    misses = [i for i in range(len(items)) if i not in cached_raw]
    if misses:
        if backend is None:
            backend = get_backend(bcfg)
        try:
            backend.check_ready()
        except AdapterError as exc:
            raise BatchError(f"backend not ready: {exc}") from exc

    fetched: dict[int, _FetchResult] = {}
    if misses:
        assert backend is not None
        with ThreadPoolExecutor(max_workers=bcfg.concurrency_limit) as pool:
            futures = {
                i: pool.submit(_fetch, backend, prompts[i], bcfg.max_retries, sleep)
                for i in misses
            }
            for i, future in futures.items():
                fetched[i] = future.result()

    predictions: list[Prediction] = []
    calls = 0
    retries = 0
    unparseable = 0
    for i, record in enumerate(items):
        if i in cached_raw:
            raw = cached_raw[i]
            label = parse_response(raw, pcfg.scheme)
            prediction = Prediction(
                record_id=record.id,
                label=label,
                engine="llm",
                raw_response=raw,
                model_id=bcfg.model_id,
                prompt_hash=digests[i],
                cached=True,
            )
        else:
            result = fetched[i]
            calls += result.attempts
            retries += result.attempts - 1
            if result.raw_response is None:
                prediction = Prediction(
                    record_id=record.id,
                    label=UNPARSEABLE,
                    engine="llm",
                    raw_response="",
                    model_id=bcfg.model_id,
                    prompt_hash=digests[i],
                    cached=False,
                    error=result.error,
                )
            else:
                if cache is not None:
                    cache.put(
                        digests[i],
                        CacheEntry.build(
                            bcfg.model_id,
                            pcfg.template_id,
                            prompts[i],
                            bcfg.temperature,
                            bcfg.reasoning_level,
                            result.raw_response,
                        ),
                    )
                label = parse_response(result.raw_response, pcfg.scheme)
                prediction = Prediction(
                    record_id=record.id,
                    label=label,
                    engine="llm",
                    raw_response=result.raw_response,
                    model_id=bcfg.model_id,
                    prompt_hash=digests[i],
                    cached=False,
                )
        if prediction.label == UNPARSEABLE:
            unparseable += 1
        predictions.append(prediction)

    report = UsageReport(
        calls=calls,
        cache_hits=len(cached_raw),
        retries=retries,
        unparseable=unparseable,
    )
    return predictions, report
