"""Batch classification: ordering, caching, retries, and backends."""

from __future__ import annotations

import hashlib
import threading
import time
from pathlib import Path

import pytest

from ethno import (
    AdapterError,
    BackendConfig,
    BatchError,
    MockBackend,
    PromptConfig,
    ResponseCache,
    UNPARSEABLE,
    classify_batch,
)
from ethno.llm import get_backend
from ethno.llm.backends import CallError, OpenAIChatBackend, api_key_env
from ethno.records import RecordSet
from tests.conftest import make_record_set

NO_SLEEP = lambda seconds: None  # noqa: E731 - retry tests skip real backoff


def bcfg(**overrides) -> BackendConfig:
    base = dict(backend_id="mock", model_id="mock-1", max_retries=3, concurrency_limit=4)
    base.update(overrides)
    return BackendConfig(**base)


def pconf(us4) -> PromptConfig:
    return PromptConfig(scheme=us4, geo_level="county")


class TestBackendConfig:
    def test_validation(self) -> None:
        with pytest.raises(AdapterError):
            bcfg(temperature=-0.1)
        with pytest.raises(AdapterError):
            bcfg(concurrency_limit=0)
        with pytest.raises(AdapterError):
            bcfg(reasoning_level="extreme")

    def test_api_key_env_name(self) -> None:
        assert api_key_env("openai") == "ETHNO_API_KEY_OPENAI"
        assert api_key_env("glm-4.7-flash") == "ETHNO_API_KEY_GLM_4_7_FLASH"


class TestRegistry:
    def test_mock_registered(self) -> None:
        backend = get_backend(bcfg())
        assert isinstance(backend, MockBackend)

    def test_unknown_backend_without_base_url(self, monkeypatch) -> None:
        monkeypatch.delenv("ETHNO_BASE_URL_MYSTERY", raising=False)
        with pytest.raises(AdapterError, match="ETHNO_BASE_URL_MYSTERY"):
            get_backend(bcfg(backend_id="mystery"))

    def test_unknown_backend_with_base_url(self, monkeypatch) -> None:
        monkeypatch.setenv("ETHNO_BASE_URL_MYSTERY", "https://example.test/v1")
        backend = get_backend(bcfg(backend_id="mystery"))
        assert isinstance(backend, OpenAIChatBackend)
        assert backend.base_url == "https://example.test/v1"


class TestOpenAIAdapter:
    def test_missing_key_fails_check_ready(self, monkeypatch) -> None:
        monkeypatch.delenv("ETHNO_API_KEY_OPENAI", raising=False)
        backend = get_backend(bcfg(backend_id="openai"))
        with pytest.raises(AdapterError, match="ETHNO_API_KEY_OPENAI"):
            backend.check_ready()

    def test_key_from_env_passes_check_ready(self, monkeypatch) -> None:
        monkeypatch.setenv("ETHNO_API_KEY_OPENAI", "sk-test")
        backend = get_backend(bcfg(backend_id="openai"))
        backend.check_ready()

    def test_reasoning_on_unsupported(self, monkeypatch) -> None:
        monkeypatch.setenv("ETHNO_API_KEY_OPENAI", "sk-test")
        backend = get_backend(bcfg(backend_id="openai", reasoning_level="on"))
        with pytest.raises(AdapterError, match="reasoning"):
            backend.check_ready()


class TestMockBackend:
    def test_deterministic_label_from_prompt(self) -> None:
        backend = MockBackend(bcfg())
        prompt = "Pick. Return only one of: A, B, C."
        first = backend.complete(prompt)
        assert first == backend.complete(prompt)
        assert first in ("A", "B", "C")
        digest = hashlib.sha256(prompt.encode()).hexdigest()
        assert first == ("A", "B", "C")[int(digest[:8], 16) % 3]

    def test_counts_calls(self) -> None:
        backend = MockBackend(bcfg())
        for _ in range(3):
            backend.complete("x. Return only one of: A, B.")
        assert backend.calls == 3


class TestClassifyBatch:
    def test_empty_set_no_calls(self, us4) -> None:
        empty = RecordSet(records=(), scheme=us4)
        backend = MockBackend(bcfg())
        predictions, usage = classify_batch(empty, pconf(us4), bcfg(), backend=backend)
        assert predictions == []
        assert usage.calls == 0 and backend.calls == 0

    def test_fixed_response_and_order(self, us4) -> None:
        records = make_record_set(us4, 5)
        backend = MockBackend(bcfg(), fixed_response="Hispanic")
        predictions, usage = classify_batch(records, pconf(us4), bcfg(), backend=backend)
        assert [p.record_id for p in predictions] == list(records.ids())
        assert all(p.label == "Hispanic" for p in predictions)
        assert usage.calls == len(records)
        assert usage.unparseable == 0

    def test_order_preserved_with_shuffled_latencies(self, us4) -> None:
        records = make_record_set(us4, 6)  # 24 records

        class JitterBackend(MockBackend):
            def complete(self, prompt: str) -> str:
                time.sleep((hash(prompt) % 7) / 1000.0)
                return super().complete(prompt)

        backend = JitterBackend(bcfg(concurrency_limit=8))
        predictions, _ = classify_batch(
            records, pconf(us4), bcfg(concurrency_limit=8), backend=backend
        )
        assert [p.record_id for p in predictions] == list(records.ids())

    def test_concurrency_bound_respected(self, us4) -> None:
        records = make_record_set(us4, 4)  # 16 records
        limit = 3
        active = 0
        peak = 0
        lock = threading.Lock()

        class GaugeBackend(MockBackend):
            def complete(self, prompt: str) -> str:
                nonlocal active, peak
                with lock:
                    active += 1
                    peak = max(peak, active)
                time.sleep(0.01)
                try:
                    return super().complete(prompt)
                finally:
                    with lock:
                        active -= 1

        backend = GaugeBackend(bcfg(concurrency_limit=limit))
        classify_batch(records, pconf(us4), bcfg(concurrency_limit=limit), backend=backend)
        assert peak <= limit

    def test_throughput_bound_shows_parallelism(self, us4) -> None:
        latency = 0.08
        limit = 8
        records = make_record_set(us4, 4)  # 16 records -> 2 waves
        backend = MockBackend(bcfg(concurrency_limit=limit), latency=latency)
        start = time.monotonic()
        classify_batch(records, pconf(us4), bcfg(concurrency_limit=limit), backend=backend)
        wall = time.monotonic() - start
        waves = -(-len(records) // limit)
        assert wall <= (waves + 1) * latency * 1.5

    def test_warm_cache_second_run_zero_calls(self, us4, tmp_path: Path) -> None:
        records = make_record_set(us4, 3)
        cache = ResponseCache(tmp_path / "cache")
        backend = MockBackend(bcfg())
        cold, cold_usage = classify_batch(records, pconf(us4), bcfg(), cache, backend=backend)
        assert cold_usage.calls == len(records)
        warm, warm_usage = classify_batch(records, pconf(us4), bcfg(), cache, backend=backend)
        assert warm_usage.calls == 0
        assert backend.calls == len(records)
        assert warm_usage.cache_hits == len(records)
        for before, after in zip(cold, warm):
            assert before.raw_response == after.raw_response
            assert before.label == after.label
            assert after.cached

    def test_fully_cached_batch_needs_no_backend(self, us4, tmp_path: Path, monkeypatch) -> None:
        records = make_record_set(us4, 2)
        cache = ResponseCache(tmp_path / "cache")
        classify_batch(records, pconf(us4), bcfg(), cache, backend=MockBackend(bcfg()))
        # Same request vector against an unusable backend id: every record
        # is already cached, so no adapter is ever constructed.
        monkeypatch.delenv("ETHNO_BASE_URL_GONE", raising=False)
        config = bcfg(backend_id="gone")
        predictions, usage = classify_batch(records, pconf(us4), config, cache)
        assert usage.cache_hits == len(records)
        assert all(p.cached for p in predictions)

    def test_not_ready_backend_is_fatal_before_requests(self, us4, monkeypatch) -> None:
        monkeypatch.delenv("ETHNO_API_KEY_OPENAI", raising=False)
        records = make_record_set(us4, 2)
        config = bcfg(backend_id="openai")
        with pytest.raises(BatchError, match="not ready"):
            classify_batch(records, pconf(us4), config)

    def test_retries_then_succeeds(self, us4) -> None:
        records = make_record_set(us4, 1)  # 4 records
        backend = MockBackend(bcfg(), fail_first=2, latency=0.0)
        config = bcfg(max_retries=3, concurrency_limit=1)
        predictions, usage = classify_batch(
            records, pconf(us4), config, backend=backend, sleep=NO_SLEEP
        )
        assert usage.retries == 2
        assert usage.calls == len(records) + 2
        assert all(p.label != UNPARSEABLE for p in predictions)

    def test_exhausted_retries_yield_unparseable_not_abort(self, us4) -> None:
        records = make_record_set(us4, 1)
        backend = MockBackend(bcfg(), always_fail=True)
        config = bcfg(max_retries=2, concurrency_limit=2)
        predictions, usage = classify_batch(
            records, pconf(us4), config, backend=backend, sleep=NO_SLEEP
        )
        assert len(predictions) == len(records)
        assert all(p.label == UNPARSEABLE for p in predictions)
        assert all(p.error for p in predictions)
        assert usage.unparseable == len(records)
        # each record: 1 try + 2 retries
        assert usage.calls == 3 * len(records)

    def test_non_retryable_error_not_retried(self, us4) -> None:
        records = make_record_set(us4, 1)

        class HardFailBackend(MockBackend):
            def complete(self, prompt: str) -> str:
                super().complete(prompt)
                raise CallError("bad request", retryable=False)

        backend = HardFailBackend(bcfg())
        predictions, usage = classify_batch(
            records, pconf(us4), bcfg(max_retries=5), backend=backend, sleep=NO_SLEEP
        )
        assert usage.retries == 0
        assert usage.calls == len(records)
        assert all(p.label == UNPARSEABLE and p.error for p in predictions)

    def test_failed_records_not_cached(self, us4, tmp_path: Path) -> None:
        records = make_record_set(us4, 1)
        cache = ResponseCache(tmp_path / "cache")
        backend = MockBackend(bcfg(), always_fail=True)
        classify_batch(
            records, pconf(us4), bcfg(max_retries=0), cache, backend=backend, sleep=NO_SLEEP
        )
        assert len(cache) == 0

    def test_prompt_hash_matches_cache_file(self, us4, tmp_path: Path) -> None:
        records = make_record_set(us4, 1)
        cache = ResponseCache(tmp_path / "cache")
        predictions, _ = classify_batch(
            records, pconf(us4), bcfg(), cache, backend=MockBackend(bcfg())
        )
        for prediction in predictions:
            assert (tmp_path / "cache" / f"{prediction.prompt_hash}.json").is_file()

    def test_unparseable_counted_for_parse_failures(self, us4) -> None:
        records = make_record_set(us4, 1)
        backend = MockBackend(bcfg(), fixed_response="no idea, sorry")
        _, usage = classify_batch(records, pconf(us4), bcfg(), backend=backend)
        assert usage.unparseable == len(records)
