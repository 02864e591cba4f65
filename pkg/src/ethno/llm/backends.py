"""Chat-completion backend adapters behind a small registry.

Adapters expose two methods: check_ready (fail fast on configuration or
authentication problems) and complete (one prompt in, raw text out).
Failures surface as CallError; its retryable flag separates transport and
rate-limit conditions, which the batch layer retries, from permanent
request errors, which it does not.

API keys come from the environment as ETHNO_API_KEY_<BACKEND_ID> with the
id uppercased and non-alphanumeric characters mapped to underscores.
Unknown backend ids fall back to an OpenAI-compatible adapter whose base
URL is read from ETHNO_BASE_URL_<BACKEND_ID>.
"""

from __future__ import annotations

import hashlib
import os
import re
import threading
import time
from dataclasses import dataclass
from typing import Callable, Protocol

import httpx

from ..errors import AdapterError


class CallError(AdapterError):
    """A single completion call failed; retryable marks transient causes."""

    def __init__(self, message: str, retryable: bool = False) -> None:
        super().__init__(message)
        self.retryable = retryable


@dataclass(frozen=True)
class BackendConfig:
    """Connection and decoding settings for one classification run."""

    backend_id: str
    model_id: str
    temperature: float = 0.0
    reasoning_level: str = "off"
    max_retries: int = 3
    concurrency_limit: int = 4
    timeout: float = 60.0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise AdapterError(f"temperature must be >= 0, got {self.temperature}")
        if self.concurrency_limit < 1:
            raise AdapterError(
                f"concurrency_limit must be >= 1, got {self.concurrency_limit}"
            )
        if self.max_retries < 0:
            raise AdapterError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.reasoning_level not in ("off", "minimal", "low", "high", "on"):
            raise AdapterError(f"unknown reasoning_level {self.reasoning_level!r}")


class Backend(Protocol):
    config: BackendConfig

    def check_ready(self) -> None: ...

    def complete(self, prompt: str) -> str: ...


def _env_name(prefix: str, backend_id: str) -> str:
    return prefix + re.sub(r"[^A-Z0-9]", "_", backend_id.upper())


def api_key_env(backend_id: str) -> str:
    """Environment variable name holding this backend's API key."""
    return _env_name("ETHNO_API_KEY_", backend_id)


class MockBackend:
    """Deterministic offline backend for tests and dry runs.

    Unless given a fixed response, it reads the category list back out of
    the prompt's "Return only one of:" line and picks one label by hashing
    the prompt, so outputs are stable across runs and platforms. Optional
    fixed latency and scripted failures support concurrency and retry
    tests. The calls counter includes every complete() invocation.
    """

    def __init__(
        self,
        config: BackendConfig,
        fixed_response: str | None = None,
        latency: float = 0.0,
        fail_first: int = 0,
        always_fail: bool = False,
    ) -> None:
        self.config = config
        self.fixed_response = fixed_response
        self.latency = latency
        self.fail_first = fail_first
        self.always_fail = always_fail
        self.calls = 0
        self._lock = threading.Lock()

    def check_ready(self) -> None:
        return None

    def complete(self, prompt: str) -> str:
        with self._lock:
            self.calls += 1
            serial = self.calls
        if self.latency:
            time.sleep(self.latency)
        if self.always_fail or serial <= self.fail_first:
            raise CallError(f"scripted failure on call {serial}", retryable=True)
        if self.fixed_response is not None:
            return self.fixed_response
        labels = self._labels_from(prompt)
        if not labels:
            return "UNKNOWN"
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        return labels[int(digest[:8], 16) % len(labels)]

    @staticmethod
    def _labels_from(prompt: str) -> list[str]:
        marker = "Return only one of:"
        idx = prompt.rfind(marker)
        if idx < 0:
            return []
        tail = prompt[idx + len(marker) :].strip().rstrip(".")
        return [part.strip() for part in tail.split(",") if part.strip()]


class OpenAIChatBackend:
    """Adapter for OpenAI-compatible chat-completion endpoints.

    reasoning_level off is omitted from the request; minimal, low, and
    high map to the reasoning_effort field; on has no equivalent here and
    is rejected at check_ready.
    """

    def __init__(
        self,
        config: BackendConfig,
        base_url: str,
        api_key: str | None = None,
    ) -> None:
        self.config = config
        self.base_url = base_url.rstrip("/")
        self._api_key = api_key
        self._client: httpx.Client | None = None
        self._lock = threading.Lock()

    def _resolve_key(self) -> str | None:
        if self._api_key is not None:
            return self._api_key
        return os.environ.get(api_key_env(self.config.backend_id))

    def check_ready(self) -> None:
        if self.config.reasoning_level == "on":
            raise AdapterError(
                f"backend {self.config.backend_id!r} does not support "
                "reasoning_level 'on'; use minimal, low, or high"
            )
        if not self._resolve_key():
            raise AdapterError(
                f"no API key for backend {self.config.backend_id!r}; "
                f"set {api_key_env(self.config.backend_id)}"
            )

    def _client_for(self) -> httpx.Client:
        with self._lock:
            if self._client is None:
                self._client = httpx.Client(timeout=self.config.timeout)
            return self._client

    def complete(self, prompt: str) -> str:
        key = self._resolve_key()
        if not key:
            raise AdapterError(
                f"no API key for backend {self.config.backend_id!r}; "
                f"set {api_key_env(self.config.backend_id)}"
            )
        body: dict[str, object] = {
            "model": self.config.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        if self.config.reasoning_level in ("minimal", "low", "high"):
            body["reasoning_effort"] = self.config.reasoning_level
        try:
            response = self._client_for().post(
                f"{self.base_url}/chat/completions",
                json=body,
                headers={"Authorization": f"Bearer {key}"},
            )
        except httpx.TransportError as exc:
            raise CallError(f"transport error: {exc}", retryable=True) from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise CallError(
                f"backend returned HTTP {response.status_code}", retryable=True
            )
        if response.status_code >= 400:
            raise CallError(
                f"backend returned HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            payload = response.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise CallError(f"malformed completion payload: {exc}") from exc
        if not isinstance(content, str):
            raise CallError("completion content is not text")
        return content


_BackendFactory = Callable[[BackendConfig], Backend]
_REGISTRY: dict[str, _BackendFactory] = {}


def register_backend(backend_id: str, factory: _BackendFactory) -> None:
    _REGISTRY[backend_id] = factory


def get_backend(config: BackendConfig) -> Backend:
    """Instantiate the adapter registered for config.backend_id.

    Ids with no registered factory are treated as OpenAI-compatible
    endpoints located by ETHNO_BASE_URL_<BACKEND_ID>.
    """
    factory = _REGISTRY.get(config.backend_id)
    if factory is not None:
        return factory(config)
    base_url = os.environ.get(_env_name("ETHNO_BASE_URL_", config.backend_id))
    if base_url:
        return OpenAIChatBackend(config, base_url=base_url)
    raise AdapterError(
        f"unknown backend {config.backend_id!r} and no "
        f"{_env_name('ETHNO_BASE_URL_', config.backend_id)} set"
    )


register_backend("mock", MockBackend)
register_backend(
    "openai",
    lambda cfg: OpenAIChatBackend(cfg, base_url="https://api.openai.com/v1"),
)
