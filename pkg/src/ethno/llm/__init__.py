"""Prompted-classification engine: templates, backends, parsing, cache,
and bounded-concurrency batch runs."""

from .backends import (
    Backend,
    BackendConfig,
    CallError,
    MockBackend,
    OpenAIChatBackend,
    get_backend,
    register_backend,
)
from .batch import UsageReport, classify_batch
from .cache import CacheEntry, ResponseCache, cache_key
from .parsing import parse_response
from .prompts import (
    DEFAULT_TEMPLATE_ID,
    EXTRA_FEATURES,
    PromptConfig,
    TemplateRegistry,
    build_prompt,
)

__all__ = [
    "Backend",
    "BackendConfig",
    "CacheEntry",
    "CallError",
    "DEFAULT_TEMPLATE_ID",
    "EXTRA_FEATURES",
    "MockBackend",
    "OpenAIChatBackend",
    "PromptConfig",
    "ResponseCache",
    "TemplateRegistry",
    "UsageReport",
    "build_prompt",
    "cache_key",
    "classify_batch",
    "get_backend",
    "parse_response",
    "register_backend",
]
