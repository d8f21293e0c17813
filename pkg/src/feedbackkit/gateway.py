"""Single client for all LLM calls: caching, retries, bounded parallelism.

Speaks the JSON chat-completion wire schema (messages array in, assistant
content out of choices[0].message.content) so any compatible hosted or local
server works. A deterministic mock provider backs the test pipeline.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

import requests

from .errors import (
    AuthError,
    BudgetExceeded,
    GatewayError,
    MockMissingResponse,
    ResponseShapeError,
    TransportError,
)

ENV_BASE_URL = "LLM_BASE_URL"
ENV_API_KEY = "LLM_API_KEY"
ENV_MODEL = "LLM_MODEL"


@dataclass(frozen=True)
class ChatRequest:
    model: str
    system: str
    user: str
    temperature: float = 0.0
    top_p: float = 1.0
    max_tokens: int = 512
    seed_hint: int | None = None

    def __post_init__(self):
        if not self.model:
            raise ValueError("model must be non-empty")
        if not self.user:
            raise ValueError("user message must be non-empty")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    cached: bool
    latency_ms: float
    provider: str


def cache_key(req: ChatRequest) -> str:
    """Stable fingerprint of everything that affects the completion.

    seed_hint is deliberately excluded: it is advisory and must not fork the
    cache.
    """
    material = json.dumps(
        [req.model, req.system, req.user, req.temperature, req.top_p, req.max_tokens],
        ensure_ascii=False,
    )
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


def prompt_hash(system: str, user: str) -> str:
    """Hash used to key mock-provider tables (messages only, no sampling params)."""
    return hashlib.sha256((system + "\x00" + user).encode("utf-8")).hexdigest()


class TransientError(GatewayError):
    """Retryable failure: 429, 5xx, timeouts, connection resets."""


class Provider(Protocol):
    name: str

    def complete(self, req: ChatRequest) -> str: ...


class HttpProvider:
    """Chat-completion endpoint over HTTPS with bearer auth."""

    def __init__(self, base_url: str, api_key: str = "", timeout_s: float = 60.0):
        self.name = "http"
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout_s = timeout_s
        self._session = requests.Session()

    def complete(self, req: ChatRequest) -> str:
        messages = []
        if req.system:
            messages.append({"role": "system", "content": req.system})
        messages.append({"role": "user", "content": req.user})
        body = {
            "model": req.model,
            "messages": messages,
            "temperature": req.temperature,
            "top_p": req.top_p,
            "max_tokens": req.max_tokens,
        }
        if req.seed_hint is not None:
            body["seed"] = req.seed_hint
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self._session.post(
                f"{self.base_url}/chat/completions",
                json=body,
                headers=headers,
                timeout=self.timeout_s,
            )
        except requests.RequestException as exc:
            raise TransientError(f"request failed: {exc}") from exc
        if resp.status_code in (401, 403):
            raise AuthError(f"endpoint rejected credentials (HTTP {resp.status_code})")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientError(f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            payload = resp.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise ResponseShapeError(f"payload lacks assistant content: {exc}") from exc
        if not isinstance(content, str):
            raise ResponseShapeError("assistant content is not a string")
        return content.rstrip()


class MockProvider:
    """Table-driven provider: prompt_hash(system, user) -> canned text."""

    def __init__(
        self,
        table: Mapping[str, str] | None = None,
        responder: Callable[[ChatRequest], str] | None = None,
    ):
        self.name = "mock"
        self.table = dict(table or {})
        self.responder = responder
        self.calls = 0

    def complete(self, req: ChatRequest) -> str:
        self.calls += 1
        key = prompt_hash(req.system, req.user)
        if key in self.table:
            return self.table[key]
        if self.responder is not None:
            return self.responder(req)
        raise MockMissingResponse(f"no canned response for prompt hash {key[:12]}...")


def load_mock_table(path: str | Path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        table = json.load(fh)
    if not isinstance(table, dict):
        raise ValueError("mock table must be a JSON object of prompt_hash -> text")
    return table


class Gateway:
    """Caching, retrying, budget-checked front door for a provider.

    Identical requests hit the on-disk cache; transient failures are retried
    with exponential backoff; AuthError is never retried. Shareable across
    threads: cache writes are atomic write-then-rename and the in-flight
    request count is bounded when max_parallel is set.
    """

    def __init__(
        self,
        provider: Provider,
        cache_dir: str | Path | None = None,
        max_attempts: int = 4,
        backoff_s: float = 0.5,
        max_requests: int | None = None,
        max_parallel: int | None = None,
    ):
        self.provider = provider
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self.max_requests = max_requests
        self._request_count = 0
        self._lock = threading.Lock()
        self._slots = threading.Semaphore(max_parallel) if max_parallel else None

    @property
    def request_count(self) -> int:
        return self._request_count

    def _cache_path(self, key: str) -> Path:
        assert self.cache_dir is not None
        return self.cache_dir / f"{key}.json"

    def _cache_read(self, key: str) -> ChatResponse | None:
        if not self.cache_dir:
            return None
        path = self._cache_path(key)
        if not path.is_file():
            return None
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        return ChatResponse(payload["text"], True, 0.0, payload.get("provider", "?"))

    def _cache_write(self, key: str, text: str) -> None:
        if not self.cache_dir:
            return
        path = self._cache_path(key)
        tmp = path.with_name(path.name + f".tmp{os.getpid()}.{threading.get_ident()}")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump({"text": text, "provider": self.provider.name}, fh, ensure_ascii=False)
        os.replace(tmp, path)

    def _charge_budget(self) -> None:
        with self._lock:
            if self.max_requests is not None and self._request_count >= self.max_requests:
                raise BudgetExceeded(f"request cap {self.max_requests} reached")
            self._request_count += 1

    def complete(self, req: ChatRequest) -> ChatResponse:
        key = cache_key(req)
        hit = self._cache_read(key)
        if hit is not None:
            return hit
        self._charge_budget()
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            if self._slots:
                self._slots.acquire()
            start = time.perf_counter()
            try:
                text = self.provider.complete(req)
            except TransientError as exc:
                last = exc
                if attempt + 1 < self.max_attempts:
                    time.sleep(self.backoff_s * (2**attempt))
                continue
            finally:
                if self._slots:
                    self._slots.release()
            latency = (time.perf_counter() - start) * 1000.0
            text = text.rstrip()
            self._cache_write(key, text)
            return ChatResponse(text, False, latency, self.provider.name)
        raise TransportError(f"retries exhausted after {self.max_attempts} attempts: {last}")

    def complete_batch(
        self, reqs: Sequence[ChatRequest], parallelism: int = 4
    ) -> list[ChatResponse | GatewayError]:
        """Complete requests concurrently; output order equals input order.

        Per-item failures are carried in-place as GatewayError instances so a
        single bad item never aborts the batch.
        """
        if parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if not reqs:
            return []

        def one(req: ChatRequest) -> ChatResponse | GatewayError:
            try:
                return self.complete(req)
            except GatewayError as exc:
                return exc
            except Exception as exc:  # defensive: never lose a slot
                return TransportError(f"unexpected failure: {exc}")

        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(one, reqs))


def gateway_from_env(
    base_url: str | None = None,
    api_key: str | None = None,
    cache_dir: str | Path | None = None,
    **kwargs,
) -> Gateway:
    """Build an HTTP gateway from LLM_BASE_URL / LLM_API_KEY (flags override env)."""
    base_url = base_url or os.environ.get(ENV_BASE_URL, "")
    api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY, "")
    if not base_url:
        raise GatewayError(f"no endpoint configured: set {ENV_BASE_URL} or pass --base-url")
    return Gateway(HttpProvider(base_url, api_key), cache_dir=cache_dir, **kwargs)
