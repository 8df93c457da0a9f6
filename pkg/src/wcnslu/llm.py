"""Completion backends: HTTP chat/completions, a deterministic mock, and a record/replay cache."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Protocol

import httpx

log = logging.getLogger(__name__)

TRANSIENT_STATUS = {408, 429, 500, 502, 503, 504}


class BackendError(RuntimeError):
    """Base class for completion failures."""


class AuthError(BackendError):
    pass


class RateLimited(BackendError):
    pass


class BackendUnavailable(BackendError):
    pass


class MalformedResponse(BackendError):
    pass


class CacheMiss(BackendUnavailable):
    """Replay asked for a request that was never recorded."""


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    model_id: str = "mock"
    max_tokens: int = 32
    temperature: float = 0.0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    latency_ms: float
    from_cache: bool = False


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def cache_key(req: CompletionRequest) -> str:
    payload = json.dumps([req.model_id, req.prompt, req.max_tokens, float(req.temperature)],
                         ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Backend(Protocol):
    def generate(self, req: CompletionRequest) -> str: ...


class MockBackend:
    """Answers from a ``{prompt_hash: text}`` table, falling back to ``responder``."""

    def __init__(self, responses: Mapping[str, str] | None = None,
                 responder: Callable[[CompletionRequest], str] | None = None,
                 default: str = ""):
        self.responses = dict(responses or {})
        self.responder = responder
        self.default = default

    def generate(self, req: CompletionRequest) -> str:
        key = prompt_hash(req.prompt)
        if key in self.responses:
            return self.responses[key]
        if self.responder is not None:
            return self.responder(req)
        return self.default


class ResponseCache:
    """Append-only JSON-lines store of ``{key, request, response}`` records.

    A torn final line (interrupted write) is dropped and truncated on open.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, str] = {}
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        data = self.path.read_bytes()
        good = 0
        pos = 0
        while pos < len(data):
            nl = data.find(b"\n", pos)
            end = len(data) if nl < 0 else nl + 1
            line = data[pos:end]
            try:
                rec = json.loads(line)
                self._entries[rec["key"]] = rec["response"]
            except (ValueError, KeyError, TypeError):
                if end < len(data):
                    raise ValueError(f"{self.path}: corrupt record at byte {pos}") from None
                log.warning("dropping torn trailing record in %s", self.path)
                break
            if nl < 0:  # valid record missing its newline
                with open(self.path, "ab") as fh:
                    fh.write(b"\n")
            pos = end
            good = end
        if good < len(data):
            with open(self.path, "r+b") as fh:
                fh.truncate(good)

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, req: CompletionRequest) -> str | None:
        return self._entries.get(cache_key(req))

    def put(self, req: CompletionRequest, response: str) -> None:
        key = cache_key(req)
        rec = {"key": key,
               "request": {"model_id": req.model_id, "max_tokens": req.max_tokens,
                           "temperature": req.temperature, "prompt_sha256": prompt_hash(req.prompt)},
               "response": response}
        line = json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n"
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = response
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)


class ReplayBackend:
    """Serves only what a cache already holds."""

    def __init__(self, cache: ResponseCache):
        self.cache = cache

    def generate(self, req: CompletionRequest) -> str:
        text = self.cache.get(req)
        if text is None:
            raise CacheMiss(f"replay cache miss for key {cache_key(req)[:12]}")
        return text


class RateLimiter:
    """Spaces calls so no more than ``per_minute`` start in any 60 s window on average."""

    def __init__(self, per_minute: float | None, clock=time.monotonic, sleep=time.sleep):
        self.interval = 60.0 / per_minute if per_minute else 0.0
        self._next = 0.0
        self._lock = threading.Lock()
        self._clock, self._sleep = clock, sleep

    def acquire(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = self._clock()
            wait = self._next - now
            self._next = max(now, self._next) + self.interval
        if wait > 0:
            self._sleep(wait)


class HttpBackend:
    """Chat/completions-style JSON endpoint with bounded exponential backoff."""

    def __init__(self, base_url: str, *, api_key_env: str | None = "OPENAI_API_KEY",
                 max_attempts: int = 4, backoff: float = 1.0, max_backoff: float = 30.0,
                 requests_per_minute: float | None = None, timeout: float = 60.0,
                 transport: httpx.BaseTransport | None = None, sleep=time.sleep):
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.api_key_env = api_key_env
        self.max_attempts = max_attempts
        self.backoff, self.max_backoff = backoff, max_backoff
        self.limiter = RateLimiter(requests_per_minute, sleep=sleep)
        self._sleep = sleep
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _headers(self) -> dict[str, str]:
        if not self.api_key_env:
            return {}
        key = os.environ.get(self.api_key_env)
        if not key:
            raise AuthError(f"environment variable {self.api_key_env} is not set")
        return {"Authorization": f"Bearer {key}"}

    def generate(self, req: CompletionRequest) -> str:
        headers = self._headers()
        body = {"model": req.model_id, "messages": [{"role": "user", "content": req.prompt}],
                "max_tokens": req.max_tokens, "temperature": req.temperature}
        last = None
        for attempt in range(self.max_attempts):
            if attempt:
                self._sleep(min(self.max_backoff, self.backoff * 2 ** (attempt - 1)))
            self.limiter.acquire()
            try:
                resp = self._client.post(self.url, json=body, headers=headers)
            except httpx.TransportError as exc:
                last = BackendUnavailable(f"{type(exc).__name__}: {exc}")
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"HTTP {resp.status_code} from {self.url}")
            if resp.status_code in TRANSIENT_STATUS:
                last = (RateLimited if resp.status_code == 429 else BackendUnavailable)(
                    f"HTTP {resp.status_code} after {attempt + 1} attempt(s)")
                continue
            if resp.status_code >= 400:
                raise BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError):
                raise MalformedResponse(f"unexpected response body: {resp.text[:200]}") from None
        raise last

    def close(self) -> None:
        self._client.close()


class LLMClient:
    """Thread-safe front end: cache lookup, in-flight limit, then the backend."""

    def __init__(self, backend: Backend, cache: ResponseCache | None = None,
                 max_in_flight: int = 4):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.backend = backend
        self.cache = cache
        self.max_in_flight = max_in_flight
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def complete(self, req: CompletionRequest) -> CompletionResult:
        t0 = time.perf_counter()
        if self.cache is not None:
            hit = self.cache.get(req)
            if hit is not None:
                return CompletionResult(hit, (time.perf_counter() - t0) * 1e3, True)
        with self._slots:
            text = self.backend.generate(req)
        if self.cache is not None and not isinstance(self.backend, ReplayBackend):
            self.cache.put(req, text)
        return CompletionResult(text, (time.perf_counter() - t0) * 1e3, False)
