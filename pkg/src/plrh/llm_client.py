"""Completion backends and the client-side request path.

The HTTP backend speaks the plain completions wire format
(POST {"model", "prompt", "max_tokens", "temperature", "stop"} and read
choices[0].text) so local inference servers work unmodified.

Stop handling is client-side and uniform across backends: the returned text
is cut at the earliest occurrence of any stop sequence, then leading
whitespace is trimmed. Backends count every resolution (each network attempt,
each fixture lookup) on a thread-safe counter.
"""

from __future__ import annotations

import abc
import threading
import time
from dataclasses import dataclass

import requests

from .errors import (
    ContextLengthError,
    LLMClientError,
    RetryBudgetExceededError,
)
from .prompting import prompt_sha256


@dataclass(frozen=True)
class CompletionRequest:
    prompt_text: str
    max_new_tokens: int
    temperature: float = 0.0
    stop_sequences: tuple[str, ...] = ()
    model_id: str = ""


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    finish_reason: str  # "stop", "length", or a backend-reported value
    latency_ms: float


class CompletionBackend(abc.ABC):
    """Base class: counts resolutions, delegates the actual text lookup."""

    name = "backend"

    def __init__(self) -> None:
        self._calls = 0
        self._calls_lock = threading.Lock()

    @property
    def call_count(self) -> int:
        with self._calls_lock:
            return self._calls

    def reset_call_count(self) -> None:
        with self._calls_lock:
            self._calls = 0

    def _count_call(self) -> None:
        with self._calls_lock:
            self._calls += 1

    def resolve(self, request: CompletionRequest) -> tuple[str, str]:
        """Return (raw_text, finish_reason) and count one resolution."""
        self._count_call()
        return self._resolve(request)

    @abc.abstractmethod
    def _resolve(self, request: CompletionRequest) -> tuple[str, str]: ...


def _validate_request(request: CompletionRequest) -> None:
    if not request.prompt_text:
        raise LLMClientError("request has an empty prompt")
    if request.max_new_tokens < 1:
        raise LLMClientError(f"max_new_tokens must be positive, got {request.max_new_tokens}")
    if request.temperature < 0:
        raise LLMClientError(f"temperature must be non-negative, got {request.temperature}")
    for s in request.stop_sequences:
        if not s:
            raise LLMClientError("stop sequences must be non-empty strings")


def truncate_at_stop(text: str, stop_sequences: tuple[str, ...]) -> tuple[str, bool]:
    """Cut text at the earliest occurrence of any stop sequence."""
    cut = -1
    for s in stop_sequences:
        idx = text.find(s)
        if idx != -1 and (cut == -1 or idx < cut):
            cut = idx
    if cut == -1:
        return text, False
    return text[:cut], True


def complete(backend: CompletionBackend, request: CompletionRequest) -> CompletionResponse:
    """Resolve one completion through a backend, with uniform post-handling."""
    _validate_request(request)
    t0 = time.perf_counter()
    raw, finish_reason = backend.resolve(request)
    latency_ms = (time.perf_counter() - t0) * 1000.0
    text, stopped = truncate_at_stop(raw, request.stop_sequences)
    if stopped:
        finish_reason = "stop"
    return CompletionResponse(
        text=text.lstrip(),
        finish_reason=finish_reason,
        latency_ms=latency_ms,
    )


_CONTEXT_LENGTH_HINTS = (
    "context length",
    "context window",
    "maximum context",
    "too long",
    "too many tokens",
)

# Statuses worth retrying: timeouts, throttling, server-side hiccups.
_RETRYABLE_STATUSES = frozenset({408, 429, 500, 502, 503, 504})


class HttpBackend(CompletionBackend):
    """Completions-endpoint client with a bounded retry budget.

    Retries transport errors and retryable statuses up to `retries` extra
    attempts. A context-window rejection is terminal no matter the budget:
    resending the same prompt cannot succeed.
    """

    name = "http"

    def __init__(
        self,
        url: str,
        timeout_s: float = 30.0,
        retries: int = 2,
        token: str | None = None,
        session: requests.Session | None = None,
    ) -> None:
        super().__init__()
        if retries < 0:
            raise LLMClientError(f"retries must be non-negative, got {retries}")
        self.url = url
        self.timeout_s = timeout_s
        self.retries = retries
        self._headers = {"Content-Type": "application/json"}
        if token:
            self._headers["Authorization"] = f"Bearer {token}"
        self._session = session if session is not None else requests.Session()

    def _resolve(self, request: CompletionRequest) -> tuple[str, str]:
        payload: dict[str, object] = {
            "model": request.model_id,
            "prompt": request.prompt_text,
            "max_tokens": request.max_new_tokens,
            "temperature": request.temperature,
        }
        if request.stop_sequences:
            payload["stop"] = list(request.stop_sequences)

        attempts = self.retries + 1
        last_error = "no attempt made"
        for attempt in range(attempts):
            if attempt > 0:
                self._count_call()
            try:
                resp = self._session.post(
                    self.url, json=payload, headers=self._headers, timeout=self.timeout_s
                )
            except requests.RequestException as exc:
                last_error = f"transport error: {exc}"
                continue
            if resp.status_code == 200:
                return self._parse_success(resp)
            body = resp.text or ""
            lowered = body.lower()
            if any(hint in lowered for hint in _CONTEXT_LENGTH_HINTS):
                raise ContextLengthError(prompt_sha256(request.prompt_text), body.strip()[:200])
            if resp.status_code in _RETRYABLE_STATUSES:
                last_error = f"HTTP {resp.status_code}: {body.strip()[:200]}"
                continue
            raise LLMClientError(f"HTTP {resp.status_code}: {body.strip()[:200]}")
        raise RetryBudgetExceededError(
            f"{attempts} attempt(s) to {self.url} failed; last error: {last_error}"
        )

    def _parse_success(self, resp: requests.Response) -> tuple[str, str]:
        try:
            body = resp.json()
            choice = body["choices"][0]
            text = choice["text"]
            finish_reason = choice.get("finish_reason") or "length"
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise LLMClientError(f"malformed completion response: {exc}") from exc
        if not isinstance(text, str):
            raise LLMClientError("completion response text is not a string")
        return text, str(finish_reason)
