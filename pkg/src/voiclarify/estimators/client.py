"""Minimal client for chat-completions-style HTTP endpoints."""

from __future__ import annotations

import logging
import os
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import httpx

from ..errors import BackendUnavailable, TransportError

log = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"
API_KEY_ENV = "VOICLARIFY_API_KEY"
_RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class LlmConfig:
    endpoint: str = DEFAULT_ENDPOINT
    model: str = "gpt-4o"
    temperature: float = 0.0
    max_retries: int = 2
    timeout: float = 60.0
    max_concurrent: int = 4
    min_interval: float = 0.0
    backoff: float = 1.0
    api_key_env: str = API_KEY_ENV

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.min_interval < 0 or self.backoff < 0:
            raise ValueError("min_interval and backoff must be >= 0")


class ChatClient:
    """Thread-safe chat client with retries, a concurrency cap and request pacing.

    Requests carry an ``X-Request-ID`` header; replies are matched back to
    the caller through it. The bearer token is read from the environment
    variable named in the config and never logged.
    """

    def __init__(self, config: LlmConfig, transport: Optional[httpx.BaseTransport] = None):
        self.config = config
        self._http = httpx.Client(timeout=config.timeout, transport=transport)
        self._slots = threading.BoundedSemaphore(config.max_concurrent)
        self._pace = threading.Lock()
        self._next_start = 0.0
        self.calls = 0

    def close(self):
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _headers(self, request_id: str) -> dict:
        headers = {"Content-Type": "application/json", "X-Request-ID": request_id}
        key = os.environ.get(self.config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _wait_turn(self):
        if self.config.min_interval <= 0:
            return
        with self._pace:
            now = time.monotonic()
            delay = self._next_start - now
            self._next_start = max(now, self._next_start) + self.config.min_interval
        if delay > 0:
            time.sleep(delay)

    def complete(self, messages: Sequence[dict], request_id: Optional[str] = None) -> str:
        """Send one conversation and return the first choice's message content."""
        request_id = request_id or uuid.uuid4().hex
        body = {
            "model": self.config.model,
            "messages": list(messages),
            "temperature": self.config.temperature,
        }
        last_error = "no attempt made"
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(self.config.backoff * 2 ** (attempt - 1))
            self._wait_turn()
            with self._slots:
                self.calls += 1
                try:
                    resp = self._http.post(
                        self.config.endpoint, json=body, headers=self._headers(request_id)
                    )
                except httpx.ConnectError as exc:
                    last_error = f"cannot reach endpoint: {exc}"
                    continue
                except httpx.HTTPError as exc:
                    last_error = f"{type(exc).__name__}: {exc}"
                    continue
            if resp.status_code in _RETRY_STATUS:
                last_error = f"HTTP {resp.status_code}"
                log.warning("request %s got HTTP %s (attempt %d)", request_id, resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code} from endpoint")
            echoed = resp.headers.get("X-Request-ID")
            if echoed is not None and echoed != request_id:
                raise TransportError(f"reply for {echoed} arrived on request {request_id}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError):
                raise TransportError("response lacks choices[0].message.content") from None
        if last_error.startswith("cannot reach"):
            raise BackendUnavailable(last_error)
        raise TransportError(f"giving up after {self.config.max_retries + 1} attempts: {last_error}")

    def complete_many(self, conversations: Sequence[Sequence[dict]]) -> list[str]:
        """Run several conversations concurrently; results come back in input order."""
        ids = [uuid.uuid4().hex for _ in conversations]
        with ThreadPoolExecutor(max_workers=self.config.max_concurrent) as pool:
            futures = {rid: pool.submit(self.complete, conv, rid) for rid, conv in zip(ids, conversations)}
            replies = {rid: fut.result() for rid, fut in futures.items()}
        return [replies[rid] for rid in ids]
