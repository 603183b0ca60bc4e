"""Chat-endpoint client for batch correction, with caching and retries.

The wire shape is the common chat-completions form: a role/content
message array POSTed over HTTPS with bearer-token auth. A mock
transport is first-class so the whole correction path runs offline in
CI; the cache keys on a hash of the rendered prompt plus the model
name, so a warm cache answers reruns without any network traffic.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

import httpx

from .corpus import PARSE_FAILURE, Corpus, CorrectionResult, NBestEntry
from .prompts import PromptTemplate, parse_response, render_prompt, select_demos

API_KEY_ENV = "NBESTKIT_API_KEY"

RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


class EndpointError(RuntimeError):
    """A request failed for good; retrying will not help."""


class TransientEndpointError(EndpointError):
    """A request failed in a way worth retrying (429, 5xx, timeouts)."""


class ConfigError(ValueError):
    """The batch cannot start at all (bad template/credential/fixture setup)."""


@dataclass(frozen=True)
class EndpointConfig:
    """Where and how to reach the chat endpoint."""

    base_url: str
    model: str
    temperature: float = 0.0
    max_tokens: int = 256
    timeout: float = 30.0
    api_key_env: str = API_KEY_ENV


@dataclass(frozen=True)
class CorrectionRequest:
    """One rendered prompt bound for the endpoint."""

    entry_id: str
    turns: tuple[tuple[str, str], ...]
    model: str
    temperature: float = 0.0
    max_tokens: int = 256

    @property
    def idempotency_key(self) -> str:
        """sha256 over the rendered prompt and the model name."""
        h = hashlib.sha256()
        h.update(self.model.encode("utf-8"))
        for role, text in self.turns:
            h.update(b"\x00")
            h.update(role.encode("utf-8"))
            h.update(b"\x01")
            h.update(text.encode("utf-8"))
        return h.hexdigest()


class Transport(Protocol):
    """Anything that can turn a request into raw response text."""

    def complete(self, request: CorrectionRequest) -> str: ...


class HttpTransport:
    """Live chat-completions transport with bearer-token auth.

    The credential is read from ``config.api_key_env`` at construction
    time so a missing key aborts before any request is attempted.
    """

    def __init__(self, config: EndpointConfig, client: httpx.Client | None = None) -> None:
        self.config = config
        api_key = os.environ.get(config.api_key_env, "")
        if not api_key:
            raise ConfigError(
                f"environment variable {config.api_key_env} is not set; "
                "required for live endpoint access"
            )
        self._client = client or httpx.Client(timeout=config.timeout)
        self._headers = {"Authorization": f"Bearer {api_key}"}

    def complete(self, request: CorrectionRequest) -> str:
        payload = {
            "model": request.model,
            "messages": [{"role": r, "content": c} for r, c in request.turns],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        try:
            response = self._client.post(url, json=payload, headers=self._headers)
        except httpx.HTTPError as exc:
            raise TransientEndpointError(f"transport failure: {exc}") from exc
        if response.status_code in RETRYABLE_STATUS:
            raise TransientEndpointError(f"HTTP {response.status_code}")
        if response.status_code != 200:
            raise EndpointError(f"HTTP {response.status_code}: {response.text[:200]}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, json.JSONDecodeError) as exc:
            raise EndpointError(f"malformed endpoint response: {exc}") from exc


class MockTransport:
    """Offline transport replaying canned responses keyed by entry id.

    Tracks call counts and the maximum number of requests in flight so
    tests can observe the concurrency limit; ``latency`` makes overlap
    visible, ``fail_first`` raises transient errors for the first N
    calls per entry to exercise the retry path.
    """

    def __init__(
        self,
        responses: Mapping[str, str],
        latency: float = 0.0,
        fail_first: int = 0,
    ) -> None:
        self.responses = dict(responses)
        self.latency = latency
        self.fail_first = fail_first
        self.calls = 0
        self.max_in_flight = 0
        self._in_flight = 0
        self._attempts: dict[str, int] = {}
        self._lock = threading.Lock()

    def complete(self, request: CorrectionRequest) -> str:
        with self._lock:
            self.calls += 1
            self._in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self._in_flight)
            attempt = self._attempts.get(request.entry_id, 0) + 1
            self._attempts[request.entry_id] = attempt
        try:
            if self.latency:
                time.sleep(self.latency)
            if attempt <= self.fail_first:
                raise TransientEndpointError(f"mock transient failure #{attempt}")
            if request.entry_id not in self.responses:
                raise EndpointError(f"no canned response for entry {request.entry_id!r}")
            return self.responses[request.entry_id]
        finally:
            with self._lock:
                self._in_flight -= 1


def load_mock_fixtures(path: str | Path) -> dict[str, str]:
    """Read a mock-fixture JSONL file: {"id": ..., "response": ...} per line."""
    fixtures: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                fixtures[record["id"]] = record["response"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ConfigError(f"{Path(path).name}:{lineno}: bad fixture ({exc})") from None
    return fixtures


class ResponseCache:
    """JSONL-backed response store keyed by idempotency key.

    Appends go through one lock so concurrent workers never interleave
    partial lines.
    """

    def __init__(self, directory: str | Path) -> None:
        self.path = Path(directory) / "responses.jsonl"
        self._lock = threading.Lock()
        self._entries: dict[str, str] = {}
        if self.path.exists():
            with self.path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    record = json.loads(line)
                    self._entries[record["key"]] = record["response"]

    def get(self, key: str) -> str | None:
        return self._entries.get(key)

    def put(self, key: str, response: str) -> None:
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = response
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps({"key": key, "response": response}, ensure_ascii=False) + "\n")

    def __len__(self) -> int:
        return len(self._entries)


@dataclass
class BatchSettings:
    """Execution knobs for :func:`correct_batch`."""

    concurrency: int = 4
    max_attempts: int = 5
    backoff_base: float = 0.5
    sleep: Callable[[float], None] = field(default=time.sleep, repr=False)

    def __post_init__(self) -> None:
        if self.concurrency < 1:
            raise ValueError("concurrency must be >= 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


def correct_batch(
    corpus: Corpus,
    template: PromptTemplate,
    transport: Transport,
    endpoint: EndpointConfig,
    *,
    demos: Sequence[tuple[NBestEntry, str]] = (),
    domain: str | None = None,
    cache: ResponseCache | None = None,
    settings: BatchSettings | None = None,
) -> list[CorrectionResult]:
    """Correct every entry, one result per entry in corpus order.

    Cache hits never touch the transport. Transient failures retry with
    exponential backoff up to ``settings.max_attempts``; entries that
    still fail (or whose response parses to nothing) yield failure-
    marked results rather than aborting the batch.
    """
    settings = settings or BatchSettings()
    corrector = f"llm:{endpoint.model}"

    requests: list[CorrectionRequest] = []
    for entry in corpus.entries:
        try:
            turns = render_prompt(template, entry, demos=demos, domain=domain)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        requests.append(
            CorrectionRequest(
                entry_id=entry.id,
                turns=tuple(turns),
                model=endpoint.model,
                temperature=endpoint.temperature,
                max_tokens=endpoint.max_tokens,
            )
        )

    def run_one(request: CorrectionRequest) -> CorrectionResult:
        key = request.idempotency_key
        cached_raw = cache.get(key) if cache is not None else None
        if cached_raw is not None:
            raw: str | None = cached_raw
            was_cached = True
        else:
            raw = None
            delay = settings.backoff_base
            for attempt in range(1, settings.max_attempts + 1):
                try:
                    raw = transport.complete(request)
                    break
                except TransientEndpointError:
                    if attempt == settings.max_attempts:
                        break
                    settings.sleep(delay)
                    delay *= 2
                except EndpointError:
                    break
            was_cached = False
            if raw is not None and cache is not None:
                cache.put(key, raw)
        if raw is None:
            return CorrectionResult(
                id=request.entry_id,
                corrected=PARSE_FAILURE,
                corrector=corrector,
                cached=was_cached,
                failed=True,
            )
        corrected = parse_response(raw, template.kind)
        if corrected is None:
            return CorrectionResult(
                id=request.entry_id,
                corrected=PARSE_FAILURE,
                corrector=corrector,
                cached=was_cached,
                failed=True,
                raw_response=raw,
            )
        return CorrectionResult(
            id=request.entry_id,
            corrected=corrected,
            corrector=corrector,
            cached=was_cached,
            raw_response=raw,
        )

    if settings.concurrency == 1 or len(requests) <= 1:
        return [run_one(r) for r in requests]
    with ThreadPoolExecutor(max_workers=settings.concurrency) as pool:
        return list(pool.map(run_one, requests))


__all__ = [
    "API_KEY_ENV",
    "BatchSettings",
    "ConfigError",
    "CorrectionRequest",
    "EndpointConfig",
    "EndpointError",
    "HttpTransport",
    "MockTransport",
    "ResponseCache",
    "Transport",
    "TransientEndpointError",
    "correct_batch",
    "load_mock_fixtures",
    "select_demos",
]
