"""Chat-completion backends: generic HTTP, scripted mocks, oracle, record/replay.

A backend hands out one session per planning episode; sessions own any
turn-consumption state, so concurrent episodes never share scripted turns.
The HTTP backend speaks the common chat-completions shape (messages array
in, first choice content out) and retries transport errors only; content
errors belong to the planning loop.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol, Sequence

import httpx

from .documents import load_document
from .errors import (
    BackendTimeoutError,
    InvalidInputError,
    ReplayMissError,
    SchemaError,
    ScriptExhaustedError,
    TransportError,
)

ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_output_tokens: int = 512

    def __post_init__(self) -> None:
        if not any(m.role == "user" for m in self.messages):
            raise InvalidInputError("request needs at least one user message")
        if self.messages[-1].role != "user":
            raise InvalidInputError("the last message must be a user message")
        if not 0.0 <= self.temperature <= 1.0:
            raise InvalidInputError("temperature must be within [0, 1]")
        if self.max_output_tokens <= 0:
            raise InvalidInputError("max_output_tokens must be positive")
        for message in self.messages:
            if message.role not in ROLES:
                raise InvalidInputError(f"unknown message role {message.role!r}")


@dataclass(frozen=True)
class ChatResponse:
    content: str
    backend_id: str
    latency: float = 0.0
    raw_metadata: Mapping[str, Any] = field(default_factory=dict)


def request_digest(request: ChatRequest) -> str:
    """Stable across processes: canonical JSON before hashing."""
    payload = {
        "messages": [{"role": m.role, "content": m.content} for m in request.messages],
        "temperature": request.temperature,
        "max_output_tokens": request.max_output_tokens,
    }
    canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ChatSession(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


class Backend(Protocol):
    id: str

    def new_session(self) -> ChatSession: ...


# --- fault injection -------------------------------------------------------

FAULTS = ("corrupt_format", "inject_unknown_action", "truncate", "empty")

_FIRST_ACTION = re.compile(r"(\s*\[\s*\[\s*)([^,\]]+)(,)")
_FIRST_STEP = re.compile(r"\s*\[\s*\[\s*([^,\]]+?)\s*,\s*([^\]]*?)\s*\]")


def apply_fault(text: str, fault: str | None) -> str:
    """Deterministically corrupt a scripted response."""
    if fault is None:
        return text
    if fault == "empty":
        return ""
    if fault == "truncate":
        return text[: len(text) // 2]
    if fault == "inject_unknown_action":
        match = _FIRST_ACTION.match(text)
        if match:
            return text[: match.start(2)] + "find" + text[match.end(2) :]
        return "[[find, cola]]"
    if fault == "corrupt_format":
        match = _FIRST_STEP.match(text)
        if match:
            return f"[{match.group(1)}({match.group(2)})]"
        return "Sure, here is the plan you asked for."
    raise InvalidInputError(f"unknown fault {fault!r}")


# --- scripted mock ---------------------------------------------------------


@dataclass(frozen=True)
class MockTurn:
    text: str
    fault: str | None = None


@dataclass(frozen=True)
class MockScript:
    turns: tuple[MockTurn, ...]
    repeat_last: bool = False


class ScriptedBackend:
    """Replays a fixed script; each session restarts from the first turn."""

    def __init__(self, script: MockScript, backend_id: str = "mock:script") -> None:
        self.script = script
        self.id = backend_id
        self.calls = 0
        self._lock = threading.Lock()

    def _count(self) -> None:
        with self._lock:
            self.calls += 1

    def new_session(self) -> "_ScriptedSession":
        return _ScriptedSession(self)


class _ScriptedSession:
    def __init__(self, backend: ScriptedBackend) -> None:
        self._backend = backend
        self._turn = 0

    def complete(self, request: ChatRequest) -> ChatResponse:
        script = self._backend.script
        if self._turn >= len(script.turns):
            if not (script.repeat_last and script.turns):
                raise ScriptExhaustedError(f"script ended after {len(script.turns)} turns")
            turn = script.turns[-1]
        else:
            turn = script.turns[self._turn]
        self._turn += 1
        self._backend._count()
        return ChatResponse(apply_fault(turn.text, turn.fault), self._backend.id)


# --- gold oracle -----------------------------------------------------------

_COMMAND_LINE = re.compile(r"^Command: (.*)$", re.MULTILINE)


def _extract_command(request: ChatRequest) -> str | None:
    for message in request.messages:
        if message.role != "user":
            continue
        matches = _COMMAND_LINE.findall(message.content)
        if matches:
            return matches[-1]
    return None


class OracleBackend:
    """Answers each command with its paired reference plan text.

    ``first_fault`` corrupts the first turn of every session, which makes one
    corrective retry per episode reproducible. Commands without a pair get an
    explicit no-op plan.
    """

    def __init__(
        self,
        pairs: Mapping[str, str],
        first_fault: str | None = None,
        backend_id: str = "mock:gold",
    ) -> None:
        self.pairs = {" ".join(k.lower().split()): v for k, v in pairs.items()}
        self.first_fault = first_fault
        self.id = backend_id
        self.calls = 0
        self._lock = threading.Lock()

    def answer_for(self, command_text: str) -> str:
        return self.pairs.get(" ".join(command_text.lower().split()), "[]")

    def new_session(self) -> "_OracleSession":
        return _OracleSession(self)


class _OracleSession:
    def __init__(self, backend: OracleBackend) -> None:
        self._backend = backend
        self._turn = 0

    def complete(self, request: ChatRequest) -> ChatResponse:
        command = _extract_command(request)
        text = self._backend.answer_for(command) if command is not None else "[]"
        if self._turn == 0 and self._backend.first_fault:
            text = apply_fault(text, self._backend.first_fault)
        self._turn += 1
        with self._backend._lock:
            self._backend.calls += 1
        return ChatResponse(text, self._backend.id)


# --- record / replay -------------------------------------------------------


@dataclass(frozen=True)
class TranscriptRecord:
    digest: str
    request: ChatRequest
    response: ChatResponse

    def to_dict(self) -> dict[str, Any]:
        return {
            "digest": self.digest,
            "request": {
                "messages": [{"role": m.role, "content": m.content} for m in self.request.messages],
                "temperature": self.request.temperature,
                "max_output_tokens": self.request.max_output_tokens,
            },
            "response": {
                "content": self.response.content,
                "backend_id": self.response.backend_id,
                "latency": self.response.latency,
                "raw_metadata": dict(self.response.raw_metadata),
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TranscriptRecord":
        try:
            request = ChatRequest(
                tuple(ChatMessage(m["role"], m["content"]) for m in data["request"]["messages"]),
                data["request"]["temperature"],
                data["request"]["max_output_tokens"],
            )
            response = ChatResponse(
                data["response"]["content"],
                data["response"]["backend_id"],
                data["response"].get("latency", 0.0),
                data["response"].get("raw_metadata", {}),
            )
            return cls(data["digest"], request, response)
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed transcript record: {exc}") from exc


class RecordingBackend:
    """Wraps another backend and keeps every request/response pair in order."""

    def __init__(self, inner: Backend) -> None:
        self.inner = inner
        self.records: list[TranscriptRecord] = []
        self._lock = threading.Lock()

    @property
    def id(self) -> str:
        return self.inner.id

    def new_session(self) -> "_RecordingSession":
        return _RecordingSession(self, self.inner.new_session())


class _RecordingSession:
    def __init__(self, backend: RecordingBackend, inner: ChatSession) -> None:
        self._backend = backend
        self._inner = inner

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self._inner.complete(request)
        record = TranscriptRecord(request_digest(request), request, response)
        with self._backend._lock:
            self._backend.records.append(record)
        return response


class ReplayBackend:
    """Serves recorded responses keyed by request digest; stateless lookups."""

    def __init__(self, records: Iterable[TranscriptRecord], backend_id: str = "replay") -> None:
        self.records = tuple(records)
        self.id = backend_id
        self._by_digest = {record.digest: record.response for record in self.records}

    def new_session(self) -> "ReplayBackend":
        return self

    def complete(self, request: ChatRequest) -> ChatResponse:
        digest = request_digest(request)
        response = self._by_digest.get(digest)
        if response is None:
            raise ReplayMissError(f"no recorded response for digest {digest[:12]}…")
        return response


def record_transcript(records: Sequence[TranscriptRecord], path: str | Path) -> None:
    """Write an ordered, replayable transcript file."""
    payload = {"schema": 1, "records": [record.to_dict() for record in records]}
    Path(path).write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def transcript_from_payload(payload: Mapping[str, Any]) -> tuple[TranscriptRecord, ...]:
    if payload.get("schema") != 1:
        raise SchemaError("transcript requires 'schema': 1")
    records = payload.get("records")
    if not isinstance(records, list):
        raise SchemaError("transcript needs a 'records' list")
    return tuple(TranscriptRecord.from_dict(record) for record in records)


def load_transcript(path: str | Path) -> tuple[TranscriptRecord, ...]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"transcript is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise SchemaError("transcript must be a JSON object")
    return transcript_from_payload(payload)


# --- HTTP backend ----------------------------------------------------------


@dataclass(frozen=True)
class HttpBackendConfig:
    name: str
    endpoint: str
    model: str
    auth_env: str = ""
    auth_header: str = "Authorization"
    auth_scheme: str = "Bearer"
    timeout: float = 30.0
    transport_retries: int = 2
    concurrency: int = 4


class HttpBackend:
    """One chat-completion POST per request with bounded transport retries."""

    def __init__(self, config: HttpBackendConfig, client: httpx.Client | None = None) -> None:
        self.config = config
        self.id = f"http:{config.name}"
        self._client = client or httpx.Client(timeout=config.timeout)
        self._semaphore = threading.BoundedSemaphore(max(config.concurrency, 1))

    def new_session(self) -> "HttpBackend":
        return self

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.auth_env:
            secret = os.environ.get(self.config.auth_env)
            if not secret:
                raise TransportError(f"environment variable {self.config.auth_env} is not set")
            value = f"{self.config.auth_scheme} {secret}".strip()
            headers[self.config.auth_header] = value
        return headers

    def complete(self, request: ChatRequest) -> ChatResponse:
        payload = {
            "model": self.config.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        headers = self._headers()
        attempts = self.config.transport_retries + 1
        last_error: TransportError | None = None
        for _ in range(attempts):
            started = time.monotonic()
            try:
                with self._semaphore:
                    http_response = self._client.post(
                        self.config.endpoint, json=payload, headers=headers
                    )
            except httpx.TimeoutException as exc:
                last_error = BackendTimeoutError(str(exc))
                continue
            except httpx.HTTPError as exc:
                last_error = TransportError(str(exc))
                continue
            latency = time.monotonic() - started
            if http_response.status_code >= 500:
                last_error = TransportError(f"server error {http_response.status_code}")
                continue
            if http_response.status_code >= 400:
                raise TransportError(f"request rejected: {http_response.status_code} {http_response.text[:200]}")
            try:
                data = http_response.json()
                content = data["choices"][0]["message"].get("content") or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise TransportError(f"malformed completion payload: {exc}") from exc
            return ChatResponse(content, self.id, latency, {"status_code": http_response.status_code})
        assert last_error is not None
        raise last_error


def load_backend_config(path: str | Path) -> dict[str, HttpBackendConfig]:
    """Parse the backend config file into named HTTP backend configs."""
    data = load_document(path, kind="backend config")
    entries = data.get("backends")
    if not isinstance(entries, list):
        raise SchemaError("backend config needs a 'backends' list")
    configs: dict[str, HttpBackendConfig] = {}
    for entry in entries:
        if not isinstance(entry, dict) or "name" not in entry or "endpoint" not in entry or "model" not in entry:
            raise SchemaError("each backend needs 'name', 'endpoint' and 'model'")
        config = HttpBackendConfig(
            name=str(entry["name"]),
            endpoint=str(entry["endpoint"]),
            model=str(entry["model"]),
            auth_env=str(entry.get("auth_env", "")),
            auth_header=str(entry.get("auth_header", "Authorization")),
            auth_scheme=str(entry.get("auth_scheme", "Bearer")),
            timeout=float(entry.get("timeout", 30.0)),
            transport_retries=int(entry.get("transport_retries", 2)),
            concurrency=int(entry.get("concurrency", 4)),
        )
        configs[config.name] = config
    return configs


# --- backend spec resolution ------------------------------------------------

GARBAGE_TEXT = "I'm sorry, I can't produce a plan for that."


def resolve_backend(
    spec: str,
    *,
    pairs: Mapping[str, str] | None = None,
    transcript: Sequence[TranscriptRecord] | None = None,
    http_configs: Mapping[str, HttpBackendConfig] | None = None,
) -> Backend:
    """Build a backend from a spec string such as ``mock:gold`` or ``replay``.

    ``pairs`` feeds the oracle mocks (command text -> reference plan text);
    ``transcript`` feeds ``replay``; anything else is looked up among the
    configured HTTP backends.
    """
    if spec == "replay":
        if transcript is None:
            raise InvalidInputError("replay backend needs a transcript")
        return ReplayBackend(transcript)
    if spec.startswith("mock:"):
        kind = spec.split(":", 1)[1]
        if kind == "gold":
            return OracleBackend(pairs or {})
        if kind == "find-then-gold":
            return OracleBackend(pairs or {}, first_fault="inject_unknown_action", backend_id=spec)
        if kind == "format-then-gold":
            return OracleBackend(pairs or {}, first_fault="corrupt_format", backend_id=spec)
        if kind == "garbage":
            return ScriptedBackend(MockScript((MockTurn(GARBAGE_TEXT),), repeat_last=True), spec)
        if kind == "empty":
            return ScriptedBackend(MockScript((MockTurn(""),), repeat_last=True), spec)
        if kind == "noop":
            return ScriptedBackend(MockScript((MockTurn("[]"),), repeat_last=True), spec)
        raise InvalidInputError(f"unknown mock backend {spec!r}")
    if http_configs and spec in http_configs:
        return HttpBackend(http_configs[spec])
    raise InvalidInputError(f"unknown backend {spec!r}")
