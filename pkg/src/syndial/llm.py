"""Chat-completion backends: an OpenAI-compatible HTTP client and a scripted mock.

Every completed call is appended to the backend's :class:`CallLedger`, which
is what the cost report counts.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from collections.abc import Callable, Iterable
from dataclasses import asdict, dataclass
from pathlib import Path

import httpx

from .errors import AuthFailure, BackendUnavailable, MalformedResponse
from .prompts import PromptSet, default_prompts

log = logging.getLogger(__name__)

PURPOSES = ("generate", "summarize", "extract_concepts")
DEFAULT_API_KEY_ENV = "SYNDIAL_API_KEY"
DEFAULT_MODEL = "gpt-3.5-turbo"


@dataclass(frozen=True)
class ChatRequest:
    prompt: str
    model: str = DEFAULT_MODEL
    temperature: float = 0.7
    max_output_tokens: int = 1024
    # bookkeeping: routes mock lookups and labels ledger entries
    note_id: str = ""
    purpose: str = "generate"
    iteration: int | None = None
    target: str | None = None

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.purpose not in PURPOSES:
            raise ValueError(f"unknown purpose {self.purpose!r}")
        if (self.iteration is not None) != (self.purpose == "generate"):
            raise ValueError("iteration is set exactly for generate requests")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_ms: int = 0


@dataclass(frozen=True)
class CallLedgerEntry:
    note_id: str
    purpose: str
    iteration: int | None
    prompt_tokens: int
    completion_tokens: int
    timestamp: float


class CallLedger:
    """Append-only, thread-safe record of completed backend calls."""

    def __init__(self, entries: Iterable[CallLedgerEntry] = ()):
        self._entries = list(entries)
        self._lock = threading.Lock()

    def append(self, entry: CallLedgerEntry) -> None:
        with self._lock:
            self._entries.append(entry)

    @property
    def entries(self) -> list[CallLedgerEntry]:
        with self._lock:
            return list(self._entries)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def count(self, purpose: str) -> int:
        return sum(1 for e in self.entries if e.purpose == purpose)

    def write_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for e in self.entries:
                fh.write(json.dumps(asdict(e)) + "\n")

    @classmethod
    def read_jsonl(cls, path: str | Path) -> CallLedger:
        with open(path, encoding="utf-8") as fh:
            return cls(CallLedgerEntry(**json.loads(line)) for line in fh if line.strip())


class Backend:
    """Shared behaviour: bounded in-flight requests and ledger bookkeeping.

    Subclasses implement ``_complete``.
    """

    def __init__(
        self,
        model: str = DEFAULT_MODEL,
        max_concurrency: int = 8,
        ledger: CallLedger | None = None,
        prompts: PromptSet | None = None,
    ):
        self.model = model
        self.ledger = ledger if ledger is not None else CallLedger()
        self.prompts = prompts or default_prompts()
        self._slots = threading.BoundedSemaphore(max_concurrency)

    def _complete(self, req: ChatRequest) -> ChatResponse:
        raise NotImplementedError

    def complete(self, req: ChatRequest) -> ChatResponse:
        with self._slots:
            resp = self._complete(req)
        self.ledger.append(
            CallLedgerEntry(
                note_id=req.note_id,
                purpose=req.purpose,
                iteration=req.iteration,
                prompt_tokens=resp.prompt_tokens,
                completion_tokens=resp.completion_tokens,
                timestamp=time.time(),
            )
        )
        return resp

    def extract_concepts(self, text: str, note_id: str = "", target: str | None = None) -> list[str]:
        """Ask the model for the medical concepts in ``text``; returns raw response lines."""
        resp = self.complete(
            ChatRequest(
                prompt=self.prompts.extraction(text),
                temperature=0.0,
                max_output_tokens=512,
                note_id=note_id,
                purpose="extract_concepts",
                target=target,
                model=self.model,
            )
        )
        if not resp.text:
            return []
        return resp.text.split("\n")


class OpenAIBackend(Backend):
    """Client for ``POST {base_url}/v1/chat/completions``."""

    def __init__(
        self,
        base_url: str = "https://api.openai.com",
        model: str = DEFAULT_MODEL,
        api_key: str | None = None,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        max_retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 120.0,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        **kwargs,
    ):
        super().__init__(model=model, **kwargs)
        self.max_retries = max_retries
        self.backoff = backoff
        self._sleep = sleep
        key = api_key if api_key is not None else os.environ.get(api_key_env)
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"), headers=headers, timeout=timeout, transport=transport
        )

    def _complete(self, req: ChatRequest) -> ChatResponse:
        body = {
            "model": req.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }
        last_error = "no attempt made"
        for attempt in range(self.max_retries + 1):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            start = time.monotonic()
            try:
                r = self._client.post("/v1/chat/completions", json=body)
            except httpx.TransportError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                log.warning("transport error (attempt %d): %s", attempt + 1, last_error)
                continue
            if r.status_code in (401, 403):
                raise AuthFailure(f"HTTP {r.status_code} from {r.request.url}")
            if r.status_code == 429 or r.status_code >= 500:
                last_error = f"HTTP {r.status_code}"
                log.warning("transient %s (attempt %d)", last_error, attempt + 1)
                continue
            if r.status_code >= 400:
                raise BackendUnavailable(f"HTTP {r.status_code}: {r.text[:200]}")
            return _parse_completion(r, int((time.monotonic() - start) * 1000))
        raise BackendUnavailable(f"gave up after {self.max_retries + 1} attempts ({last_error})")

    def close(self) -> None:
        self._client.close()


def _parse_completion(r: httpx.Response, latency_ms: int) -> ChatResponse:
    try:
        payload = r.json()
        text = payload["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"no choices[0].message.content in response: {exc!r}") from exc
    if not isinstance(text, str):
        raise MalformedResponse("message content is not a string")
    usage = payload.get("usage") or {}
    return ChatResponse(
        text=text,
        prompt_tokens=int(usage.get("prompt_tokens") or 0),
        completion_tokens=int(usage.get("completion_tokens") or 0),
        latency_ms=latency_ms,
    )


ScriptKey = tuple[str, str, "int | None", "str | None"]


class MockBackend(Backend):
    """Replays scripted responses keyed by (note_id, purpose, iteration, target).

    Lookup falls back from the exact key to ``iteration=None`` and then to the
    wildcard note id ``"*"``, so one entry can serve every iteration or note.
    A missing key raises :class:`BackendUnavailable`.
    """

    def __init__(self, script: dict[ScriptKey, str] | None = None, **kwargs):
        super().__init__(**kwargs)
        self.script = dict(script or {})
        self.prompt_log: list[ChatRequest] = []
        self._log_lock = threading.Lock()

    def _complete(self, req: ChatRequest) -> ChatResponse:
        with self._log_lock:
            self.prompt_log.append(req)
        for note_id in (req.note_id, "*"):
            for iteration in (req.iteration, None):
                text = self.script.get((note_id, req.purpose, iteration, req.target))
                if text is not None:
                    return ChatResponse(text=text)
        raise BackendUnavailable(
            f"mock script has no entry for {(req.note_id, req.purpose, req.iteration, req.target)}"
        )

    def prompts_for(self, note_id: str, purpose: str = "generate") -> list[str]:
        with self._log_lock:
            reqs = [r for r in self.prompt_log if r.note_id == note_id and r.purpose == purpose]
        return [r.prompt for r in sorted(reqs, key=lambda r: r.iteration or 0)]

    @classmethod
    def from_entries(cls, entries: Iterable[dict], **kwargs) -> MockBackend:
        script = {}
        for e in entries:
            key = (str(e["note_id"]), e["purpose"], e.get("iteration"), e.get("target"))
            script[key] = e["text"]
        return cls(script=script, **kwargs)

    @classmethod
    def from_file(cls, path: str | Path, **kwargs) -> MockBackend:
        """Load a JSON array of ``{note_id, purpose, iteration?, target?, text}``."""
        with open(path, encoding="utf-8") as fh:
            return cls.from_entries(json.load(fh), **kwargs)
