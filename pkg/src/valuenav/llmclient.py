"""Chat-completions transport, transcripts, and record/replay backends.

Any OpenAI-compatible ``/chat/completions`` endpoint can drive the planner
and the judge.  Model identity lives in configuration only.
"""
from __future__ import annotations

import base64
import hashlib
import json
import os
import threading
import time
from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import httpx

from .dcon import NavAction, PlannerBackend
from .errors import CallBudgetExceeded, InputError, ProtocolError, ReplayMiss, TransportError
from .intuition import JudgeBackend, Panorama, build_judge_prompt

TRANSCRIPT_FORMAT = "transcript"
TRANSCRIPT_VERSION = 1
DEFAULT_INFLIGHT = 4
MAX_CALLS_PER_EPISODE = 50

_inflight = threading.BoundedSemaphore(DEFAULT_INFLIGHT)


def set_inflight_limit(n: int) -> None:
    """Cap concurrent HTTP requests across every client in the process."""
    global _inflight
    if n < 1:
        raise InputError("in-flight limit must be >= 1")
    _inflight = threading.BoundedSemaphore(n)


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str
    api_key: str = field(default="", repr=False)
    timeout: float = 60.0
    max_retries: int = 2
    params: Mapping[str, Any] = field(default_factory=dict)
    backoff_base: float = 1.0
    backoff_factor: float = 2.0

    def __post_init__(self):
        if not self.base_url:
            raise InputError("base_url is required for a remote backend")
        if self.max_retries < 0:
            raise InputError("max_retries must be >= 0")

    @classmethod
    def from_env(cls, prefix: str, env: Mapping[str, str] | None = None, **overrides: Any) -> "EndpointConfig":
        """Read ``{prefix}_BASE_URL``, ``{prefix}_MODEL`` and ``{prefix}_API_KEY``."""
        env = os.environ if env is None else env
        kwargs: dict[str, Any] = {
            "base_url": env.get(f"{prefix}_BASE_URL", ""),
            "model_name": env.get(f"{prefix}_MODEL", ""),
            "api_key": env.get(f"{prefix}_API_KEY", ""),
        }
        if f"{prefix}_TIMEOUT" in env:
            kwargs["timeout"] = float(env[f"{prefix}_TIMEOUT"])
        kwargs.update(overrides)
        return cls(**kwargs)


# --- transcripts --------------------------------------------------------------


def _canonical(value: Any) -> Any:
    if isinstance(value, str):
        return " ".join(value.split())
    if isinstance(value, Mapping):
        return {str(k): _canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    return value


def request_key(role: str, messages: Sequence[Mapping[str, Any]]) -> str:
    """Whitespace-insensitive hash of a request, used to match replays."""
    blob = json.dumps({"role": role, "messages": _canonical(list(messages))}, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class Transcript:
    """Append-only log of backend exchanges.

    Each record holds the role (``planner``/``judge``), the request payload
    (messages plus model parameters, never credentials), the response text,
    latency in seconds and any reported token usage.
    """

    def __init__(self, records: Sequence[dict] | None = None):
        self._records: list[dict] = [dict(r) for r in records or ()]
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> tuple[dict, ...]:
        return tuple(self._records)

    def append(self, role: str, request: Mapping[str, Any], response: str, latency: float = 0.0, usage: Mapping | None = None) -> None:
        record = {
            "role": role,
            "key": request_key(role, request["messages"]),
            "request": dict(request),
            "response": response,
            "latency": latency,
            "usage": dict(usage) if usage else None,
        }
        with self._lock:
            self._records.append(record)

    def dumps(self) -> str:
        lines = [json.dumps({"format": TRANSCRIPT_FORMAT, "version": TRANSCRIPT_VERSION})]
        lines += [json.dumps(r, sort_keys=True, ensure_ascii=False) for r in self._records]
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "Transcript":
        lines = [l for l in text.splitlines() if l.strip()]
        if not lines:
            raise InputError("empty transcript file")
        header = json.loads(lines[0])
        if header.get("format") != TRANSCRIPT_FORMAT or header.get("version") != TRANSCRIPT_VERSION:
            raise InputError(f"not a version {TRANSCRIPT_VERSION} transcript: {header}")
        return cls([json.loads(l) for l in lines[1:]])

    @classmethod
    def load(cls, path: str | Path) -> "Transcript":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


# --- transport ----------------------------------------------------------------


def chat_complete(
    cfg: EndpointConfig,
    messages: Sequence[Mapping[str, Any]],
    transcript: Transcript | None = None,
    role: str = "planner",
    client: httpx.Client | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """POST one chat completion and return the assistant text.

    Transport failures, 5xx and 429 are retried up to ``cfg.max_retries``
    times with exponential backoff.  Other 4xx answers and bodies without a
    string ``choices[0].message.content`` raise :class:`ProtocolError`.
    """
    payload = {"model": cfg.model_name, "messages": list(messages), **dict(cfg.params)}
    headers = {"Content-Type": "application/json"}
    if cfg.api_key:
        headers["Authorization"] = f"Bearer {cfg.api_key}"
    url = cfg.base_url.rstrip("/") + "/chat/completions"
    own_client = client is None
    http = client or httpx.Client(timeout=cfg.timeout)
    last_problem = ""
    try:
        for attempt in range(cfg.max_retries + 1):
            if attempt:
                sleep(cfg.backoff_base * cfg.backoff_factor ** (attempt - 1))
            started = time.monotonic()
            try:
                with _inflight:
                    resp = http.post(url, json=payload, headers=headers, timeout=cfg.timeout)
            except httpx.HTTPError as exc:
                last_problem = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_problem = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise ProtocolError(f"endpoint answered HTTP {resp.status_code}")
            text, usage = _content(resp)
            if transcript is not None:
                request = {k: v for k, v in payload.items()}
                transcript.append(role, request, text, time.monotonic() - started, usage)
            return text
    finally:
        if own_client:
            http.close()
    raise TransportError(f"gave up after {cfg.max_retries} retries ({last_problem})")


def _content(resp: httpx.Response) -> tuple[str, dict | None]:
    try:
        body = resp.json()
        text = body["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise ProtocolError(f"response is not a chat completion: {exc!r}") from exc
    if not isinstance(text, str):
        raise ProtocolError("choices[0].message.content is not a string")
    usage = body.get("usage") if isinstance(body.get("usage"), dict) else None
    return text, usage


# --- message builders shared by live, recording and replay backends -----------


def planner_messages(prompt: str) -> list[dict]:
    return [{"role": "user", "content": prompt}]


def judge_messages(
    pan: Panorama, instruction: str, action: NavAction, landmarks: Sequence[str], feedback: str | None
) -> list[dict]:
    text = build_judge_prompt(pan, instruction, action, landmarks, feedback)
    images = [t.image for t in pan.tiles if t.image is not None]
    if not images:
        return [{"role": "user", "content": text}]
    parts: list[dict] = [{"type": "text", "text": text}]
    for img in images:
        data = base64.b64encode(img).decode("ascii")
        parts.append({"type": "image_url", "image_url": {"url": f"data:image/png;base64,{data}"}})
    return [{"role": "user", "content": parts}]


class RemotePlanner:
    def __init__(self, cfg: EndpointConfig, transcript: Transcript | None = None, client: httpx.Client | None = None):
        self.cfg, self.transcript, self.client = cfg, transcript, client

    def plan_step(self, prompt: str) -> str:
        return chat_complete(self.cfg, planner_messages(prompt), self.transcript, "planner", self.client)


class RemoteJudge:
    def __init__(self, cfg: EndpointConfig, transcript: Transcript | None = None, client: httpx.Client | None = None):
        self.cfg, self.transcript, self.client = cfg, transcript, client

    def judge(self, panorama, instruction, action, landmarks, feedback=None) -> str:
        messages = judge_messages(panorama, instruction, action, landmarks, feedback)
        return chat_complete(self.cfg, messages, self.transcript, "judge", self.client)


class RecordingPlanner:
    """Wraps any planner backend and logs its exchanges in transcript form."""

    def __init__(self, inner: PlannerBackend, transcript: Transcript):
        self.inner, self.transcript = inner, transcript

    def plan_step(self, prompt: str) -> str:
        reply = self.inner.plan_step(prompt)
        self.transcript.append("planner", {"messages": planner_messages(prompt)}, reply)
        return reply


class RecordingJudge:
    def __init__(self, inner: JudgeBackend, transcript: Transcript):
        self.inner, self.transcript = inner, transcript

    def judge(self, panorama, instruction, action, landmarks, feedback=None) -> str:
        reply = self.inner.judge(panorama, instruction, action, landmarks, feedback)
        messages = judge_messages(panorama, instruction, action, landmarks, feedback)
        self.transcript.append("judge", {"messages": messages}, reply)
        return reply


class ReplayBackend:
    """Serves recorded replies for matching requests, in recorded order.

    Serves as both a planner and a judge backend.  A request that was never
    recorded raises :class:`ReplayMiss` rather than improvising.
    """

    def __init__(self, transcript: Transcript):
        if not len(transcript):
            raise InputError("cannot replay an empty transcript")
        self._queues: dict[str, deque] = defaultdict(deque)
        for rec in transcript.records:
            key = rec.get("key") or request_key(rec["role"], rec["request"]["messages"])
            self._queues[key].append(rec["response"])
        self._lock = threading.Lock()

    def _serve(self, role: str, messages: list[dict]) -> str:
        key = request_key(role, messages)
        with self._lock:
            queue = self._queues.get(key)
            if not queue:
                raise ReplayMiss(f"no recorded {role} response for request {key[:12]}")
            return queue.popleft()

    def plan_step(self, prompt: str) -> str:
        return self._serve("planner", planner_messages(prompt))

    def judge(self, panorama, instruction, action, landmarks, feedback=None) -> str:
        return self._serve("judge", judge_messages(panorama, instruction, action, landmarks, feedback))


def replay_backend(transcript: Transcript) -> ReplayBackend:
    return ReplayBackend(transcript)


class CallBudget:
    """Per-episode cap on backend calls; every backend wrapped by one budget shares it."""

    def __init__(self, max_calls: int = MAX_CALLS_PER_EPISODE):
        self.max_calls = max_calls
        self.calls = 0

    def spend(self) -> None:
        if self.calls >= self.max_calls:
            raise CallBudgetExceeded(f"episode used its {self.max_calls} backend calls")
        self.calls += 1

    def planner(self, inner: PlannerBackend) -> PlannerBackend:
        budget = self

        class _Planner:
            def plan_step(self, prompt: str) -> str:
                budget.spend()
                return inner.plan_step(prompt)

        return _Planner()

    def judge(self, inner: JudgeBackend) -> JudgeBackend:
        budget = self

        class _Judge:
            def judge(self, panorama, instruction, action, landmarks, feedback=None) -> str:
                budget.spend()
                return inner.judge(panorama, instruction, action, landmarks, feedback)

        return _Judge()
