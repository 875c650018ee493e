"""Chat-completion client with a real HTTP transport and a deterministic
replay transport for tests and offline runs.

With the replay transport the whole training pipeline is a deterministic
function of (dataset, fixture, config).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .core import FormatError

_BACKOFF_BASE_S = 0.5

# monkeypatch point for tests; retries sleep through this
_sleep = time.sleep


class EndpointError(RuntimeError):
    """The endpoint could not produce a reply (transport exhaustion,
    fixture exhaustion, non-retryable HTTP failure)."""


class ProtocolError(RuntimeError):
    """The endpoint replied with something that is not a chat completion."""


class TransportRetryError(RuntimeError):
    """A transient transport failure worth retrying with backoff."""


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "system" | "user" | "assistant"
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"bad role {self.role!r}")
        if not self.content:
            raise ValueError("empty message content")


@dataclass
class Conversation:
    """Ordered role-tagged messages; after any leading system message the
    roles must alternate user/assistant."""

    messages: list[ChatMessage] = field(default_factory=list)

    def add_system(self, content: str) -> None:
        if self.messages:
            raise ValueError("system message must come first")
        self.messages.append(ChatMessage("system", content))

    def add_user(self, content: str) -> None:
        self._append("user", content)

    def add_assistant(self, content: str) -> None:
        self._append("assistant", content)

    def _append(self, role: str, content: str) -> None:
        last = self.messages[-1].role if self.messages else None
        expected = {"user": (None, "system", "assistant"), "assistant": ("user",)}[role]
        if last not in expected:
            raise ValueError(f"cannot add {role!r} message after {last!r}")
        self.messages.append(ChatMessage(role, content))

    @property
    def last(self) -> ChatMessage | None:
        return self.messages[-1] if self.messages else None


@dataclass(frozen=True)
class LlmConfig:
    endpoint: str
    model: str
    temperature: float = 0.0
    timeout_s: float = 120.0
    max_retries: int = 2

    def __post_init__(self) -> None:
        if not self.endpoint or not self.model:
            raise ValueError("endpoint and model must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


class TranscriptLog:
    """Appends every (request, reply) pair as a JSON line."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.seq = 0

    def record(self, request: dict, reply: str) -> None:
        self.seq += 1
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"seq": self.seq, "request": request, "reply": reply}, ensure_ascii=False) + "\n")


class HttpTransport:
    """POSTs the chat-completions JSON shape to the configured endpoint."""

    def __init__(self, api_key: str | None = None):
        self.api_key = api_key
        self.session = requests.Session()

    def send(self, payload: dict, cfg: LlmConfig) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = self.session.post(cfg.endpoint, json=payload, headers=headers, timeout=cfg.timeout_s)
        except requests.RequestException as exc:
            raise TransportRetryError(f"request failed: {exc}") from exc
        if response.status_code >= 500:
            raise TransportRetryError(f"server error {response.status_code}")
        if response.status_code != 200:
            raise EndpointError(f"endpoint returned {response.status_code}: {response.text[:200]}")
        try:
            data = response.json()
            content = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed completion reply: {exc}") from exc
        if not isinstance(content, str) or not content:
            raise ProtocolError("completion reply has no content")
        return content


class ReplayTransport:
    """Serves scripted replies strictly in sequence; exhaustion is an error."""

    def __init__(self, replies: list[str]):
        self.replies = list(replies)
        self.cursor = 0

    @classmethod
    def from_fixture(cls, path: str | Path) -> "ReplayTransport":
        replies = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise FormatError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
                if not isinstance(record, dict) or not isinstance(record.get("reply"), str):
                    raise FormatError(f"{path}:{lineno}: expected an object with a text 'reply'")
                replies.append(record["reply"])
        return cls(replies)

    @property
    def remaining(self) -> int:
        return len(self.replies) - self.cursor

    def send(self, payload: dict, cfg: LlmConfig) -> str:
        if self.cursor >= len(self.replies):
            raise EndpointError(f"replay fixture exhausted after {len(self.replies)} replies")
        reply = self.replies[self.cursor]
        self.cursor += 1
        return reply


def replay_transport(fixture: str | Path) -> ReplayTransport:
    return ReplayTransport.from_fixture(fixture)


def complete(
    conversation: Conversation,
    cfg: LlmConfig,
    transport,
    transcript: TranscriptLog | None = None,
) -> ChatMessage:
    """Send the conversation and return the assistant reply.

    Transient transport failures are retried up to ``cfg.max_retries`` times
    with exponential backoff; each successful exchange is appended to the
    transcript log.
    """
    if conversation.last is None or conversation.last.role != "user":
        raise ValueError("conversation must end with a user message")
    payload = {
        "model": cfg.model,
        "messages": [{"role": m.role, "content": m.content} for m in conversation.messages],
        "temperature": cfg.temperature,
    }
    attempt = 0
    while True:
        try:
            reply = transport.send(payload, cfg)
            break
        except TransportRetryError as exc:
            if attempt >= cfg.max_retries:
                raise EndpointError(f"transport failed after {attempt + 1} attempts: {exc}") from exc
            _sleep(_BACKOFF_BASE_S * (2**attempt))
            attempt += 1
    if transcript is not None:
        transcript.record(payload, reply)
    return ChatMessage("assistant", reply)


@dataclass
class LlmClient:
    """Convenience bundle of config, transport and transcript."""

    cfg: LlmConfig
    transport: object
    transcript: TranscriptLog | None = None

    def complete(self, conversation: Conversation) -> ChatMessage:
        return complete(conversation, self.cfg, self.transport, self.transcript)

    def ask(self, conversation: Conversation, user_text: str) -> str:
        """Append a user message, complete, append and return the reply."""
        conversation.add_user(user_text)
        reply = self.complete(conversation)
        conversation.add_assistant(reply.content)
        return reply.content


def replay_client(replies_or_fixture, transcript: TranscriptLog | None = None) -> LlmClient:
    """Client over the replay transport; config fields are placeholders."""
    if isinstance(replies_or_fixture, (str, Path)):
        transport = ReplayTransport.from_fixture(replies_or_fixture)
    else:
        transport = ReplayTransport(list(replies_or_fixture))
    cfg = LlmConfig(endpoint="replay:", model="replay")
    return LlmClient(cfg=cfg, transport=transport, transcript=transcript)
