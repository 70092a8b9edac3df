"""Chat-completion and text-embedding backends behind one wire contract.

Live mode speaks the OpenAI-compatible JSON HTTP shape (``/chat/completions``
and ``/embeddings``). Stub mode is fully deterministic and does no I/O:
chat answers come from an exact-match fixture map, embeddings from a hashed
bag-of-tokens. Everything downstream is testable offline against the stub.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import httpx

from .corpus import tokenize
from .errors import EmptyConversation, EmptyText, TransportError

STUB_NO_SCRIPT = "STUB-NO-SCRIPT"

STUB_EMBED_DIMS = 64

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

ROLES = ("system", "user", "assistant", "tool")


@dataclass(frozen=True)
class ProviderConfig:
    """Connection settings plus the live/stub switch.

    In stub mode ``chat_fixtures`` maps a prompt string to its scripted
    response; no network configuration is required.
    """

    base_url: str = ""
    api_key: str = ""
    chat_model: str = "stub-chat"
    embed_model: str = "stub-embed"
    timeout: float = 30.0
    mode: str = "stub"
    chat_fixtures: Mapping[str, str] = field(default_factory=dict)
    # extra request parameters (temperature etc.) passed through in live mode
    options: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("live", "stub"):
            raise ValueError(f"mode must be 'live' or 'stub', got {self.mode!r}")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    @classmethod
    def from_env(cls, env: Mapping[str, str] | None = None) -> "ProviderConfig":
        env = os.environ if env is None else env
        return cls(
            base_url=env.get("EMAGENT_PROVIDER_URL", ""),
            api_key=env.get("EMAGENT_PROVIDER_KEY", ""),
            chat_model=env.get("EMAGENT_CHAT_MODEL", "stub-chat"),
            embed_model=env.get("EMAGENT_EMBED_MODEL", "stub-embed"),
            mode=env.get("EMAGENT_PROVIDER_MODE", "stub"),
        )


def load_chat_fixtures(path) -> dict[str, str]:
    """Read a stub fixture map: a JSON object of {prompt: response}."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in data.items()
    ):
        raise ValueError(f"{path}: fixture map must be a JSON object of strings")
    return data


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.role == "user" and not self.content:
            raise ValueError("user messages must have non-empty content")


@dataclass(frozen=True)
class EmbeddingVector:
    dims: int
    values: tuple[float, ...]
    normalized: bool

    def __post_init__(self):
        if self.dims <= 0 or len(self.values) != self.dims:
            raise ValueError("values length must equal dims")
        if self.normalized:
            norm = math.sqrt(sum(v * v for v in self.values))
            if abs(norm - 1.0) > 1e-6:
                raise ValueError(f"normalized vector has L2 norm {norm}")


def chat_complete(messages: Sequence[ChatMessage], config: ProviderConfig) -> str:
    """Return the assistant reply for a conversation.

    Stub mode looks the final user message up in the fixture map and falls
    back to the STUB_NO_SCRIPT sentinel. Two calls with the same input
    always return the same output.
    """
    if not messages:
        raise EmptyConversation("chat_complete requires at least one message")
    if messages[-1].role not in ("user", "tool"):
        raise EmptyConversation("conversation must end with a user or tool message")

    if config.mode == "stub":
        key = _final_user_content(messages)
        return config.chat_fixtures.get(key, STUB_NO_SCRIPT)

    payload = {
        "model": config.chat_model,
        "messages": [{"role": m.role, "content": m.content} for m in messages],
        **dict(config.options),
    }
    data = _post_json(config, "/chat/completions", payload)
    try:
        return data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise TransportError(f"malformed chat response: {exc}") from exc


def embed_text(text: str, config: ProviderConfig) -> EmbeddingVector:
    """Embed one text into an L2-normalized vector of the provider's dimension.

    Stub mode hashes each token (FNV-1a 64-bit of the lowercased token) into
    one of 64 buckets; bucket counts, L2-normalized, form the vector.
    Identical texts give bitwise-identical vectors.
    """
    if not text or not text.strip():
        raise EmptyText("embed_text requires non-blank text")

    if config.mode == "stub":
        counts = [0.0] * STUB_EMBED_DIMS
        for token in tokenize(text):
            counts[_fnv1a64(token.lower()) % STUB_EMBED_DIMS] += 1.0
        return _l2_normalized(counts)

    payload = {"model": config.embed_model, "input": text}
    data = _post_json(config, "/embeddings", payload)
    try:
        values = [float(v) for v in data["data"][0]["embedding"]]
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise TransportError(f"malformed embedding response: {exc}") from exc
    if not values:
        raise TransportError("provider returned an empty embedding")
    return _l2_normalized(values)


def stub_bucket(token: str) -> int:
    """Bucket index the stub embedding assigns to one token."""
    return _fnv1a64(token.lower()) % STUB_EMBED_DIMS


def _fnv1a64(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def _l2_normalized(values: list[float]) -> EmbeddingVector:
    norm = math.sqrt(sum(v * v for v in values))
    if norm == 0.0:
        # non-blank text always yields at least one token, so only live
        # providers can hand us a zero vector
        raise TransportError("cannot normalize a zero embedding")
    return EmbeddingVector(
        dims=len(values),
        values=tuple(v / norm for v in values),
        normalized=True,
    )


def _final_user_content(messages: Sequence[ChatMessage]) -> str:
    for msg in reversed(messages):
        if msg.role == "user":
            return msg.content
    return messages[-1].content


def _post_json(config: ProviderConfig, path: str, payload: dict) -> dict:
    url = config.base_url.rstrip("/") + path
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    try:
        resp = httpx.post(url, json=payload, headers=headers, timeout=config.timeout)
    except httpx.HTTPError as exc:
        raise TransportError(f"provider request failed: {exc}") from exc
    if resp.status_code // 100 != 2:
        raise TransportError(f"provider returned HTTP {resp.status_code}: {resp.text[:200]}")
    try:
        return resp.json()
    except json.JSONDecodeError as exc:
        raise TransportError(f"provider returned invalid JSON: {exc}") from exc
