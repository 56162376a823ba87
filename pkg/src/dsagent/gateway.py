"""Chat-completion and embedding access with caching, retries, and mocks.

Everything downstream talks to the two small interfaces ``ChatGateway``
and ``EmbeddingGateway``; the HTTP implementations target an
OpenAI-compatible wire schema and the mock implementations are pure
functions of the request, so temperature-0 runs are reproducible offline.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import numpy as np


class GatewayError(Exception):
    """Base class for provider-side failures."""


class RetriesExhausted(GatewayError):
    pass


class AuthenticationError(GatewayError):
    pass


class ContentError(GatewayError):
    """Provider rejected or refused the request content."""


@dataclass(frozen=True, slots=True)
class ChatRequest:
    system_instruction: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    max_output_tokens: int = 4096
    model_id: str = "default"

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("ChatRequest needs at least one message")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 1]")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")

    def payload_hash(self) -> str:
        payload = json.dumps(
            {
                "system": self.system_instruction,
                "messages": list(self.messages),
                "temperature": self.temperature,
                "max_output_tokens": self.max_output_tokens,
                "model_id": self.model_id,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True, slots=True)
class EmbeddingVector:
    values: tuple[float, ...]
    model_id: str = "default"

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("empty embedding")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding contains non-finite values")

    @property
    def dimension(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


@dataclass(slots=True)
class GatewayConfig:
    endpoint: str = ""
    credential_env: str = "DSAGENT_API_KEY"
    max_attempts: int = 3
    backoff_base_s: float = 1.0
    timeout_s: float = 120.0
    cache_dir: Path | None = None

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")


class ChatGateway(Protocol):
    def complete(self, request: ChatRequest) -> str: ...


class EmbeddingGateway(Protocol):
    def embed(self, text: str) -> EmbeddingVector: ...


# ---------------------------------------------------------------------------
# Mocks

class MockChatGateway:
    """Scripted chat model: responses are a pure function of the request.

    Lookup order: exact payload-hash script entries, then the fallback
    callable, then the default response.
    """

    def __init__(
        self,
        script: dict[str, str] | None = None,
        respond: Callable[[ChatRequest], str] | None = None,
        default: str = "",
        model_id: str = "mock-chat",
    ) -> None:
        self.script = dict(script or {})
        self.respond = respond
        self.default = default
        self.model_id = model_id
        self.call_count = 0
        self.seen_requests: list[ChatRequest] = []

    def complete(self, request: ChatRequest) -> str:
        self.call_count += 1
        self.seen_requests.append(request)
        key = request.payload_hash()
        if key in self.script:
            return self.script[key]
        if self.respond is not None:
            return self.respond(request)
        return self.default


_TOKEN_RE = re.compile(r"[a-z0-9]+")


class MockEmbedder:
    """Deterministic bag-of-tokens embedder.

    Tokens are lowercased alphanumeric runs hashed into a fixed-dimension
    count vector, then L2-normalized. Order-insensitive, so paraphrases
    sharing vocabulary come out similar; disjoint vocabularies are
    orthogonal up to hash collisions.
    """

    def __init__(self, dimension: int = 256, model_id: str = "mock-embed") -> None:
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.model_id = model_id
        self.call_count = 0

    @staticmethod
    def _token_index(token: str, dimension: int) -> int:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") % dimension

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValueError("cannot embed empty text")
        self.call_count += 1
        counts = np.zeros(self.dimension, dtype=np.float64)
        for token in _TOKEN_RE.findall(text.lower()):
            counts[self._token_index(token, self.dimension)] += 1.0
        norm = float(np.linalg.norm(counts))
        if norm == 0.0:
            # No alphanumeric tokens at all; pin to a fixed direction.
            counts[0] = 1.0
            norm = 1.0
        return EmbeddingVector(values=tuple(counts / norm), model_id=self.model_id)


# ---------------------------------------------------------------------------
# Disk cache wrappers

class _DiskCache:
    """One file per key; writes are serialized and atomic."""

    def __init__(self, directory: Path) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def get(self, key: str) -> str | None:
        path = self.directory / key
        if path.is_file():
            return path.read_text(encoding="utf-8")
        return None

    def put(self, key: str, value: str) -> None:
        with self._lock:
            tmp = self.directory / f".{key}.tmp"
            tmp.write_text(value, encoding="utf-8")
            tmp.replace(self.directory / key)


class CachingChatGateway:
    def __init__(self, inner: ChatGateway, cache_dir: Path) -> None:
        self.inner = inner
        self._cache = _DiskCache(Path(cache_dir) / "chat")

    def complete(self, request: ChatRequest) -> str:
        key = request.payload_hash()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        result = self.inner.complete(request)
        self._cache.put(key, result)
        return result


class CachingEmbedder:
    """Content-addressed embedding cache; re-embedding hits disk, not the provider."""

    def __init__(self, inner: EmbeddingGateway, cache_dir: Path) -> None:
        self.inner = inner
        self._cache = _DiskCache(Path(cache_dir) / "embed")

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValueError("cannot embed empty text")
        model_id = getattr(self.inner, "model_id", "default")
        key = hashlib.sha256(f"{model_id}\x00{text}".encode("utf-8")).hexdigest()
        hit = self._cache.get(key)
        if hit is not None:
            payload = json.loads(hit)
            return EmbeddingVector(values=tuple(payload["values"]), model_id=payload["model_id"])
        vector = self.inner.embed(text)
        self._cache.put(
            key,
            json.dumps({"values": list(vector.values), "model_id": vector.model_id}),
        )
        return vector


# ---------------------------------------------------------------------------
# HTTP providers (OpenAI-compatible wire schema)

def _api_key(config: GatewayConfig) -> str:
    import os

    key = os.environ.get(config.credential_env, "")
    if not key:
        raise AuthenticationError(
            f"credential env var {config.credential_env!r} is empty or unset"
        )
    return key


def _post_with_retries(config: GatewayConfig, url: str, body: dict) -> dict:
    import requests

    last_error: Exception | None = None
    for attempt in range(config.max_attempts):
        if attempt:
            time.sleep(config.backoff_base_s * 2 ** (attempt - 1))
        try:
            response = requests.post(
                url,
                json=body,
                headers={"Authorization": f"Bearer {_api_key(config)}"},
                timeout=config.timeout_s,
            )
        except requests.RequestException as exc:
            last_error = exc
            continue
        if response.status_code in (401, 403):
            raise AuthenticationError(f"provider returned {response.status_code}")
        if response.status_code == 400:
            raise ContentError(response.text)
        if response.status_code >= 500 or response.status_code == 429:
            last_error = GatewayError(f"provider returned {response.status_code}")
            continue
        return response.json()
    raise RetriesExhausted(f"gave up after {config.max_attempts} attempts: {last_error}")


class HttpChatGateway:
    def __init__(self, config: GatewayConfig, model_id: str) -> None:
        self.config = config
        self.model_id = model_id

    def complete(self, request: ChatRequest) -> str:
        messages = [{"role": "system", "content": request.system_instruction}]
        messages += [{"role": role, "content": text} for role, text in request.messages]
        body = {
            "model": request.model_id or self.model_id,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        data = _post_with_retries(self.config, f"{self.config.endpoint}/chat/completions", body)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError) as exc:
            raise ContentError(f"malformed provider response: {exc}") from None


class HttpEmbedder:
    def __init__(self, config: GatewayConfig, model_id: str) -> None:
        self.config = config
        self.model_id = model_id

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValueError("cannot embed empty text")
        body = {"model": self.model_id, "input": text}
        data = _post_with_retries(self.config, f"{self.config.endpoint}/embeddings", body)
        try:
            values = data["data"][0]["embedding"]
        except (KeyError, IndexError) as exc:
            raise ContentError(f"malformed provider response: {exc}") from None
        return EmbeddingVector(values=tuple(float(v) for v in values), model_id=self.model_id)
