"""Completion and embedding clients: HTTP adapters, deterministic stubs,
and a persistent response cache keyed for exact replay.

The cache file is append-only JSON lines, one entry per completed request,
so runs are crash-safe, diffable, and shareable as test fixtures. A cache
with no inner client is a replay: any miss is an error instead of a
network call.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
import requests

from . import recognition
from .corpus import Dataset, Entity
from .normalize import tokenize

CACHE_ENTRY_VERSION = 1
EMBEDDINGS_FILE_FORMAT = "fewner-embeddings"
EMBEDDINGS_FILE_VERSION = 1


class ModelClientError(RuntimeError):
    """Base error for provider, cache and payload failures."""


class TransportError(ModelClientError):
    """Request kept failing after the configured retries."""


class ReplayMissError(ModelClientError):
    """Replay-only cache was asked for a prompt it has never seen."""


class EmbeddingError(ModelClientError):
    """Embedding provider failure or missing precomputed entry."""


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class DecodingParams:
    """Fixed decoding settings; temperature 0 keeps runs repeatable."""

    temperature: float = 0.0
    max_output_tokens: int = 1024


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    prompt: str
    decoding: DecodingParams = DecodingParams()

    def __post_init__(self):
        if not self.prompt:
            raise ModelClientError("completion request needs a non-empty prompt")


def cache_key(
    provider: str,
    model: str,
    template_version: str,
    prompt: str,
    decoding: DecodingParams,
) -> str:
    """Digest over everything that could change the response."""
    material = json.dumps(
        {
            "provider": provider,
            "model": model,
            "template_version": template_version,
            "prompt_digest": text_digest(prompt),
            "temperature": decoding.temperature,
            "max_output_tokens": decoding.max_output_tokens,
        },
        sort_keys=True,
    )
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


class ResponseCache:
    """Append-only JSONL store; entries are immutable once written.

    The full file is loaded into memory at startup; reads are lock-free
    and writes are serialized through one lock. A torn final line (from a
    crash mid-append) is tolerated; corruption elsewhere is an error.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._entries: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            lines = self.path.read_text(encoding="utf-8").splitlines()
            for i, line in enumerate(lines):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError as exc:
                    if i == len(lines) - 1:
                        continue  # torn final append
                    raise ModelClientError(f"{self.path}:{i + 1}: corrupt cache line") from exc
                if entry.get("v") != CACHE_ENTRY_VERSION:
                    raise ModelClientError(
                        f"{self.path}:{i + 1}: unsupported cache entry version"
                    )
                self._entries.setdefault(entry["key"], entry)

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> dict | None:
        return self._entries.get(key)

    def put(self, entry: dict) -> None:
        with self._lock:
            if entry["key"] in self._entries:
                return
            self._entries[entry["key"]] = entry
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(entry, sort_keys=True) + "\n")
                handle.flush()

    def entries(self) -> list[dict]:
        return list(self._entries.values())


class CachingCompletionClient:
    """Cache wrapper: hit -> stored text with zero inner calls; miss -> inner.

    With ``inner=None`` the client is replay-only and raises ReplayMissError
    on any uncached request.
    """

    def __init__(
        self,
        inner,
        cache_path: str | Path,
        provider_name: str,
        template_version: str,
    ):
        self.inner = inner
        self.provider_name = provider_name
        self.template_version = template_version
        self.cache = ResponseCache(cache_path)
        self.hits = 0
        self.misses = 0
        self._counter_lock = threading.Lock()

    def complete(self, request: CompletionRequest) -> str:
        key = cache_key(
            self.provider_name,
            request.model,
            self.template_version,
            request.prompt,
            request.decoding,
        )
        entry = self.cache.get(key)
        if entry is not None:
            with self._counter_lock:
                self.hits += 1
            return entry["response"]
        if self.inner is None:
            raise ReplayMissError(
                f"no cached response for key {key[:16]} (prompt digest"
                f" {text_digest(request.prompt)[:16]}) and replay-only mode is active"
            )
        with self._counter_lock:
            self.misses += 1
        if hasattr(self.inner, "complete_with_usage"):
            response, usage = self.inner.complete_with_usage(request)
        else:
            response = self.inner.complete(request)
            usage = None
        self.cache.put(
            {
                "v": CACHE_ENTRY_VERSION,
                "key": key,
                "provider": self.provider_name,
                "model": request.model,
                "template_version": self.template_version,
                "prompt_digest": text_digest(request.prompt),
                "decoding": {
                    "temperature": request.decoding.temperature,
                    "max_output_tokens": request.decoding.max_output_tokens,
                },
                "response": response,
                "ts": time.time(),
                "usage": usage,
            }
        )
        return response

    @property
    def inner_calls(self) -> int:
        return self.misses

    def hit_ratio(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0


class ThrottledCompletionClient:
    """Bound the number of in-flight requests to the wrapped client."""

    def __init__(self, inner, max_in_flight: int):
        if max_in_flight < 1:
            raise ModelClientError("max_in_flight must be >= 1")
        self.inner = inner
        self._semaphore = threading.BoundedSemaphore(max_in_flight)

    def complete(self, request: CompletionRequest) -> str:
        with self._semaphore:
            return self.inner.complete(request)


# ---------------------------------------------------------------------------
# Deterministic stubs


class ScriptedCompletionClient:
    """Replays a fixed {prompt digest -> response} table."""

    def __init__(self, responses: Mapping[str, str], default: str | None = None):
        self.responses = dict(responses)
        self.default = default
        self.calls = 0

    @classmethod
    def from_prompts(cls, prompt_to_response: Mapping[str, str], default: str | None = None):
        return cls(
            {text_digest(p): r for p, r in prompt_to_response.items()}, default=default
        )

    def complete(self, request: CompletionRequest) -> str:
        self.calls += 1
        digest = text_digest(request.prompt)
        if digest in self.responses:
            return self.responses[digest]
        if self.default is not None:
            return self.default
        raise ModelClientError(f"scripted client has no response for digest {digest[:16]}")


class FixedCompletionClient:
    """Always returns the same text, whatever the prompt."""

    def __init__(self, text: str = ""):
        self.text = text
        self.calls = 0

    def complete(self, request: CompletionRequest) -> str:
        self.calls += 1
        return self.text


class CallableCompletionClient:
    """Delegates to a prompt -> text function (for purpose-built test models)."""

    def __init__(self, fn: Callable[[str], str]):
        self.fn = fn
        self.calls = 0

    def complete(self, request: CompletionRequest) -> str:
        self.calls += 1
        return self.fn(request.prompt)


class GoldEchoCompletionClient:
    """Answers with the gold entity lines for any input text it knows.

    Reads the input text back out of the prompt's final example block, so
    it works under any retrieval mechanism and any k.
    """

    def __init__(self, gold: Mapping[str, frozenset[Entity]]):
        self.gold = dict(gold)
        self.calls = 0

    @classmethod
    def from_datasets(cls, *datasets: Dataset) -> "GoldEchoCompletionClient":
        gold: dict[str, frozenset[Entity]] = {}
        for dataset in datasets:
            for example in dataset.examples:
                gold.setdefault(example.text, example.entities)
        return cls(gold)

    def complete(self, request: CompletionRequest) -> str:
        self.calls += 1
        input_text = recognition.final_input_text(request.prompt)
        entities = self.gold.get(input_text)
        if entities is None:
            return ""
        return recognition.render_answer_block(entities, input_text)


# ---------------------------------------------------------------------------
# HTTP adapters

Transport = Callable[[str, dict, dict, float], tuple[int, dict]]


def _requests_transport(url: str, headers: dict, payload: dict, timeout: float):
    response = requests.post(url, headers=headers, json=payload, timeout=timeout)
    return response.status_code, response.json()


def _excerpt(payload) -> str:
    text = json.dumps(payload, default=str)
    return text[:200] + ("..." if len(text) > 200 else "")


class _HttpBase:
    def __init__(
        self,
        endpoint: str,
        auth_env: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        transport: Transport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self.auth_env = auth_env
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.transport = transport or _requests_transport
        self.sleep = sleep

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.auth_env:
            import os

            credential = os.environ.get(self.auth_env)
            if not credential:
                raise ModelClientError(
                    f"credential environment variable {self.auth_env} is not set"
                )
            headers["Authorization"] = f"Bearer {credential}"
        return headers

    def _post(self, payload: dict) -> dict:
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self.sleep(self.backoff_base * 2 ** (attempt - 1))
            try:
                status, body = self.transport(
                    self.endpoint, self._headers(), payload, self.timeout
                )
            except (requests.RequestException, ConnectionError, OSError) as exc:
                last_error = exc
                continue
            if status == 429 or status >= 500:
                last_error = ModelClientError(f"HTTP {status}: {_excerpt(body)}")
                continue
            if status != 200:
                raise ModelClientError(f"HTTP {status}: {_excerpt(body)}")
            return body
        raise TransportError(
            f"request failed after {self.max_retries + 1} attempts: {last_error}"
        ) from last_error


class HttpCompletionClient(_HttpBase):
    """Generic chat/completions endpoint adapter.

    ``api_shape`` selects the payload convention: ``chat`` sends messages
    and reads choices[0].message.content; ``text`` sends a prompt and
    reads choices[0].text.
    """

    def __init__(self, endpoint: str, api_shape: str = "chat", **kwargs):
        super().__init__(endpoint, **kwargs)
        if api_shape not in ("chat", "text"):
            raise ModelClientError(f"unknown api shape {api_shape!r}")
        self.api_shape = api_shape

    def complete(self, request: CompletionRequest) -> str:
        return self.complete_with_usage(request)[0]

    def complete_with_usage(self, request: CompletionRequest):
        if self.api_shape == "chat":
            payload = {
                "model": request.model,
                "messages": [{"role": "user", "content": request.prompt}],
                "temperature": request.decoding.temperature,
                "max_tokens": request.decoding.max_output_tokens,
            }
        else:
            payload = {
                "model": request.model,
                "prompt": request.prompt,
                "temperature": request.decoding.temperature,
                "max_tokens": request.decoding.max_output_tokens,
            }
        body = self._post(payload)
        try:
            if self.api_shape == "chat":
                text = body["choices"][0]["message"]["content"]
            else:
                text = body["choices"][0]["text"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ModelClientError(
                f"malformed completion payload: {_excerpt(body)}"
            ) from exc
        return str(text), body.get("usage")


# ---------------------------------------------------------------------------
# Embedding providers


class HashEmbeddingProvider:
    """Deterministic bag-of-words embedding for tests and offline runs.

    For each lowercased token, sha256(token) selects a bucket
    (first 4 digest bytes, big-endian, mod dim) and a sign (+1 when digest
    byte 4 is even), and the token count is accumulated there. A vector
    that ends up all-zero gets a 1 in bucket 0. Entries stay as signed
    integer counts: similarity math on small integers is exact in float64,
    so independently recomputed scores match bit for bit.
    """

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise EmbeddingError("dim must be >= 1")
        self.dim = dim
        self.name = f"hash-bow-{dim}"

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            counts = Counter(t.lower() for t in tokenize(text))
            for token, count in counts.items():
                digest = hashlib.sha256(token.encode("utf-8")).digest()
                bucket = int.from_bytes(digest[:4], "big") % self.dim
                sign = 1.0 if digest[4] % 2 == 0 else -1.0
                out[row, bucket] += sign * count
            if not out[row].any():
                out[row, 0] = 1.0
        return out


class PrecomputedEmbeddingProvider:
    """Serves vectors from a JSONL file keyed by text digest."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        lines = self.path.read_text(encoding="utf-8").splitlines()
        if not lines:
            raise EmbeddingError(f"{self.path}: empty embeddings file")
        header = json.loads(lines[0])
        if header.get("format") != EMBEDDINGS_FILE_FORMAT:
            raise EmbeddingError(f"{self.path}: not an embeddings file")
        if header.get("version") != EMBEDDINGS_FILE_VERSION:
            raise EmbeddingError(
                f"{self.path}: unsupported version {header.get('version')!r}"
            )
        self.dim = int(header["dim"])
        self.name = f"precomputed({header['provider']})"
        self._vectors: dict[str, np.ndarray] = {}
        for line in lines[1:]:
            if not line.strip():
                continue
            record = json.loads(line)
            vector = np.asarray(record["vector"], dtype=np.float64)
            if vector.shape != (self.dim,):
                raise EmbeddingError(
                    f"{self.path}: vector for {record.get('id')} has wrong dimension"
                )
            self._vectors[record["digest"]] = vector

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            digest = text_digest(text)
            vector = self._vectors.get(digest)
            if vector is None:
                raise EmbeddingError(f"no precomputed embedding for text digest {digest}")
            out[row] = vector
        return out


def write_embeddings_file(
    path: str | Path,
    provider,
    items: Sequence[tuple[str, str]],
) -> None:
    """Embed (id, text) pairs with ``provider`` and write the JSONL file."""
    vectors = np.asarray(provider.embed([text for _, text in items]), dtype=np.float64)
    header = {
        "format": EMBEDDINGS_FILE_FORMAT,
        "version": EMBEDDINGS_FILE_VERSION,
        "provider": provider.name,
        "dim": int(vectors.shape[1]),
    }
    with Path(path).open("w", encoding="utf-8") as handle:
        handle.write(json.dumps(header, sort_keys=True) + "\n")
        for (item_id, text), vector in zip(items, vectors):
            handle.write(
                json.dumps(
                    {"id": item_id, "digest": text_digest(text), "vector": vector.tolist()},
                    sort_keys=True,
                )
                + "\n"
            )


class HttpEmbeddingProvider(_HttpBase):
    """Generic embeddings endpoint adapter ({model, input} -> {data: [...]})."""

    def __init__(self, endpoint: str, model: str, batch_size: int = 64, **kwargs):
        super().__init__(endpoint, **kwargs)
        self.model = model
        self.batch_size = batch_size
        self.name = f"http({model})"

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        rows: list[list[float]] = []
        for start in range(0, len(texts), self.batch_size):
            batch = list(texts[start : start + self.batch_size])
            body = self._post({"model": self.model, "input": batch})
            try:
                data = body["data"]
                if any("index" in item for item in data):
                    data = sorted(data, key=lambda item: item["index"])
                vectors = [item["embedding"] for item in data]
            except (KeyError, TypeError) as exc:
                raise EmbeddingError(
                    f"malformed embeddings payload: {_excerpt(body)}"
                ) from exc
            if len(vectors) != len(batch):
                raise EmbeddingError(
                    f"expected {len(batch)} embeddings, got {len(vectors)}"
                )
            rows.extend(vectors)
        return np.asarray(rows, dtype=np.float64)


# ---------------------------------------------------------------------------
# Run-level handle


@dataclass
class ModelHandle:
    """Bundles a completion client with the model id and decoding settings."""

    client: object
    model: str
    decoding: DecodingParams = field(default_factory=DecodingParams)

    def generate(self, prompt: str) -> str:
        return self.client.complete(CompletionRequest(self.model, prompt, self.decoding))
