"""Example retrieval over a training dataset.

Four mechanisms share one contract: build an index over the training set
once, then return the k best examples for an input text. The mechanisms
are Okapi BM25 over a normalized copy, cosine-similarity search over
dense embeddings, an MMR diversity re-ranking of the semantic scores, and
a reciprocal-rank-fusion hybrid of BM25 and semantic rankings. A
fixed-random selection serves as the no-retrieval baseline.

Ranking output is a list of (example id, score) pairs in descending score
order. Ties break by ascending example id everywhere, which makes every
mechanism deterministic and gives retrieve(k) the prefix property with
respect to retrieve(k') for k < k'.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .corpus import Dataset, Example, normalize_copy
from .normalize import Normalizer, tokenize

RankedList = list[tuple[str, float]]

BM25_INDEX_FORMAT = "fewner-bm25-index"
SEMANTIC_INDEX_FORMAT = "fewner-semantic-index"
INDEX_VERSION = 1


class RetrievalError(ValueError):
    """Raised for invalid retrieval requests or unbuildable indexes."""


def _require_k(k: int) -> None:
    if k < 1:
        raise RetrievalError(f"k must be >= 1, got {k}")


def rank_top_k(scores: dict[str, float], k: int) -> RankedList:
    """Top-k ids by descending score, ties broken by ascending id."""
    ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return ordered[:k]


# ---------------------------------------------------------------------------
# BM25


@dataclass(frozen=True)
class Bm25Params:
    """Okapi parameters: k1 saturates term frequency, b scales length normalization."""

    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise RetrievalError(f"k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise RetrievalError(f"b must be in [0, 1], got {self.b}")


def bm25_tokens(text: str) -> list[str]:
    return [t.lower() for t in tokenize(text)]


@dataclass
class Bm25Index:
    """Per-term and per-document statistics over the normalized training copy.

    Immutable after build; safe for concurrent queries.
    """

    ids: tuple[str, ...]
    doc_tfs: list[dict[str, int]]
    doc_lens: list[int]
    df: dict[str, int]
    avgdl: float
    n: int
    params: Bm25Params
    normalizer_name: str = "unspecified"


def build_bm25_index(
    normalized_dataset: Dataset,
    params: Bm25Params = Bm25Params(),
    normalizer_name: str = "unspecified",
) -> Bm25Index:
    """Count term statistics over an already-normalized dataset."""
    if not normalized_dataset.examples:
        raise RetrievalError("cannot build a BM25 index over an empty dataset")
    ids = tuple(ex.id for ex in normalized_dataset.examples)
    doc_tfs = []
    doc_lens = []
    df: Counter[str] = Counter()
    for ex in normalized_dataset.examples:
        tokens = bm25_tokens(ex.text)
        tf = dict(Counter(tokens))
        doc_tfs.append(tf)
        doc_lens.append(len(tokens))
        df.update(tf.keys())
    n = len(ids)
    avgdl = sum(doc_lens) / n
    return Bm25Index(
        ids=ids,
        doc_tfs=doc_tfs,
        doc_lens=doc_lens,
        df=dict(df),
        avgdl=avgdl,
        n=n,
        params=params,
        normalizer_name=normalizer_name,
    )


def bm25_idf(index: Bm25Index, term: str) -> float:
    df = index.df.get(term, 0)
    return math.log(1.0 + (index.n - df + 0.5) / (df + 0.5))


def bm25_score_all(index: Bm25Index, query_tokens: Sequence[str]) -> dict[str, float]:
    """Okapi score of every indexed document against the query token list.

    score(D, Q) = sum over q of IDF(q) * tf(q,D)*(k1+1) /
                  (tf(q,D) + k1*(1 - b + b*|D|/avgdl))
    with IDF(q) = ln(1 + (N - df(q) + 0.5) / (df(q) + 0.5)). Query tokens
    contribute once per occurrence.
    """
    k1, b = index.params.k1, index.params.b
    scores = dict.fromkeys(index.ids, 0.0)
    for term in query_tokens:
        if term not in index.df:
            continue
        idf = bm25_idf(index, term)
        for doc_idx, doc_id in enumerate(index.ids):
            tf = index.doc_tfs[doc_idx].get(term, 0)
            if tf == 0:
                continue
            length_ratio = index.doc_lens[doc_idx] / index.avgdl if index.avgdl > 0 else 0.0
            denom = tf + k1 * (1.0 - b + b * length_ratio)
            scores[doc_id] += idf * tf * (k1 + 1.0) / denom
    return scores


def bm25_retrieve(
    index: Bm25Index, query_text: str, normalizer: Normalizer, k: int
) -> RankedList:
    """Top-k under Okapi BM25; the query goes through the index's normalizer.

    A query sharing no terms with the corpus still returns k entries, all
    scored 0 and ordered by the id tie rule.
    """
    _require_k(k)
    query_tokens = [t.lower() for t in normalizer.tokens(query_text)]
    return rank_top_k(bm25_score_all(index, query_tokens), k)


# ---------------------------------------------------------------------------
# Semantic search


class EmbeddingProvider(Protocol):
    name: str

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


def encode(
    provider: EmbeddingProvider,
    texts: Sequence[str],
    instruction: str | None = None,
) -> np.ndarray:
    """Embed texts, optionally prefixing each with a query instruction.

    The instruction is joined to the text with a single space and must only
    be used for query-side encoding, never for indexed example texts.
    """
    if instruction:
        texts = [f"{instruction} {text}" for text in texts]
    vectors = np.asarray(provider.embed(texts), dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] != len(texts):
        raise RetrievalError(
            f"provider returned shape {vectors.shape} for {len(texts)} texts"
        )
    if not np.all(np.isfinite(vectors)):
        raise RetrievalError("provider returned non-finite embedding values")
    return vectors


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise RetrievalError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise RetrievalError("cosine similarity is undefined for zero vectors")
    return float(np.dot(a, b)) / (norm_a * norm_b)


@dataclass
class SemanticIndex:
    """Example-aligned embeddings plus the descriptor of their encoder.

    ``provider`` is the live encoder handle used to embed queries; it is
    not part of the persisted form and must be re-attached after loading.
    """

    ids: tuple[str, ...]
    vectors: np.ndarray
    provider_name: str
    instruction: str | None = None
    provider: EmbeddingProvider | None = field(default=None, repr=False)


def build_semantic_index(
    dataset: Dataset,
    provider: EmbeddingProvider,
    instruction: str | None = None,
) -> SemanticIndex:
    """Embed every training text (without the query instruction) once."""
    if not dataset.examples:
        raise RetrievalError("cannot build a semantic index over an empty dataset")
    vectors = encode(provider, [ex.text for ex in dataset.examples], instruction=None)
    return SemanticIndex(
        ids=tuple(ex.id for ex in dataset.examples),
        vectors=vectors,
        provider_name=provider.name,
        instruction=instruction,
        provider=provider,
    )


def _query_similarities(index: SemanticIndex, query_embedding: np.ndarray) -> np.ndarray:
    q = np.asarray(query_embedding, dtype=np.float64)
    if q.shape != (index.vectors.shape[1],):
        raise RetrievalError(
            f"query dimension {q.shape} does not match index dimension"
            f" {index.vectors.shape[1]}"
        )
    q_norm = float(np.linalg.norm(q))
    norms = np.linalg.norm(index.vectors, axis=1)
    if q_norm == 0.0 or np.any(norms == 0.0):
        raise RetrievalError("cosine similarity is undefined for zero vectors")
    return (index.vectors @ q) / (norms * q_norm)


def embed_query(index: SemanticIndex, query_text: str) -> np.ndarray:
    if index.provider is None:
        raise RetrievalError("semantic index has no live embedding provider attached")
    return encode(index.provider, [query_text], instruction=index.instruction)[0]


def semantic_retrieve_embedding(
    index: SemanticIndex, query_embedding: np.ndarray, k: int
) -> RankedList:
    _require_k(k)
    sims = _query_similarities(index, query_embedding)
    return rank_top_k({doc_id: float(s) for doc_id, s in zip(index.ids, sims)}, k)


def semantic_retrieve(index: SemanticIndex, query_text: str, k: int) -> RankedList:
    """Top-k by cosine similarity. k beyond the index size returns everything."""
    return semantic_retrieve_embedding(index, embed_query(index, query_text), k)


# ---------------------------------------------------------------------------
# Maximal marginal relevance


@dataclass(frozen=True)
class MmrParams:
    """lambda = 0 reproduces plain semantic ranking; higher values add diversity."""

    lambda_: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.lambda_ <= 1.0:
            raise RetrievalError(f"lambda must be in [0, 1], got {self.lambda_}")


def mmr_rerank(
    index: SemanticIndex,
    query_embedding: np.ndarray,
    params: MmrParams,
    k: int,
) -> RankedList:
    """Greedy diversity re-ranking of the semantic candidates.

    The first pick maximizes query similarity alone; each later pick
    maximizes (1 - lambda) * sim(d, query) - lambda * max sim(d, selected).
    Reported scores are the value each pick was selected on.
    """
    _require_k(k)
    lam = params.lambda_
    sims = _query_similarities(index, query_embedding)
    n = len(index.ids)
    norms = np.linalg.norm(index.vectors, axis=1)

    remaining = set(range(n))
    selected: list[tuple[str, float]] = []
    max_sim_to_selected = np.full(n, -np.inf)

    def pick(score_of) -> int:
        best = min(remaining, key=lambda i: (-score_of(i), index.ids[i]))
        return best

    while remaining and len(selected) < k:
        if not selected:
            choice = pick(lambda i: sims[i])
            score = float(sims[choice])
        else:
            choice = pick(
                lambda i: (1.0 - lam) * sims[i] - lam * max_sim_to_selected[i]
            )
            score = float(
                (1.0 - lam) * sims[choice] - lam * max_sim_to_selected[choice]
            )
        selected.append((index.ids[choice], score))
        remaining.discard(choice)
        if remaining:
            pair_sims = (index.vectors @ index.vectors[choice]) / (
                norms * norms[choice]
            )
            idx = np.fromiter(remaining, dtype=int)
            max_sim_to_selected[idx] = np.maximum(
                max_sim_to_selected[idx], pair_sims[idx]
            )
    return selected


# ---------------------------------------------------------------------------
# Reciprocal rank fusion


@dataclass(frozen=True)
class RrfParams:
    c: float = 60.0

    def __post_init__(self):
        if self.c <= 0:
            raise RetrievalError(f"C must be > 0, got {self.c}")


def rrf_fuse(lists: Sequence[RankedList], params: RrfParams, k: int) -> RankedList:
    """Fuse rankings by summing 1 / (C + rank) with 1-based ranks.

    An id missing from one list simply contributes nothing for that list.
    """
    _require_k(k)
    if not lists:
        raise RetrievalError("rrf_fuse needs at least one ranked list")
    fused: dict[str, float] = {}
    for ranked in lists:
        for rank, (doc_id, _score) in enumerate(ranked, start=1):
            fused[doc_id] = fused.get(doc_id, 0.0) + 1.0 / (params.c + rank)
    return rank_top_k(fused, k)


# ---------------------------------------------------------------------------
# Fixed-random baseline


def fixed_random_select(dataset: Dataset, k: int, seed: int) -> list[Example]:
    """The same k examples for every inference, fixed by (dataset, k, seed).

    The full example list is shuffled by one Fisher-Yates pass driven by
    ``random.Random(seed).randrange`` (high index down to 1), and the first
    k entries are returned, so the selection for k is a prefix of the
    selection for k + 1.
    """
    _require_k(k)
    n = len(dataset.examples)
    if k > n:
        raise RetrievalError(f"cannot select {k} examples from a dataset of {n}")
    rng = random.Random(seed)
    order = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.randrange(i + 1)
        order[i], order[j] = order[j], order[i]
    return [dataset.examples[i] for i in order[:k]]


# ---------------------------------------------------------------------------
# Mechanism facade


class Retriever:
    """Common interface: retrieve(input_text, k) -> most-similar-first Examples."""

    descriptor: str

    def retrieve(self, input_text: str, k: int) -> list[Example]:
        raise NotImplementedError

    def ranked(self, input_text: str, k: int) -> RankedList:
        raise NotImplementedError


class _IndexedRetriever(Retriever):
    def __init__(self, dataset: Dataset):
        self._by_id = dataset.by_id()

    def retrieve(self, input_text: str, k: int) -> list[Example]:
        _require_k(k)
        return [self._by_id[doc_id] for doc_id, _ in self.ranked(input_text, k)]


class Bm25Retriever(_IndexedRetriever):
    def __init__(self, dataset: Dataset, normalizer: Normalizer, params: Bm25Params):
        super().__init__(dataset)
        self.normalizer = normalizer
        self.index = build_bm25_index(
            normalize_copy(dataset, normalizer), params, normalizer_name=normalizer.name
        )
        self.descriptor = f"bm25(k1={params.k1},b={params.b})"

    def ranked(self, input_text: str, k: int) -> RankedList:
        return bm25_retrieve(self.index, input_text, self.normalizer, k)


class SemanticRetriever(_IndexedRetriever):
    def __init__(
        self,
        dataset: Dataset,
        provider: EmbeddingProvider,
        instruction: str | None = None,
    ):
        super().__init__(dataset)
        self.index = build_semantic_index(dataset, provider, instruction)
        self.descriptor = f"semantic({provider.name})"

    def ranked(self, input_text: str, k: int) -> RankedList:
        return semantic_retrieve(self.index, input_text, k)


class MmrRetriever(_IndexedRetriever):
    def __init__(
        self,
        dataset: Dataset,
        provider: EmbeddingProvider,
        params: MmrParams,
        instruction: str | None = None,
    ):
        super().__init__(dataset)
        self.index = build_semantic_index(dataset, provider, instruction)
        self.params = params
        self.descriptor = f"semantic+mmr(lambda={params.lambda_})"

    def ranked(self, input_text: str, k: int) -> RankedList:
        query = embed_query(self.index, input_text)
        return mmr_rerank(self.index, query, self.params, k)


class HybridRetriever(_IndexedRetriever):
    """RRF fusion of the full BM25 and semantic rankings over the training set."""

    def __init__(
        self,
        dataset: Dataset,
        normalizer: Normalizer,
        provider: EmbeddingProvider,
        bm25_params: Bm25Params,
        rrf_params: RrfParams,
        instruction: str | None = None,
    ):
        super().__init__(dataset)
        self.bm25 = Bm25Retriever(dataset, normalizer, bm25_params)
        self.semantic = SemanticRetriever(dataset, provider, instruction)
        self.rrf_params = rrf_params
        self.n = len(dataset.examples)
        self.descriptor = f"hybrid(C={rrf_params.c})"

    def ranked(self, input_text: str, k: int) -> RankedList:
        _require_k(k)
        full = [
            self.bm25.ranked(input_text, self.n),
            self.semantic.ranked(input_text, self.n),
        ]
        return rrf_fuse(full, self.rrf_params, k)


class FixedRandomRetriever(Retriever):
    """No-retrieval baseline: a seed-fixed selection, identical for every input."""

    def __init__(self, dataset: Dataset, seed: int):
        self.dataset = dataset
        self.seed = seed
        self.descriptor = f"random(seed={seed})"

    def retrieve(self, input_text: str, k: int) -> list[Example]:
        return fixed_random_select(self.dataset, k, self.seed)

    def ranked(self, input_text: str, k: int) -> RankedList:
        return [(ex.id, 0.0) for ex in self.retrieve(input_text, k)]


class NullRetriever(Retriever):
    """Zero-shot: no examples at all."""

    descriptor = "none"

    def retrieve(self, input_text: str, k: int) -> list[Example]:
        return []

    def ranked(self, input_text: str, k: int) -> RankedList:
        return []


# ---------------------------------------------------------------------------
# Index persistence


def save_bm25_index(index: Bm25Index, path: str | Path) -> None:
    payload = {
        "format": BM25_INDEX_FORMAT,
        "version": INDEX_VERSION,
        "params": {"k1": index.params.k1, "b": index.params.b},
        "normalizer": index.normalizer_name,
        "ids": list(index.ids),
        "doc_tfs": index.doc_tfs,
        "doc_lens": index.doc_lens,
        "df": index.df,
        "avgdl": index.avgdl,
        "n": index.n,
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def _check_header(payload: dict, expected_format: str, path) -> None:
    if payload.get("format") != expected_format:
        raise RetrievalError(f"{path}: not a {expected_format} file")
    if payload.get("version") != INDEX_VERSION:
        raise RetrievalError(
            f"{path}: unsupported index version {payload.get('version')!r}"
        )


def load_bm25_index(path: str | Path) -> Bm25Index:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    _check_header(payload, BM25_INDEX_FORMAT, path)
    return Bm25Index(
        ids=tuple(payload["ids"]),
        doc_tfs=[{str(t): int(c) for t, c in tf.items()} for tf in payload["doc_tfs"]],
        doc_lens=[int(x) for x in payload["doc_lens"]],
        df={str(t): int(c) for t, c in payload["df"].items()},
        avgdl=float(payload["avgdl"]),
        n=int(payload["n"]),
        params=Bm25Params(k1=float(payload["params"]["k1"]), b=float(payload["params"]["b"])),
        normalizer_name=str(payload["normalizer"]),
    )


def save_semantic_index(index: SemanticIndex, path: str | Path) -> None:
    payload = {
        "format": SEMANTIC_INDEX_FORMAT,
        "version": INDEX_VERSION,
        "provider": index.provider_name,
        "instruction": index.instruction,
        "dim": int(index.vectors.shape[1]),
        "ids": list(index.ids),
        "vectors": index.vectors.tolist(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_semantic_index(
    path: str | Path, provider: EmbeddingProvider | None = None
) -> SemanticIndex:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    _check_header(payload, SEMANTIC_INDEX_FORMAT, path)
    vectors = np.asarray(payload["vectors"], dtype=np.float64)
    if vectors.shape != (len(payload["ids"]), payload["dim"]):
        raise RetrievalError(f"{path}: vector block does not match header dimensions")
    return SemanticIndex(
        ids=tuple(payload["ids"]),
        vectors=vectors,
        provider_name=str(payload["provider"]),
        instruction=payload["instruction"],
        provider=provider,
    )
