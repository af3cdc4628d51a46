from __future__ import annotations

import hashlib
import math
import random
from collections import Counter

import numpy as np
import pytest

from conftest import mk_dataset
from fewner.modelclient import HashEmbeddingProvider
from fewner.normalize import tokenize
from fewner.retrieval import (
    MmrParams,
    RetrievalError,
    build_semantic_index,
    cosine_similarity,
    embed_query,
    encode,
    load_semantic_index,
    mmr_rerank,
    rrf_fuse,
    RrfParams,
    save_semantic_index,
    semantic_retrieve,
    semantic_retrieve_embedding,
)

INSTRUCTION = "Represent this sentence for searching relevant passages:"


class RecordingProvider:
    """Wraps the hash provider and records exactly what it is asked to embed."""

    def __init__(self, dim=16):
        self.inner = HashEmbeddingProvider(dim)
        self.name = "recording"
        self.seen: list[str] = []

    def embed(self, texts):
        self.seen.extend(texts)
        return self.inner.embed(texts)


def naive_cosine(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    return dot / (na * nb)


def random_words(rng, n):
    vocab = [f"tok{i}" for i in range(40)]
    return " ".join(rng.choices(vocab, k=n))


def random_text_dataset(rng, size, name="docs"):
    return mk_dataset(
        [(random_words(rng, rng.randint(2, 10)), []) for _ in range(size)],
        ["person"],
        name=name,
    )


class TestCosine:
    def test_self_similarity_is_one(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            v = rng.normal(size=8)
            assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_vectors_score_zero(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_matches_naive_double_loop(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            a = rng.normal(size=12)
            b = rng.normal(size=12)
            assert cosine_similarity(a, b) == pytest.approx(
                naive_cosine(a, b), abs=1e-12
            )

    def test_zero_vector_is_rejected(self):
        with pytest.raises(RetrievalError):
            cosine_similarity(np.zeros(3), np.ones(3))

    def test_dimension_mismatch_is_rejected(self):
        with pytest.raises(RetrievalError):
            cosine_similarity(np.ones(3), np.ones(4))


class TestEncode:
    def test_identical_texts_embed_identically(self):
        provider = HashEmbeddingProvider(32)
        first = encode(provider, ["alpha beta", "alpha beta"])
        assert np.array_equal(first[0], first[1])
        assert np.array_equal(first, encode(provider, ["alpha beta", "alpha beta"]))

    def test_instruction_is_prepended_to_query_texts(self):
        provider = RecordingProvider()
        encode(provider, ["Who is Obama?"], instruction=INSTRUCTION)
        assert provider.seen == [
            "Represent this sentence for searching relevant passages: Who is Obama?"
        ]

    def test_indexed_texts_are_embedded_without_instruction(self):
        provider = RecordingProvider()
        ds = mk_dataset([("some text", [])], ["person"])
        build_semantic_index(ds, provider, instruction=INSTRUCTION)
        assert provider.seen == ["some text"]

    def test_hash_projection_recomputed_independently(self):
        dim = 64
        provider = HashEmbeddingProvider(dim)
        text = "Running runners ran fast (twice)."
        vector = provider.embed([text])[0]
        buckets = [0.0] * dim
        for token, count in Counter(t.lower() for t in tokenize(text)).items():
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            idx = int.from_bytes(digest[:4], "big") % dim
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            buckets[idx] += sign * count
        assert list(vector) == buckets

    def test_hash_projection_of_empty_text_is_nonzero(self):
        vector = HashEmbeddingProvider(8).embed(["..."])[0]
        assert list(vector) == [1.0] + [0.0] * 7


class TestSemanticRetrieve:
    def test_query_equal_to_training_text_ranks_first(self):
        rng = random.Random(2)
        ds = random_text_dataset(rng, 20)
        index = build_semantic_index(ds, HashEmbeddingProvider(64))
        target = ds.examples[13]
        ranked = semantic_retrieve(index, target.text, 3)
        assert ranked[0][0] == target.id
        assert ranked[0][1] == pytest.approx(1.0, abs=1e-12)

    def test_k_beyond_index_size_returns_everything(self):
        rng = random.Random(4)
        ds = random_text_dataset(rng, 5)
        index = build_semantic_index(ds, HashEmbeddingProvider(16))
        assert len(semantic_retrieve(index, "tok1 tok2", 50)) == 5

    def test_order_matches_exhaustive_similarity_sort(self):
        rng = random.Random(9)
        provider = HashEmbeddingProvider(64)
        for _ in range(20):
            ds = random_text_dataset(rng, rng.randint(3, 50))
            index = build_semantic_index(ds, provider)
            query = random_words(rng, rng.randint(1, 8))
            k = rng.randint(1, len(ds.examples))
            got = semantic_retrieve(index, query, k)
            q = provider.embed([query])[0]
            sims = {
                ex.id: naive_cosine(provider.embed([ex.text])[0], q)
                for ex in ds.examples
            }
            expected = sorted(sims.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
            assert [doc_id for doc_id, _ in got] == [doc_id for doc_id, _ in expected]

    def test_empty_dataset_is_rejected(self):
        with pytest.raises(RetrievalError):
            build_semantic_index(mk_dataset([], ["person"]), HashEmbeddingProvider(8))


def mmr_oracle(ids, vectors, query, lam, k):
    """Reference greedy selection with naive arithmetic."""
    sims = {i: naive_cosine(vectors[i], query) for i in ids}
    selected: list[str] = []
    remaining = list(ids)
    while remaining and len(selected) < k:
        def objective(i):
            if not selected:
                return sims[i]
            redundancy = max(naive_cosine(vectors[i], vectors[s]) for s in selected)
            return (1 - lam) * sims[i] - lam * redundancy

        best = min(remaining, key=lambda i: (-objective(i), i))
        selected.append(best)
        remaining.remove(best)
    return selected


class TestMmr:
    def test_lambda_zero_equals_semantic_retrieve(self):
        rng = random.Random(21)
        provider = HashEmbeddingProvider(64)
        for _ in range(25):
            ds = random_text_dataset(rng, rng.randint(3, 30))
            index = build_semantic_index(ds, provider)
            query = random_words(rng, rng.randint(1, 6))
            k = rng.randint(1, len(ds.examples))
            q = embed_query(index, query)
            assert mmr_rerank(index, q, MmrParams(0.0), k) == semantic_retrieve_embedding(
                index, q, k
            )

    def test_first_pick_matches_top_one_for_any_lambda(self):
        rng = random.Random(6)
        ds = random_text_dataset(rng, 15)
        index = build_semantic_index(ds, HashEmbeddingProvider(32))
        q = embed_query(index, "tok3 tok7 tok9")
        top1 = semantic_retrieve_embedding(index, q, 1)[0][0]
        for lam in (0.0, 0.3, 0.7, 1.0):
            assert mmr_rerank(index, q, MmrParams(lam), 1)[0][0] == top1

    def test_duplicate_near_query_then_distinct_pick(self):
        # d0 and d1 identical and closest to the query; d2 relevant but
        # orthogonal to them. With lambda=0.5 the second pick must be d2.
        ds = mk_dataset([("a", []), ("b", []), ("c", [])], ["person"], name="v")

        class FixedProvider:
            name = "fixed"
            table = {
                "a": [0.9, math.sqrt(1 - 0.81), 0.0],
                "b": [0.9, math.sqrt(1 - 0.81), 0.0],
                "c": [math.sqrt(1 - 0.81), -0.9, 0.0],
            }

            def embed(self, texts):
                return np.array([self.table[t] for t in texts])

        index = build_semantic_index(ds, FixedProvider())
        query = np.array([1.0, 0.0, 0.0])
        picked = [doc_id for doc_id, _ in mmr_rerank(index, query, MmrParams(0.5), 2)]
        assert picked == ["v:0000", "v:0002"]
        oracle = mmr_oracle(
            list(index.ids),
            {i: v for i, v in zip(index.ids, index.vectors)},
            query,
            0.5,
            2,
        )
        assert picked == oracle

    def test_greedy_selection_matches_reference_on_random_instances(self):
        rng = random.Random(12)
        provider = HashEmbeddingProvider(32)
        for _ in range(15):
            ds = random_text_dataset(rng, rng.randint(4, 20))
            index = build_semantic_index(ds, provider)
            query = provider.embed([random_words(rng, 4)])[0]
            for k in (2, 5):
                got = [d for d, _ in mmr_rerank(index, query, MmrParams(0.5), k)]
                expected = mmr_oracle(
                    list(index.ids),
                    {i: v for i, v in zip(index.ids, index.vectors)},
                    query,
                    0.5,
                    k,
                )
                assert got == expected

    def test_lambda_bounds_are_validated(self):
        with pytest.raises(RetrievalError):
            MmrParams(-0.1)
        with pytest.raises(RetrievalError):
            MmrParams(1.1)


class TestRrf:
    def test_identical_lists_preserve_order(self):
        ranked = [("a", 5.0), ("b", 4.0), ("c", 3.0)]
        fused = rrf_fuse([ranked, ranked], RrfParams(60.0), 3)
        assert [doc_id for doc_id, _ in fused] == ["a", "b", "c"]

    def test_worked_tie_example(self):
        first = [("d1", 3.0), ("d2", 2.0), ("d3", 1.0)]
        second = [("d3", 3.0), ("d2", 2.0), ("d1", 1.0)]
        fused = rrf_fuse([first, second], RrfParams(60.0), 3)
        scores = dict(fused)
        assert scores["d1"] == pytest.approx(1 / 61 + 1 / 63, abs=1e-15)
        assert scores["d3"] == pytest.approx(1 / 61 + 1 / 63, abs=1e-15)
        assert scores["d2"] == pytest.approx(2 / 62, abs=1e-15)
        assert scores["d1"] > scores["d2"]
        # tie between d1 and d3 resolves by ascending id
        assert [doc_id for doc_id, _ in fused] == ["d1", "d3", "d2"]

    def test_huge_c_approaches_rank_sum_ordering(self):
        # in the large-C limit any strictly smaller rank sum must win;
        # equal rank sums differ by O(1/C^3), below float resolution
        rng = random.Random(8)
        ids = [f"d{i}" for i in range(12)]
        for _ in range(10):
            first = rng.sample(ids, len(ids))
            second = rng.sample(ids, len(ids))
            fused = rrf_fuse(
                [[(d, 0.0) for d in first], [(d, 0.0) for d in second]],
                RrfParams(1e9),
                len(ids),
            )
            rank_sum = {d: first.index(d) + second.index(d) + 2 for d in ids}
            position = {d: i for i, (d, _) in enumerate(fused)}
            for a in ids:
                for b in ids:
                    if rank_sum[a] < rank_sum[b]:
                        assert position[a] < position[b]

    def test_matches_direct_summation_on_random_partial_rankings(self):
        rng = random.Random(14)
        ids = [f"d{i}" for i in range(20)]
        for _ in range(30):
            first = rng.sample(ids, rng.randint(1, len(ids)))
            second = rng.sample(ids, rng.randint(1, len(ids)))
            fused = rrf_fuse(
                [[(d, 0.0) for d in first], [(d, 0.0) for d in second]],
                RrfParams(60.0),
                len(ids),
            )
            expected = {}
            for ranking in (first, second):
                for rank, doc in enumerate(ranking, start=1):
                    expected[doc] = expected.get(doc, 0.0) + 1.0 / (60.0 + rank)
            assert dict(fused) == expected
            ordered = sorted(expected.items(), key=lambda kv: (-kv[1], kv[0]))
            assert fused == ordered

    def test_empty_input_is_rejected(self):
        with pytest.raises(RetrievalError):
            rrf_fuse([], RrfParams(60.0), 3)
        with pytest.raises(RetrievalError):
            RrfParams(0.0)


class TestPersistence:
    def test_semantic_round_trip_preserves_results(self, tmp_path):
        rng = random.Random(19)
        ds = random_text_dataset(rng, 12)
        provider = HashEmbeddingProvider(32)
        index = build_semantic_index(ds, provider, instruction=None)
        path = tmp_path / "semantic.json"
        save_semantic_index(index, path)
        loaded = load_semantic_index(path, provider=provider)
        assert loaded.ids == index.ids
        assert np.array_equal(loaded.vectors, index.vectors)
        query = "tok5 tok6"
        assert semantic_retrieve(loaded, query, 4) == semantic_retrieve(index, query, 4)

    def test_loaded_index_without_provider_cannot_embed_queries(self, tmp_path):
        ds = mk_dataset([("alpha", [])], ["person"])
        index = build_semantic_index(ds, HashEmbeddingProvider(8))
        path = tmp_path / "semantic.json"
        save_semantic_index(index, path)
        loaded = load_semantic_index(path)
        with pytest.raises(RetrievalError, match="provider"):
            semantic_retrieve(loaded, "alpha", 1)
