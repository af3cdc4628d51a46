from __future__ import annotations

import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from conftest import mk_example
from fewner.corpus import LabelSet
from fewner.modelclient import (
    CachingCompletionClient,
    CompletionRequest,
    DecodingParams,
    EmbeddingError,
    FixedCompletionClient,
    GoldEchoCompletionClient,
    HashEmbeddingProvider,
    HttpCompletionClient,
    HttpEmbeddingProvider,
    ModelClientError,
    ModelHandle,
    PrecomputedEmbeddingProvider,
    ReplayMissError,
    ResponseCache,
    ScriptedCompletionClient,
    ThrottledCompletionClient,
    TransportError,
    cache_key,
    text_digest,
    write_embeddings_file,
)
from fewner.recognition import render_prompt

LABELS = LabelSet(("person", "location"))


def req(prompt="hello world", model="m1", **decoding):
    return CompletionRequest(model, prompt, DecodingParams(**decoding))


class TestRequests:
    def test_empty_prompt_is_rejected(self):
        with pytest.raises(ModelClientError):
            CompletionRequest("m", "")

    def test_model_handle_passes_model_and_decoding_through(self):
        seen = {}

        class Probe:
            def complete(self, request):
                seen["request"] = request
                return "ok"

        handle = ModelHandle(Probe(), "my-model", DecodingParams(0.5, 64))
        assert handle.generate("prompt text") == "ok"
        assert seen["request"].model == "my-model"
        assert seen["request"].decoding == DecodingParams(0.5, 64)


class TestCacheKeys:
    def test_key_is_stable_for_identical_inputs(self):
        a = cache_key("p", "m", "v1", "prompt", DecodingParams())
        b = cache_key("p", "m", "v1", "prompt", DecodingParams())
        assert a == b

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"provider": "other"},
            {"model": "other"},
            {"template_version": "v2"},
            {"prompt": "other prompt"},
            {"decoding": DecodingParams(temperature=0.7)},
            {"decoding": DecodingParams(max_output_tokens=16)},
        ],
    )
    def test_key_changes_with_every_component(self, kwargs):
        base = dict(
            provider="p", model="m", template_version="v1", prompt="prompt",
            decoding=DecodingParams(),
        )
        changed = {**base, **kwargs}
        assert cache_key(**base) != cache_key(**changed)

    def test_distinct_rendered_prompts_get_distinct_keys(self, politics_dev):
        keys = set()
        for example in politics_dev.examples:
            prompt = render_prompt(politics_dev.label_set, [], example.text)
            keys.add(cache_key("p", "m", "v1", prompt, DecodingParams()))
        assert len(keys) == len(politics_dev.examples)


class TestResponseCache:
    def test_entries_persist_and_reload(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        cache = ResponseCache(path)
        cache.put({"v": 1, "key": "k1", "response": "r1"})
        cache.put({"v": 1, "key": "k2", "response": "r2"})
        again = ResponseCache(path)
        assert again.get("k1")["response"] == "r1"
        assert len(again) == 2

    def test_entries_are_immutable_once_written(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        cache = ResponseCache(path)
        cache.put({"v": 1, "key": "k1", "response": "first"})
        cache.put({"v": 1, "key": "k1", "response": "second"})
        assert cache.get("k1")["response"] == "first"
        assert len(path.read_text().splitlines()) == 1

    def test_torn_final_line_is_tolerated(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        path.write_text('{"v": 1, "key": "k1", "response": "r1"}\n{"v": 1, "key"')
        cache = ResponseCache(path)
        assert len(cache) == 1

    def test_corruption_before_the_end_is_an_error(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        path.write_text('garbage\n{"v": 1, "key": "k1", "response": "r1"}\n')
        with pytest.raises(ModelClientError, match="corrupt"):
            ResponseCache(path)

    def test_unknown_entry_version_is_an_error(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        path.write_text('{"v": 99, "key": "k1", "response": "r1"}\n')
        with pytest.raises(ModelClientError, match="version"):
            ResponseCache(path)


class TestCachingClient:
    def test_warm_cache_answers_without_inner_calls(self, tmp_path):
        inner = FixedCompletionClient("the answer")
        client = CachingCompletionClient(inner, tmp_path / "c.jsonl", "prov", "v1")
        first = client.complete(req())
        assert inner.calls == 1
        second = client.complete(req())
        assert second == first == "the answer"
        assert inner.calls == 1
        assert client.hits == 1 and client.misses == 1

    def test_cache_survives_process_restart(self, tmp_path):
        path = tmp_path / "c.jsonl"
        CachingCompletionClient(
            FixedCompletionClient("text"), path, "prov", "v1"
        ).complete(req())
        replay = CachingCompletionClient(None, path, "prov", "v1")
        assert replay.complete(req()) == "text"
        assert replay.inner_calls == 0

    def test_replay_only_miss_raises_with_digest(self, tmp_path):
        client = CachingCompletionClient(None, tmp_path / "c.jsonl", "prov", "v1")
        with pytest.raises(ReplayMissError, match=text_digest("hello world")[:16]):
            client.complete(req())

    def test_different_template_version_misses(self, tmp_path):
        path = tmp_path / "c.jsonl"
        CachingCompletionClient(
            FixedCompletionClient("text"), path, "prov", "v1"
        ).complete(req())
        v2 = CachingCompletionClient(None, path, "prov", "v2")
        with pytest.raises(ReplayMissError):
            v2.complete(req())


class TestStubs:
    def test_scripted_returns_exactly_the_configured_string(self):
        stub = ScriptedCompletionClient({text_digest("p1"): "1. Rome (location)"})
        assert stub.complete(req(prompt="p1")) == "1. Rome (location)"

    def test_scripted_unknown_prompt_is_an_error(self):
        stub = ScriptedCompletionClient({})
        with pytest.raises(ModelClientError, match="no response"):
            stub.complete(req(prompt="p1"))

    def test_gold_echo_reads_the_input_back_from_the_prompt(self):
        example = mk_example("t:0000", "Anna visited Rome", [("Rome", "location")])
        stub = GoldEchoCompletionClient({example.text: example.entities})
        shots = [mk_example("t:0001", "John lives in Paris", [("John", "person")])]
        prompt = render_prompt(LABELS, shots, example.text)
        assert stub.complete(req(prompt=prompt)) == "1. Rome (location)"

    def test_gold_echo_answers_empty_for_unknown_inputs(self):
        stub = GoldEchoCompletionClient({})
        prompt = render_prompt(LABELS, [], "brand new text")
        assert stub.complete(req(prompt=prompt)) == ""


class TestThrottle:
    def test_in_flight_requests_never_exceed_the_bound(self):
        lock = threading.Lock()
        state = {"current": 0, "peak": 0}

        class SlowStub:
            def complete(self, request):
                with lock:
                    state["current"] += 1
                    state["peak"] = max(state["peak"], state["current"])
                time.sleep(0.01)
                with lock:
                    state["current"] -= 1
                return "ok"

        client = ThrottledCompletionClient(SlowStub(), max_in_flight=3)
        with ThreadPoolExecutor(max_workers=12) as executor:
            list(executor.map(lambda i: client.complete(req(prompt=f"p{i}")), range(36)))
        assert state["peak"] <= 3

    def test_bound_must_be_positive(self):
        with pytest.raises(ModelClientError):
            ThrottledCompletionClient(FixedCompletionClient(""), 0)


class FlakyTransport:
    """Fails with the given statuses/exceptions before succeeding."""

    def __init__(self, failures, body):
        self.failures = list(failures)
        self.body = body
        self.calls = 0

    def __call__(self, url, headers, payload, timeout):
        self.calls += 1
        self.last = (url, headers, payload)
        if self.failures:
            failure = self.failures.pop(0)
            if isinstance(failure, Exception):
                raise failure
            return failure, {"error": "try again"}
        return 200, self.body


CHAT_BODY = {
    "choices": [{"message": {"content": "1. Rome (location)"}}],
    "usage": {"prompt_tokens": 10, "completion_tokens": 5},
}


class TestHttpCompletion:
    def test_chat_shape_success_and_usage(self):
        transport = FlakyTransport([], CHAT_BODY)
        client = HttpCompletionClient(
            "https://api.test/v1/chat", transport=transport, sleep=lambda s: None
        )
        text, usage = client.complete_with_usage(req())
        assert text == "1. Rome (location)"
        assert usage == CHAT_BODY["usage"]
        assert transport.last[2]["messages"][0]["content"] == "hello world"

    def test_text_shape_payload(self):
        transport = FlakyTransport([], {"choices": [{"text": "out"}]})
        client = HttpCompletionClient(
            "https://api.test/v1/completions", api_shape="text",
            transport=transport, sleep=lambda s: None,
        )
        assert client.complete(req()) == "out"
        assert transport.last[2]["prompt"] == "hello world"

    def test_retries_transient_failures_with_backoff(self):
        delays = []
        transport = FlakyTransport([500, ConnectionError("reset")], CHAT_BODY)
        client = HttpCompletionClient(
            "https://api.test", transport=transport,
            max_retries=3, backoff_base=0.1, sleep=delays.append,
        )
        assert client.complete(req()) == "1. Rome (location)"
        assert transport.calls == 3
        assert delays == [0.1, 0.2]

    def test_gives_up_after_the_retry_cap(self):
        transport = FlakyTransport([500, 500, 500, 500], CHAT_BODY)
        client = HttpCompletionClient(
            "https://api.test", transport=transport,
            max_retries=2, sleep=lambda s: None,
        )
        with pytest.raises(TransportError, match="3 attempts"):
            client.complete(req())

    def test_client_errors_are_not_retried(self):
        transport = FlakyTransport([400], CHAT_BODY)
        client = HttpCompletionClient(
            "https://api.test", transport=transport, sleep=lambda s: None
        )
        with pytest.raises(ModelClientError, match="HTTP 400"):
            client.complete(req())
        assert transport.calls == 1

    def test_malformed_payload_error_carries_an_excerpt(self):
        transport = FlakyTransport([], {"unexpected": ["shape"]})
        client = HttpCompletionClient(
            "https://api.test", transport=transport, sleep=lambda s: None
        )
        with pytest.raises(ModelClientError, match="unexpected"):
            client.complete(req())

    def test_credential_comes_from_the_environment(self, monkeypatch):
        transport = FlakyTransport([], CHAT_BODY)
        client = HttpCompletionClient(
            "https://api.test", transport=transport,
            auth_env="FEWNER_TEST_KEY", sleep=lambda s: None,
        )
        monkeypatch.delenv("FEWNER_TEST_KEY", raising=False)
        with pytest.raises(ModelClientError, match="FEWNER_TEST_KEY"):
            client.complete(req())
        monkeypatch.setenv("FEWNER_TEST_KEY", "sekrit")
        client.complete(req())
        assert transport.last[1]["Authorization"] == "Bearer sekrit"

    def test_unknown_api_shape_is_rejected(self):
        with pytest.raises(ModelClientError):
            HttpCompletionClient("https://api.test", api_shape="grpc")


class TestHttpEmbeddings:
    def test_batches_preserve_input_order(self):
        class BatchTransport:
            def __init__(self):
                self.batches = []

            def __call__(self, url, headers, payload, timeout):
                batch = payload["input"]
                self.batches.append(batch)
                # respond out of order; the index field restores order
                data = [
                    {"index": i, "embedding": [float(len(text))]}
                    for i, text in enumerate(batch)
                ]
                return 200, {"data": list(reversed(data))}

        transport = BatchTransport()
        provider = HttpEmbeddingProvider(
            "https://api.test/embeddings", model="e1",
            batch_size=2, transport=transport, sleep=lambda s: None,
        )
        texts = ["a", "bb", "ccc", "dddd", "eeeee"]
        vectors = provider.embed(texts)
        assert vectors.shape == (5, 1)
        assert [v[0] for v in vectors] == [1.0, 2.0, 3.0, 4.0, 5.0]
        assert len(transport.batches) == 3

    def test_malformed_embedding_payload_is_an_error(self):
        transport = FlakyTransport([], {"nope": True})
        provider = HttpEmbeddingProvider(
            "https://api.test/embeddings", model="e1",
            transport=transport, sleep=lambda s: None,
        )
        with pytest.raises(EmbeddingError, match="malformed"):
            provider.embed(["a"])


class TestPrecomputedEmbeddings:
    def test_lookup_returns_the_stored_vector_exactly(self, tmp_path):
        source = HashEmbeddingProvider(16)
        items = [("id:0", "alpha beta"), ("id:1", "gamma")]
        path = tmp_path / "embeddings.jsonl"
        write_embeddings_file(path, source, items)
        provider = PrecomputedEmbeddingProvider(path)
        assert provider.dim == 16
        stored = provider.embed(["gamma", "alpha beta"])
        direct = source.embed(["gamma", "alpha beta"])
        assert np.array_equal(stored, direct)

    def test_missing_text_error_names_the_digest(self, tmp_path):
        path = tmp_path / "embeddings.jsonl"
        write_embeddings_file(path, HashEmbeddingProvider(8), [("id:0", "known")])
        provider = PrecomputedEmbeddingProvider(path)
        with pytest.raises(EmbeddingError, match=text_digest("unknown text")):
            provider.embed(["unknown text"])

    def test_header_is_validated(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps({"format": "other"}) + "\n")
        with pytest.raises(EmbeddingError, match="not an embeddings file"):
            PrecomputedEmbeddingProvider(path)


class TestHashProviderContract:
    def test_vectors_are_reproducible_across_instances(self):
        texts = ["alpha beta gamma", "delta", ""]
        first = HashEmbeddingProvider(32).embed(texts)
        second = HashEmbeddingProvider(32).embed(texts)
        assert np.array_equal(first, second)

    def test_dim_is_validated(self):
        with pytest.raises(EmbeddingError):
            HashEmbeddingProvider(0)
