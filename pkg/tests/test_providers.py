import json
import threading

import httpx
import numpy as np
import pytest

from semtext.errors import CacheCorrupt, DimensionDrift, EmptyInput, ProviderUnavailable
from semtext.fnv import fnv1a_64
from semtext.providers import (
    ProviderConfig,
    cache_key,
    cached_embed,
    embed_batch,
    hash_embed,
)
from semtext.vectors import cosine_similarity


def test_fnv1a_reference_value():
    # published FNV-1a 64 test vector
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C


def test_hash_embed_deterministic():
    a = hash_embed("hello world")
    b = hash_embed("hello world")
    assert np.array_equal(a.values, b.values)
    assert cosine_similarity(a, b) == 1.0


def test_hash_embed_shape_and_norm():
    e = hash_embed("hello", dim=256)
    assert e.dim == 256
    assert e.model_id == "hash-v1-256"
    assert float(np.linalg.norm(e.values)) == pytest.approx(1.0, abs=1e-9)


def test_hash_embed_single_token_uses_fnv_index_and_sign():
    h = fnv1a_64(b"a")
    e = hash_embed("a", dim=256)
    idx = h % 256
    expected_sign = 1.0 if (h >> 63) == 0 else -1.0
    assert e.values[idx] == pytest.approx(expected_sign)
    assert np.count_nonzero(e.values) == 1


def test_hash_embed_word_order_matters_but_shares_unigrams():
    a = hash_embed("housing assistance")
    b = hash_embed("assistance housing")
    assert not np.array_equal(a.values, b.values)
    score = cosine_similarity(a, b)
    assert 0.0 < score < 1.0


def test_hash_embed_empty():
    with pytest.raises(EmptyInput):
        hash_embed("  ... !! ")


def test_embed_batch_hash_provider_order_and_identity():
    cfg = ProviderConfig(kind="hash", dim=64)
    out = embed_batch(cfg, ["one", "two", "three"])
    assert len(out) == 3
    for text, emb in zip(["one", "two", "three"], out):
        assert np.array_equal(emb.values, hash_embed(text, 64).values)
        assert emb.model_id == cfg.model_id
        assert emb.dim == 64


def test_embed_batch_blank_text_names_index():
    cfg = ProviderConfig(kind="hash", dim=32)
    with pytest.raises(EmptyInput) as err:
        embed_batch(cfg, ["a", ""])
    assert err.value.index == 1


def _stub_transport(vectors, calls, *, disorder=False, fail_times=0, status=200):
    """Transport returning fixed vectors per input order, optionally index-shuffled."""

    def handler(request: httpx.Request) -> httpx.Response:
        calls.append(json.loads(request.content))
        if len(calls) <= fail_times:
            return httpx.Response(500, json={"error": "boom"})
        body = json.loads(request.content)
        data = [
            {"index": i, "embedding": vectors[text]} for i, text in enumerate(body["input"])
        ]
        if disorder:
            data = list(reversed(data))
        return httpx.Response(status, json={"data": data})

    return httpx.MockTransport(handler)


HTTP_CFG = dict(
    kind="http",
    model_id="stub-model",
    dim=3,
    endpoint_url="https://embed.test/v1/embeddings",
)


def test_http_provider_returns_stub_vectors_in_order():
    vectors = {"alpha": [1.0, 0.0, 0.0], "beta": [0.0, 1.0, 0.0]}
    calls = []
    cfg = ProviderConfig(**HTTP_CFG)
    out = embed_batch(cfg, ["alpha", "beta"], transport=_stub_transport(vectors, calls, disorder=True))
    assert np.allclose(out[0].values, vectors["alpha"])
    assert np.allclose(out[1].values, vectors["beta"])
    assert out[0].model_id == "stub-model"
    assert len(calls) == 1


def test_http_provider_sends_bearer_credential_from_env(monkeypatch):
    monkeypatch.setenv("STUB_KEY", "sk-test")
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen["auth"] = request.headers.get("Authorization")
        body = json.loads(request.content)
        data = [{"index": i, "embedding": [1.0, 0.0, 0.0]} for i in range(len(body["input"]))]
        return httpx.Response(200, json={"data": data})

    cfg = ProviderConfig(**HTTP_CFG, api_key_env="STUB_KEY")
    embed_batch(cfg, ["x"], transport=httpx.MockTransport(handler))
    assert seen["auth"] == "Bearer sk-test"


def test_http_provider_missing_credential_env():
    cfg = ProviderConfig(**HTTP_CFG, api_key_env="DEFINITELY_NOT_SET_123")
    with pytest.raises(ProviderUnavailable):
        embed_batch(cfg, ["x"], transport=httpx.MockTransport(lambda r: httpx.Response(200)))


@pytest.mark.parametrize("failures", [1, 2])
def test_retries_then_success(failures):
    vectors = {"x": [1.0, 0.0, 0.0]}
    calls = []
    cfg = ProviderConfig(**HTTP_CFG, retries=2)
    out = embed_batch(cfg, ["x"], transport=_stub_transport(vectors, calls, fail_times=failures))
    assert len(calls) == failures + 1
    assert np.allclose(out[0].values, [1.0, 0.0, 0.0])


def test_retries_exhausted():
    vectors = {"x": [1.0, 0.0, 0.0]}
    calls = []
    cfg = ProviderConfig(**HTTP_CFG, retries=2)
    with pytest.raises(ProviderUnavailable):
        embed_batch(cfg, ["x"], transport=_stub_transport(vectors, calls, fail_times=3))
    assert len(calls) == 3


def test_dimension_drift_detected():
    vectors = {"x": [1.0, 0.0]}  # dim 2, config says 3
    calls = []
    cfg = ProviderConfig(**HTTP_CFG)
    with pytest.raises(DimensionDrift):
        embed_batch(cfg, ["x"], transport=_stub_transport(vectors, calls))


def test_malformed_body_is_provider_unavailable():
    cfg = ProviderConfig(**HTTP_CFG, retries=0)
    transport = httpx.MockTransport(lambda r: httpx.Response(200, json={"nope": []}))
    with pytest.raises(ProviderUnavailable):
        embed_batch(cfg, ["x"], transport=transport)


def test_large_request_is_split_into_batches():
    texts = [f"text {i}" for i in range(7)]
    vectors = {t: [float(i), 1.0, 0.0] for i, t in enumerate(texts)}
    calls = []
    cfg = ProviderConfig(**HTTP_CFG, batch_size=3, max_parallel=2)
    out = embed_batch(cfg, texts, transport=_stub_transport(vectors, calls))
    assert len(calls) == 3  # 3 + 3 + 1
    assert sorted(len(c["input"]) for c in calls) == [1, 3, 3]
    for text, emb in zip(texts, out):
        assert np.allclose(emb.values, vectors[text])


def test_concurrent_hash_embedding_is_consistent():
    cfg = ProviderConfig(kind="hash", dim=64)
    results = {}

    def work(name):
        results[name] = embed_batch(cfg, [name])[0].values

    threads = [threading.Thread(target=work, args=(f"t{i}",)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for name, values in results.items():
        assert np.array_equal(values, hash_embed(name, 64).values)


# -- cache ---------------------------------------------------------------------


def test_cached_embed_second_call_skips_provider(tmp_path, monkeypatch):
    cfg = ProviderConfig(kind="hash", dim=32)
    counter = {"calls": 0}
    real = embed_batch

    def counting(cfg_, texts, **kwargs):
        counter["calls"] += 1
        return real(cfg_, texts, **kwargs)

    monkeypatch.setattr("semtext.providers.embed_batch", counting)
    first = cached_embed(cfg, ["a", "b"], tmp_path)
    assert counter["calls"] == 1
    second = cached_embed(cfg, ["a", "b"], tmp_path)
    assert counter["calls"] == 1
    for x, y in zip(first, second):
        assert np.array_equal(x.values, y.values)


def test_cache_cleared_reembeds_identically(tmp_path):
    cfg = ProviderConfig(kind="hash", dim=32)
    first = cached_embed(cfg, ["stable text"], tmp_path)
    for record in tmp_path.iterdir():
        record.unlink()
    second = cached_embed(cfg, ["stable text"], tmp_path)
    assert np.array_equal(first[0].values, second[0].values)


def test_mixed_hit_miss_single_batched_call(tmp_path, monkeypatch):
    cfg = ProviderConfig(kind="hash", dim=32)
    cached_embed(cfg, ["warm"], tmp_path)

    batches = []
    real = embed_batch

    def recording(cfg_, texts, **kwargs):
        batches.append(list(texts))
        return real(cfg_, texts, **kwargs)

    monkeypatch.setattr("semtext.providers.embed_batch", recording)
    out = cached_embed(cfg, ["cold one", "warm", "cold two"], tmp_path)
    assert batches == [["cold one", "cold two"]]  # exactly one call, misses only
    assert len(out) == 3
    assert np.array_equal(out[1].values, cached_embed(cfg, ["warm"], tmp_path)[0].values)


def test_corrupt_cache_record_is_miss_and_overwritten(tmp_path):
    cfg = ProviderConfig(kind="hash", dim=32)
    cached_embed(cfg, ["poisoned"], tmp_path)
    record = tmp_path / cache_key(cfg.model_id, "poisoned")
    blob = bytearray(record.read_bytes())
    blob[10] ^= 0xFF  # flip a payload byte; checksum now fails
    record.write_bytes(bytes(blob))
    out = cached_embed(cfg, ["poisoned"], tmp_path)
    assert float(np.linalg.norm(out[0].values)) == pytest.approx(1.0, abs=1e-6)
    # record was rewritten and is valid again
    again = cached_embed(cfg, ["poisoned"], tmp_path)
    assert np.array_equal(out[0].values, again[0].values)


def test_cache_record_format_checks(tmp_path):
    from semtext.providers import _decode_cache_record

    with pytest.raises(CacheCorrupt):
        _decode_cache_record(b"XXXX" + b"\x00" * 20)
    with pytest.raises(CacheCorrupt):
        _decode_cache_record(b"SEMC")
