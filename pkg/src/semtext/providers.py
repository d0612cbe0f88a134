"""Embedding providers: a deterministic offline hash embedder, a generic
remote HTTP client, and a binary file cache in front of both.

The hash embedder exists so every pipeline stage can run and be tested
with no model, no network, and no credentials; the HTTP client speaks
the de-facto embeddings wire shape so any hosted model behind it works.
Credentials are only ever read from an environment variable named in the
config, never from config values themselves.
"""

from __future__ import annotations

import os
import re
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import httpx
import numpy as np

from .errors import (
    CacheCorrupt,
    DimensionDrift,
    EmptyInput,
    ProviderUnavailable,
)
from .fnv import fnv1a_64, fnv1a_64_hex
from .vectors import Embedding

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)  # letter/digit runs, no underscore

CACHE_MAGIC = b"SEMC"
CACHE_VERSION = 1


@dataclass
class ProviderConfig:
    kind: str = "hash"  # "hash" | "http"
    model_id: str = ""
    dim: int = 256
    endpoint_url: str = ""
    api_key_env: str = ""
    batch_size: int = 32
    max_parallel: int = 4
    timeout_ms: int = 30_000
    retries: int = 2

    def __post_init__(self) -> None:
        if self.kind not in ("hash", "http"):
            raise ValueError(f"unknown provider kind: {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.batch_size < 1 or self.max_parallel < 1 or self.timeout_ms < 1:
            raise ValueError("batch_size, max_parallel and timeout_ms must be positive")
        if self.retries < 0:
            raise ValueError("retries must be nonnegative")
        if self.kind == "http" and not self.endpoint_url:
            raise ValueError("http provider requires endpoint_url")
        if not self.model_id:
            if self.kind == "hash":
                self.model_id = f"hash-v1-{self.dim}"
            else:
                raise ValueError("http provider requires model_id")


def hash_embed(text: str, dim: int = 256) -> Embedding:
    """Deterministic feature-hashing embedder.

    Lowercase the text, take alphanumeric runs as tokens, add adjacent
    token bigrams (joined by one space), FNV-1a-64 each feature, and
    scatter +/-1 by hash index and top bit. The result is L2-normalized
    and bit-stable across platforms and runs.
    """
    tokens = _TOKEN_RE.findall(text.lower())
    if not tokens:
        raise EmptyInput("no tokens to embed")
    features = list(tokens)
    features.extend(f"{a} {b}" for a, b in zip(tokens, tokens[1:]))
    vec = np.zeros(dim, dtype=np.float64)
    for feat in features:
        h = fnv1a_64(feat.encode("utf-8"))
        sign = 1.0 if (h >> 63) == 0 else -1.0
        vec[h % dim] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:  # perfectly cancelling collisions; practically unreachable
        raise EmptyInput("feature hashing cancelled out")
    return Embedding.create(vec / norm, model_id=f"hash-v1-{dim}")


def _validate_texts(texts: Sequence[str]) -> None:
    if not texts:
        raise EmptyInput("no texts given")
    for i, text in enumerate(texts):
        if not text.strip():
            raise EmptyInput(f"text at index {i} is blank", index=i)


def _http_embed_one_batch(
    cfg: ProviderConfig, texts: list[str], client: httpx.Client
) -> list[Embedding]:
    headers = {}
    if cfg.api_key_env:
        key = os.environ.get(cfg.api_key_env)
        if key is None:
            raise ProviderUnavailable(
                f"credential environment variable {cfg.api_key_env!r} is not set"
            )
        headers["Authorization"] = f"Bearer {key}"
    body = {"model": cfg.model_id, "input": list(texts)}
    last_error: Exception | None = None
    for _attempt in range(cfg.retries + 1):
        try:
            response = client.post(cfg.endpoint_url, json=body, headers=headers)
            if response.status_code < 200 or response.status_code >= 300:
                raise ProviderUnavailable(f"provider returned HTTP {response.status_code}")
            payload = response.json()
            rows = payload["data"]
            if len(rows) != len(texts):
                raise ProviderUnavailable(
                    f"provider returned {len(rows)} vectors for {len(texts)} texts"
                )
            # responses may arrive index-disordered; re-sort by "index"
            rows = sorted(rows, key=lambda row: row["index"])
            out = []
            for row in rows:
                values = np.asarray(row["embedding"], dtype=np.float64)
                if values.size != cfg.dim:
                    raise DimensionDrift(
                        f"provider returned dim {values.size}, expected {cfg.dim}"
                    )
                out.append(Embedding.create(values, model_id=cfg.model_id))
            return out
        except DimensionDrift:
            raise
        except (httpx.HTTPError, ProviderUnavailable, KeyError, TypeError, ValueError) as exc:
            last_error = exc
    raise ProviderUnavailable(f"provider failed after {cfg.retries + 1} attempts: {last_error}")


def embed_batch(
    cfg: ProviderConfig,
    texts: Sequence[str],
    *,
    transport: httpx.BaseTransport | None = None,
) -> list[Embedding]:
    """Embed texts in order. Output i always corresponds to texts[i].

    Oversized requests are split client-side into ``batch_size`` slices,
    with up to ``max_parallel`` slices in flight; assembly restores input
    order. ``transport`` is a test seam for the HTTP path.
    """
    _validate_texts(texts)
    if cfg.kind == "hash":
        out = []
        for text in texts:
            emb = hash_embed(text, cfg.dim)
            out.append(Embedding(values=emb.values, dim=emb.dim, model_id=cfg.model_id, norm=emb.norm))
        return out

    slices = [list(texts[i : i + cfg.batch_size]) for i in range(0, len(texts), cfg.batch_size)]
    timeout = cfg.timeout_ms / 1000.0
    with httpx.Client(transport=transport, timeout=timeout) as client:
        if len(slices) == 1 or cfg.max_parallel == 1:
            results = [_http_embed_one_batch(cfg, s, client) for s in slices]
        else:
            with ThreadPoolExecutor(max_workers=cfg.max_parallel) as pool:
                futures = [pool.submit(_http_embed_one_batch, cfg, s, client) for s in slices]
                results = [f.result() for f in futures]
    return [emb for batch in results for emb in batch]


def cache_key(model_id: str, text: str) -> str:
    """Cache file name: hex FNV-1a-64 of model id, 0x1F, and the text."""
    return fnv1a_64_hex(model_id.encode("utf-8") + b"\x1f" + text.encode("utf-8"))


def _encode_cache_record(values: np.ndarray) -> bytes:
    payload = values.astype("<f4").tobytes()
    header = struct.pack("<4sBI", CACHE_MAGIC, CACHE_VERSION, values.size)
    checksum = struct.pack("<Q", fnv1a_64(payload))
    return header + payload + checksum


def _decode_cache_record(blob: bytes) -> np.ndarray:
    header_size = struct.calcsize("<4sBI")
    if len(blob) < header_size + 8:
        raise CacheCorrupt("cache record truncated")
    magic, version, dim = struct.unpack_from("<4sBI", blob)
    if magic != CACHE_MAGIC:
        raise CacheCorrupt("bad cache magic")
    if version != CACHE_VERSION:
        raise CacheCorrupt(f"unsupported cache version {version}")
    payload = blob[header_size : header_size + 4 * dim]
    if len(payload) != 4 * dim or len(blob) != header_size + 4 * dim + 8:
        raise CacheCorrupt("cache record truncated")
    (checksum,) = struct.unpack_from("<Q", blob, header_size + 4 * dim)
    if checksum != fnv1a_64(payload):
        raise CacheCorrupt("cache checksum mismatch")
    return np.frombuffer(payload, dtype="<f4").astype(np.float64)


def cached_embed(
    cfg: ProviderConfig,
    texts: Sequence[str],
    cache_dir: str | Path,
    *,
    transport: httpx.BaseTransport | None = None,
) -> list[Embedding]:
    """embed_batch with a file cache keyed on (model_id, text).

    Hits skip the provider entirely; misses go out in one batched call
    and are persisted. Stored values are float32, and misses are returned
    in the same quantized form so hits and misses are bit-identical.
    Corrupt records are treated as misses and overwritten.
    """
    _validate_texts(texts)
    cache_path = Path(cache_dir)
    cache_path.mkdir(parents=True, exist_ok=True)

    out: list[Embedding | None] = [None] * len(texts)
    miss_indices: list[int] = []
    for i, text in enumerate(texts):
        record = cache_path / cache_key(cfg.model_id, text)
        if not record.exists():
            miss_indices.append(i)
            continue
        try:
            values = _decode_cache_record(record.read_bytes())
            if values.size != cfg.dim:
                raise CacheCorrupt("cached dim differs from config")
            out[i] = Embedding.create(values, model_id=cfg.model_id)
        except CacheCorrupt:
            miss_indices.append(i)

    if miss_indices:
        fresh = embed_batch(cfg, [texts[i] for i in miss_indices], transport=transport)
        for i, emb in zip(miss_indices, fresh):
            record = cache_path / cache_key(cfg.model_id, texts[i])
            record.write_bytes(_encode_cache_record(emb.values))
            quantized = emb.values.astype("<f4").astype(np.float64)
            out[i] = Embedding.create(quantized, model_id=cfg.model_id)
    return [emb for emb in out if emb is not None]
