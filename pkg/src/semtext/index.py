"""Vector index: exact flat search, approximate HNSW search, binary
persistence, tombstone deletion, and retrieve-then-rerank.

Vectors are stored unit-normalized (original norms retained), so cosine
similarity reduces to a dot product — one multiply-accumulate pass per
comparison. The HNSW graph is built incrementally: each insert draws a
level from a seeded generator, descends greedily through the upper
layers, then runs a best-first beam of width ``ef_construction`` at each
layer it joins. Neighbor selection uses the diversity heuristic (keep a
candidate only if it is closer to the query than to any already-kept
neighbor) with discarded candidates backfilled up to the layer cap;
both choices are needed to reach the recall targets at the default
parameters.

Everything is deterministic: heap ties resolve on internal ids, ranking
ties on ascending item id, and the level sequence comes from the seed.
"""

from __future__ import annotations

import heapq
import io
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import httpx
import numpy as np

from .errors import (
    CorruptFile,
    DimensionMismatch,
    DuplicateId,
    ScorerUnavailable,
    VersionUnsupported,
    ZeroVector,
)
from .fnv import fnv1a_64
from .vectors import ZERO_NORM_THRESHOLD, Embedding, SimilarityResult

INDEX_MAGIC = b"SEMK"
INDEX_VERSION = 1

_GROW_START = 256


@dataclass(frozen=True)
class IndexRecord:
    item_id: int
    vector: Embedding
    metadata: dict[str, str] = field(default_factory=dict)


@dataclass
class HnswParams:
    M: int = 16
    ef_construction: int = 200
    ef_search: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.M < 2:
            raise ValueError("M must be at least 2")
        if self.ef_construction < 1 or self.ef_search < 1:
            raise ValueError("ef values must be positive")

    @property
    def level_lambda(self) -> float:
        return 1.0 / math.log(self.M)


class VectorIndex:
    """id -> unit vector store with exact and approximate search."""

    def __init__(self, params: HnswParams | None = None):
        self.params = params or HnswParams()
        self._rng = np.random.default_rng(self.params.seed)
        self._dim: int | None = None
        self._matrix = np.zeros((0, 0), dtype=np.float32)
        self._norms: list[float] = []
        self._meta: list[dict[str, str]] = []
        self._levels: list[int] = []
        self._alive: list[bool] = []
        self._internal_to_id: list[int] = []
        self._by_id: dict[int, int] = {}
        self._links: list[list[list[int] | None]] = []  # [layer][internal] -> neighbor internals
        self._entry: int | None = None
        self._max_layer = -1
        self._model_id: str | None = None

    # -- basic accessors ---------------------------------------------------

    def __len__(self) -> int:
        return sum(self._alive)

    @property
    def dim(self) -> int | None:
        return self._dim

    def __contains__(self, item_id: int) -> bool:
        internal = self._by_id.get(item_id)
        return internal is not None and self._alive[internal]

    def effective_model_id(self) -> str | None:
        """Model that produced the stored vectors, when known.

        Tracked in memory from the first insert; after a load it is
        recovered from record metadata (ingestion writes a ``model_id``
        key) since the file format does not carry it.
        """
        if self._model_id is not None:
            return self._model_id
        for internal, alive in enumerate(self._alive):
            if alive:
                return self._meta[internal].get("model_id")
        return None

    def get(self, item_id: int) -> IndexRecord:
        internal = self._by_id.get(item_id)
        if internal is None or not self._alive[internal]:
            raise KeyError(f"id {item_id} not in index")
        return self._record_at(internal)

    def _record_at(self, internal: int) -> IndexRecord:
        values = self._matrix[internal].astype(np.float64)
        embedding = Embedding(
            values=values,
            dim=int(values.size),
            model_id=self._model_id or self._meta[internal].get("model_id", ""),
            norm=self._norms[internal],
        )
        return IndexRecord(
            item_id=self._internal_to_id[internal],
            vector=embedding,
            metadata=dict(self._meta[internal]),
        )

    def items(self) -> list[IndexRecord]:
        return [self._record_at(i) for i in range(len(self._alive)) if self._alive[i]]

    # -- insertion ----------------------------------------------------------

    def _ensure_capacity(self, n: int) -> None:
        if self._matrix.shape[0] >= n:
            return
        cap = max(_GROW_START, self._matrix.shape[0])
        while cap < n:
            cap *= 2
        grown = np.zeros((cap, self._dim), dtype=np.float32)
        grown[: self._matrix.shape[0]] = self._matrix
        self._matrix = grown

    def _unit_row(self, embedding: Embedding) -> tuple[np.ndarray, float]:
        norm = float(np.linalg.norm(embedding.values))
        if norm < ZERO_NORM_THRESHOLD:
            raise ZeroVector("cannot index a (near-)zero vector")
        values = embedding.values
        if abs(norm - 1.0) > 1e-6:
            values = values / norm
        # the file format keeps norms in f32; quantize now so that a
        # save/load round trip reproduces records exactly
        return values.astype(np.float32), float(np.float32(norm))

    def _draw_level(self) -> int:
        u = 1.0 - float(self._rng.random())  # in (0, 1]
        return int(math.floor(-math.log(u) * self.params.level_lambda))

    def add(self, record: IndexRecord) -> None:
        """Insert a record; the first insert fixes the index dimension."""
        if record.item_id in self._by_id:
            raise DuplicateId(f"id {record.item_id} already present")
        if self._dim is None:
            self._dim = record.vector.dim
            self._matrix = np.zeros((_GROW_START, self._dim), dtype=np.float32)
        elif record.vector.dim != self._dim:
            raise DimensionMismatch(f"index dim {self._dim}, record dim {record.vector.dim}")
        if self._model_id is None:
            self._model_id = record.vector.model_id

        row, norm = self._unit_row(record.vector)
        internal = len(self._internal_to_id)
        self._ensure_capacity(internal + 1)
        self._matrix[internal] = row
        self._norms.append(norm)
        self._meta.append(dict(record.metadata))
        level = self._draw_level()
        self._levels.append(level)
        while len(self._links) <= level:
            self._links.append([None] * internal)
        for layer in self._links:
            layer.append(None)
        for l in range(level + 1):
            self._links[l][internal] = []

        self._connect(internal, level)

        # publish last so concurrent readers never see a half-inserted record
        self._alive.append(True)
        self._internal_to_id.append(record.item_id)
        self._by_id[record.item_id] = internal

    def upsert(self, record: IndexRecord) -> None:
        """add(), or overwrite the vector and metadata of a live record in place.

        The graph keeps its edges; exactness of flat search is unaffected
        and re-ingesting identical content leaves the graph correct.
        """
        internal = self._by_id.get(record.item_id)
        if internal is None:
            self.add(record)
            return
        if not self._alive[internal]:
            raise DuplicateId(f"id {record.item_id} was deleted; rebuild to reuse ids")
        if record.vector.dim != self._dim:
            raise DimensionMismatch(f"index dim {self._dim}, record dim {record.vector.dim}")
        row, norm = self._unit_row(record.vector)
        self._matrix[internal] = row
        self._norms[internal] = norm
        self._meta[internal] = dict(record.metadata)

    def delete(self, item_id: int) -> None:
        """Tombstone: the id disappears from results, the graph is not repaired.

        Compaction happens by rebuilding the index.
        """
        internal = self._by_id.get(item_id)
        if internal is None or not self._alive[internal]:
            raise KeyError(f"id {item_id} not in index")
        self._alive[internal] = False

    # -- graph construction --------------------------------------------------

    def _connect(self, internal: int, level: int) -> None:
        if self._entry is None:
            self._entry = internal
            self._max_layer = level
            return
        q = self._matrix[internal]
        visited = np.zeros(internal + 1, dtype=bool)
        entry_points = [self._entry]
        for layer in range(self._max_layer, level, -1):
            best = self._search_layer(q, entry_points, 1, layer, visited)
            entry_points = [max(best)[1]]
            visited[:] = False
        for layer in range(min(level, self._max_layer), -1, -1):
            found = self._search_layer(q, entry_points, self.params.ef_construction, layer, visited)
            visited[:] = False
            cap = 2 * self.params.M if layer == 0 else self.params.M
            neighbors = self._select_neighbors(found, cap)
            layer_links = self._links[layer]
            layer_links[internal] = list(neighbors)
            for nb in neighbors:
                nb_links = layer_links[nb]
                nb_links.append(internal)
                if len(nb_links) > cap:
                    sims = self._matrix[nb_links] @ self._matrix[nb]
                    layer_links[nb] = self._select_neighbors(
                        list(zip(sims.tolist(), nb_links)), cap
                    )
            entry_points = [node for _, node in found]
        if level > self._max_layer:
            self._max_layer = level
            self._entry = internal

    def _select_neighbors(self, candidates: list[tuple[float, int]], m: int) -> list[int]:
        """Diversity heuristic with backfill.

        Walk candidates from most to least similar; keep one only if it
        is more similar to the query than to every neighbor kept so far,
        then fill any remaining quota from the discards in order.
        """
        order = sorted(candidates, key=lambda t: (-t[0], t[1]))
        if len(order) <= 1:
            return [c for _, c in order]
        ids = [c for _, c in order]
        vectors = self._matrix[ids]
        pairwise = vectors @ vectors.T
        best_to_kept = np.full(len(ids), -2.0, dtype=np.float32)
        kept: list[int] = []
        dropped: list[int] = []
        for pos in range(len(ids)):
            if len(kept) >= m:
                break
            if not kept or order[pos][0] >= float(best_to_kept[pos]):
                kept.append(pos)
                np.maximum(best_to_kept, pairwise[pos], out=best_to_kept)
            else:
                dropped.append(pos)
        selected = [ids[pos] for pos in kept]
        for pos in dropped:
            if len(selected) >= m:
                break
            selected.append(ids[pos])
        return selected

    def _search_layer(
        self,
        q: np.ndarray,
        entry_points: list[int],
        ef: int,
        layer: int,
        visited: np.ndarray,
    ) -> list[tuple[float, int]]:
        """Best-first beam of width ``ef``; returns a min-heap of (sim, node)."""
        links = self._links[layer]
        matrix = self._matrix
        candidates: list[tuple[float, int]] = []
        results: list[tuple[float, int]] = []
        for node in entry_points:
            visited[node] = True
            sim = float(matrix[node] @ q)
            heapq.heappush(candidates, (-sim, node))
            heapq.heappush(results, (sim, node))
        lower = results[0][0] if len(results) >= ef else -2.0
        while candidates:
            neg_sim, node = heapq.heappop(candidates)
            if -neg_sim < lower:
                break
            node_links = links[node]
            if not node_links:
                continue
            fresh = [nb for nb in node_links if not visited[nb]]
            if not fresh:
                continue
            for nb in fresh:
                visited[nb] = True
            sims = matrix[fresh] @ q
            for sim, nb in zip(sims.tolist(), fresh):
                if sim > lower or len(results) < ef:
                    heapq.heappush(candidates, (-sim, nb))
                    heapq.heappush(results, (sim, nb))
                    if len(results) > ef:
                        heapq.heappop(results)
                    if len(results) >= ef:
                        lower = results[0][0]
        return results

    # -- search ----------------------------------------------------------------

    def _prepare_query(self, query: Embedding) -> np.ndarray:
        if self._dim is not None and query.dim != self._dim:
            raise DimensionMismatch(f"index dim {self._dim}, query dim {query.dim}")
        norm = float(np.linalg.norm(query.values))
        if norm < ZERO_NORM_THRESHOLD:
            raise ZeroVector("query vector is (near-)zero")
        return (query.values / norm).astype(np.float32)

    def _ranked(self, scored: list[tuple[float, int]], k: int) -> list[SimilarityResult]:
        scored.sort(key=lambda t: (-t[0], self._internal_to_id[t[1]]))
        out = []
        for rank, (sim, internal) in enumerate(scored[:k], start=1):
            out.append(
                SimilarityResult(
                    item_id=self._internal_to_id[internal],
                    score=float(min(1.0, max(-1.0, sim))),
                    rank=rank,
                )
            )
        return out

    def search_flat(self, query: Embedding, k: int) -> list[SimilarityResult]:
        """Exact top-k by cosine over all live records."""
        if k < 1:
            raise ValueError("k must be at least 1")
        count = len(self._internal_to_id)
        if count == 0:
            return []
        q = self._prepare_query(query).astype(np.float64)
        sims = self._matrix[:count].astype(np.float64) @ q
        scored = [
            (float(sims[i]), i) for i in range(count) if self._alive[i]
        ]
        return self._ranked(scored, k)

    def search_hnsw(
        self, query: Embedding, k: int, ef_search: int | None = None
    ) -> list[SimilarityResult]:
        """Approximate top-k: greedy descent, then a layer-0 beam of ef_search."""
        if k < 1:
            raise ValueError("k must be at least 1")
        if self._entry is None:
            return []
        ef = max(ef_search if ef_search is not None else self.params.ef_search, k)
        q = self._prepare_query(query)
        # size by the vector store, not the published-id list: an in-flight
        # insert may already be reachable through neighbor edges
        visited = np.zeros(len(self._norms), dtype=bool)
        published = len(self._internal_to_id)
        entry_points = [self._entry]
        for layer in range(self._max_layer, 0, -1):
            best = self._search_layer(q, entry_points, 1, layer, visited)
            entry_points = [max(best)[1]]
            visited[:] = False
        beam = self._search_layer(q, entry_points, ef, 0, visited)
        q64 = q.astype(np.float64)
        scored = [
            (float(self._matrix[node].astype(np.float64) @ q64), node)
            for _, node in beam
            if node < published and self._alive[node]
        ]
        return self._ranked(scored, k)

    def search(self, query: Embedding, k: int, flat_threshold: int = 50_000) -> list[SimilarityResult]:
        """Flat below the threshold (exactness first), HNSW above."""
        if len(self) > flat_threshold:
            return self.search_hnsw(query, k)
        return self.search_flat(query, k)

    # -- persistence -------------------------------------------------------------

    def save(self, path: str | Path) -> None:
        buf = io.BytesIO()
        count = len(self._internal_to_id)
        dim = self._dim or 0
        buf.write(struct.pack("<4sBIQ", INDEX_MAGIC, INDEX_VERSION, dim, count))
        for internal in range(count):
            meta_json = json.dumps(self._meta[internal], sort_keys=True, ensure_ascii=False).encode("utf-8")
            buf.write(struct.pack("<QB", self._internal_to_id[internal], 0 if self._alive[internal] else 1))
            buf.write(self._matrix[internal].astype("<f4").tobytes())
            buf.write(struct.pack("<fI", self._norms[internal], len(meta_json)))
            buf.write(meta_json)
        entry_id = self._internal_to_id[self._entry] if self._entry is not None else 0
        buf.write(struct.pack("<QB", entry_id, max(self._max_layer, 0)))
        for internal in range(count):
            for layer in range(self._max_layer + 1):
                links = self._links[layer][internal] if layer < len(self._links) else None
                if links is None:
                    buf.write(struct.pack("<I", 0))
                    continue
                buf.write(struct.pack("<I", len(links)))
                for nb in links:
                    buf.write(struct.pack("<Q", self._internal_to_id[nb]))
        data = buf.getvalue()
        blob = data + struct.pack("<Q", fnv1a_64(data))
        Path(path).write_bytes(blob)

    @classmethod
    def load(cls, path: str | Path, params: HnswParams | None = None) -> "VectorIndex":
        blob = Path(path).read_bytes()
        header_size = struct.calcsize("<4sBIQ")
        if len(blob) < header_size + 8:
            raise CorruptFile("index file truncated")
        magic, version, dim, count = struct.unpack_from("<4sBIQ", blob)
        if magic != INDEX_MAGIC:
            raise CorruptFile("bad index magic")
        if version != INDEX_VERSION:
            raise VersionUnsupported(f"index version {version} unsupported")
        (checksum,) = struct.unpack_from("<Q", blob, len(blob) - 8)
        if checksum != fnv1a_64(blob[:-8]):
            raise CorruptFile("index checksum mismatch")
        body = memoryview(blob)[:-8]
        offset = header_size

        index = cls(params=params)
        if count == 0:
            return index
        index._dim = dim
        index._matrix = np.zeros((max(_GROW_START, count), dim), dtype=np.float32)
        try:
            for internal in range(count):
                item_id, tombstone = struct.unpack_from("<QB", body, offset)
                offset += struct.calcsize("<QB")
                row = np.frombuffer(body, dtype="<f4", count=dim, offset=offset)
                offset += 4 * dim
                norm, meta_len = struct.unpack_from("<fI", body, offset)
                offset += struct.calcsize("<fI")
                meta = json.loads(bytes(body[offset : offset + meta_len]).decode("utf-8"))
                offset += meta_len
                index._matrix[internal] = row
                index._norms.append(float(norm))
                index._meta.append(meta)
                index._alive.append(tombstone == 0)
                index._internal_to_id.append(item_id)
                index._by_id[item_id] = internal
            entry_id, max_layer = struct.unpack_from("<QB", body, offset)
            offset += struct.calcsize("<QB")
            index._max_layer = max_layer
            index._entry = index._by_id[entry_id]
            index._links = [[None] * count for _ in range(max_layer + 1)]
            levels = [0] * count
            for internal in range(count):
                for layer in range(max_layer + 1):
                    (n_links,) = struct.unpack_from("<I", body, offset)
                    offset += 4
                    if n_links:
                        neighbor_ids = struct.unpack_from(f"<{n_links}Q", body, offset)
                        offset += 8 * n_links
                        index._links[layer][internal] = [index._by_id[i] for i in neighbor_ids]
                        levels[internal] = max(levels[internal], layer)
                    else:
                        index._links[layer][internal] = [] if layer == 0 else None
        except (struct.error, ValueError, KeyError, json.JSONDecodeError) as exc:
            raise CorruptFile(f"index file malformed: {exc}") from exc
        if offset != len(body):
            raise CorruptFile("index file has trailing or missing bytes")
        # only the entry point may sit on layers where it has no neighbors yet
        levels[index._entry] = max_layer
        for internal in range(count):
            for layer in range(1, levels[internal] + 1):
                if index._links[layer][internal] is None:
                    index._links[layer][internal] = []
        index._levels = levels
        return index


# -- reranking ---------------------------------------------------------------


@dataclass(frozen=True)
class RerankedCandidate:
    item_id: int | str
    text: str
    score: float
    rank: int


def lexical_overlap_scorer(query: str, texts: Sequence[str]) -> list[float]:
    """Jaccard overlap of lowercased word sets (the default scorer)."""
    query_words = set(query.lower().split())
    scores = []
    for text in texts:
        words = set(text.lower().split())
        union = query_words | words
        scores.append(len(query_words & words) / len(union) if union else 0.0)
    return scores


class HttpScorer:
    """External reranker: POST {"query", "candidates"} -> {"scores"}."""

    def __init__(self, url: str, timeout_ms: int = 30_000,
                 transport: httpx.BaseTransport | None = None):
        self.url = url
        self.timeout = timeout_ms / 1000.0
        self._transport = transport

    def __call__(self, query: str, texts: Sequence[str]) -> list[float]:
        try:
            with httpx.Client(transport=self._transport, timeout=self.timeout) as client:
                response = client.post(self.url, json={"query": query, "candidates": list(texts)})
                if response.status_code < 200 or response.status_code >= 300:
                    raise ScorerUnavailable(f"scorer returned HTTP {response.status_code}")
                scores = response.json()["scores"]
        except ScorerUnavailable:
            raise
        except (httpx.HTTPError, KeyError, TypeError, ValueError) as exc:
            raise ScorerUnavailable(f"scorer unreachable or malformed: {exc}") from exc
        if len(scores) != len(texts):
            raise ScorerUnavailable(
                f"scorer returned {len(scores)} scores for {len(texts)} candidates"
            )
        return [float(s) for s in scores]


def rerank(
    query_text: str,
    candidates: Sequence[tuple[int | str, str]],
    scorer: Callable[[str, Sequence[str]], list[float]] | None = None,
    top_m: int | None = None,
) -> list[RerankedCandidate]:
    """Re-score retrieved candidates; ties keep the original retrieval order.

    ``candidates`` are (item_id, display text) in rank order. The output
    is always a subset of the input.
    """
    if not candidates:
        raise ValueError("rerank needs at least one candidate")
    if top_m is None:
        top_m = len(candidates)
    if not 1 <= top_m <= len(candidates):
        raise ValueError("top_m must be between 1 and the candidate count")
    score_fn = scorer or lexical_overlap_scorer
    scores = score_fn(query_text, [text for _, text in candidates])
    order = sorted(range(len(candidates)), key=lambda i: (-scores[i], i))
    return [
        RerankedCandidate(
            item_id=candidates[i][0], text=candidates[i][1], score=float(scores[i]), rank=rank
        )
        for rank, i in enumerate(order[:top_m], start=1)
    ]
