"""Corpus ingestion: JSONL records in, a persisted vector index out.

Each line is {"doc_id", "text", "metadata": {...}}. Documents are
noise-stripped, chunked per policy, embedded through the cache, and
upserted under deterministic ids, so re-ingesting a file overwrites
rather than duplicates. Malformed lines are skipped and reported; a
provider failure aborts the whole batch without persisting anything.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .chunking import Chunk, split_document
from .config import AppConfig
from .errors import IoFailure
from .fnv import fnv1a_64
from .index import HnswParams, IndexRecord, VectorIndex
from .providers import cached_embed, embed_batch


@dataclass
class IngestReport:
    docs: int = 0
    chunks: int = 0
    skipped: list[tuple[int, str]] = field(default_factory=list)  # (line number, reason)


def chunk_item_id(doc_id: str, ordinal: int) -> int:
    """Stable 64-bit id for a chunk: FNV-1a of doc id, 0x1F, and ordinal."""
    return fnv1a_64(doc_id.encode("utf-8") + b"\x1f" + str(ordinal).encode("ascii"))


def _parse_corpus(path: str | Path, report: IngestReport) -> list[dict]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read corpus {path}: {exc}") from exc
    docs = []
    seen_ids: set[str] = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            doc_id = record["doc_id"]
            text = record["text"]
        except (json.JSONDecodeError, TypeError, KeyError) as exc:
            report.skipped.append((line_no, f"malformed record: {exc}"))
            continue
        if not isinstance(doc_id, str) or not isinstance(text, str) or not text.strip():
            report.skipped.append((line_no, "doc_id and non-empty text are required"))
            continue
        if doc_id in seen_ids:
            report.skipped.append((line_no, f"duplicate doc_id {doc_id!r}"))
            continue
        seen_ids.add(doc_id)
        metadata = record.get("metadata") or {}
        docs.append({"doc_id": doc_id, "text": text, "metadata": metadata})
    return docs


def ingest_corpus(
    path: str | Path,
    cfg: AppConfig,
    *,
    index: VectorIndex | None = None,
    persist: bool = True,
    transport: httpx.BaseTransport | None = None,
) -> tuple[VectorIndex, IngestReport]:
    """Chunk, embed, and index a JSONL corpus; returns the built index.

    All embeddings are produced before the index is touched, so provider
    failures leave any existing index file intact.
    """
    report = IngestReport()
    docs = _parse_corpus(path, report)

    all_chunks: list[tuple[dict, Chunk]] = []
    for doc in docs:
        chunks = split_document(doc["doc_id"], doc["text"], cfg.chunk_policy)
        for chunk in chunks:
            all_chunks.append((doc, chunk))
        if chunks:
            report.docs += 1

    if index is None:
        index_path = Path(cfg.index_path)
        if index_path.exists():
            index = VectorIndex.load(index_path)
        else:
            index = VectorIndex(HnswParams())

    if all_chunks:
        texts = [chunk.text for _, chunk in all_chunks]
        if cfg.cache_dir:
            embeddings = cached_embed(cfg.provider, texts, cfg.cache_dir, transport=transport)
        else:
            embeddings = embed_batch(cfg.provider, texts, transport=transport)
        for (doc, chunk), embedding in zip(all_chunks, embeddings):
            ordinal = int(chunk.chunk_id.rsplit("#", 1)[1])
            metadata = {str(k): str(v) for k, v in doc["metadata"].items()}
            metadata.update(
                {
                    "source_id": doc["doc_id"],
                    "chunk_id": chunk.chunk_id,
                    "char_start": str(chunk.char_start),
                    "char_end": str(chunk.char_end),
                    "text": chunk.text,
                    "model_id": cfg.provider.model_id,
                }
            )
            index.upsert(
                IndexRecord(
                    item_id=chunk_item_id(doc["doc_id"], ordinal),
                    vector=embedding,
                    metadata=metadata,
                )
            )
            report.chunks += 1

    if persist:
        index.save(cfg.index_path)
    return index, report
