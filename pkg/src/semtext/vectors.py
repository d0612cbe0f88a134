"""Embedding vectors and cosine similarity.

Everything downstream (search, classification, clustering, RAG) is built
on these two objects: a fixed-dimension vector with model identity, and a
ranked similarity result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, ZeroVector

ZERO_NORM_THRESHOLD = 1e-12


@dataclass(frozen=True)
class Embedding:
    """A real vector plus the identity of the model that produced it.

    ``norm`` records the Euclidean length of ``values`` at creation time,
    so normalized copies remember the original magnitude.
    """

    values: np.ndarray
    dim: int
    model_id: str
    norm: float

    @classmethod
    def create(cls, values: Sequence[float] | np.ndarray, model_id: str) -> "Embedding":
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("embedding values must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding values must be finite")
        return cls(
            values=arr,
            dim=int(arr.size),
            model_id=model_id,
            norm=float(np.linalg.norm(arr)),
        )


@dataclass(frozen=True)
class SimilarityResult:
    """One entry of a ranked answer: item, cosine score, 1-based rank."""

    item_id: int | str
    score: float
    rank: int


def _check_dims(a: Embedding, b: Embedding) -> None:
    if a.dim != b.dim:
        raise DimensionMismatch(f"dim {a.dim} vs {b.dim}")


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    """Cosine of the angle between two embeddings, clamped to [-1, 1].

    Raises ZeroVector when either input has norm below 1e-12: a vector that
    small signals an un-embeddable input upstream, not a real direction.
    """
    _check_dims(a, b)
    na = float(np.linalg.norm(a.values))
    nb = float(np.linalg.norm(b.values))
    if na < ZERO_NORM_THRESHOLD or nb < ZERO_NORM_THRESHOLD:
        raise ZeroVector("cosine of a (near-)zero vector is undefined")
    score = float(np.dot(a.values, b.values)) / (na * nb)
    return min(1.0, max(-1.0, score))


def normalize(a: Embedding) -> Embedding:
    """Unit-length copy of ``a``; the original length is kept in ``norm``."""
    na = float(np.linalg.norm(a.values))
    if na < ZERO_NORM_THRESHOLD:
        raise ZeroVector("cannot normalize a (near-)zero vector")
    return Embedding(values=a.values / na, dim=a.dim, model_id=a.model_id, norm=na)


def similarity_matrix(items: Sequence[Embedding]) -> np.ndarray:
    """Pairwise cosine matrix; symmetric with a unit diagonal.

    Each off-diagonal element is computed by the same code path as
    :func:`cosine_similarity`, so the matrix matches element-wise calls
    exactly.
    """
    n = len(items)
    if n < 1:
        raise ValueError("similarity_matrix needs at least one item")
    out = np.ones((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            s = cosine_similarity(items[i], items[j])
            out[i, j] = s
            out[j, i] = s
    return out
