"""Pre-embedding baselines: rule-based dictionary flagging and TF-IDF.

Kept deliberately simple and exactly specified (no stemming, smoothed
idf) so the baselines stay reproducible and honestly comparable with
embedding search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyCorpus
from .vectors import SimilarityResult


@dataclass(frozen=True)
class TermDictionary:
    name: str
    terms: frozenset[str]
    match_mode: str = "word_boundary"

    def __post_init__(self) -> None:
        if not self.terms:
            raise ValueError("dictionary needs at least one term")
        if any(not term.strip() for term in self.terms):
            raise ValueError("dictionary terms must not be blank")
        if self.match_mode != "word_boundary":
            raise ValueError(f"unsupported match mode: {self.match_mode!r}")

    @classmethod
    def from_terms(cls, name: str, terms: Iterable[str]) -> "TermDictionary":
        return cls(name=name, terms=frozenset(t.strip().lower() for t in terms if t.strip()))


def load_dictionary(path: str | Path, name: str | None = None) -> TermDictionary:
    """One term per line, '#' comments, UTF-8."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    terms = [line.strip() for line in lines if line.strip() and not line.lstrip().startswith("#")]
    return TermDictionary.from_terms(name or Path(path).stem, terms)


def dictionary_flag(dictionary: TermDictionary, text: str) -> tuple[bool, list[tuple[str, int]]]:
    """Case-insensitive whole-word matches with offsets into the original text.

    Word boundaries are non-alphanumeric characters or the string edges,
    so "shotgunner" never matches a dictionary entry "gun".
    """
    lowered = text.lower()
    hits: list[tuple[str, int]] = []
    for term in dictionary.terms:
        start = 0
        while True:
            pos = lowered.find(term, start)
            if pos == -1:
                break
            before_ok = pos == 0 or not lowered[pos - 1].isalnum()
            after = pos + len(term)
            after_ok = after >= len(lowered) or not lowered[after].isalnum()
            if before_ok and after_ok:
                hits.append((term, pos))
            start = pos + 1
    hits.sort(key=lambda hit: (hit[1], hit[0]))
    return (bool(hits), hits)


def _tokenize(text: str) -> list[str]:
    # same word rule as token counting: whitespace-delimited, lowercased
    return text.lower().split()


@dataclass(frozen=True)
class TfidfModel:
    vocabulary: dict[str, int]
    idf: np.ndarray
    doc_count: int


@dataclass(frozen=True)
class TfidfDocVectors:
    doc_ids: list[str]
    matrix: np.ndarray  # (docs, terms), rows L2-normalized unless token-free
    empty_doc_ids: list[str] = field(default_factory=list)


def build_tfidf(corpus: Sequence[tuple[str, str]]) -> tuple[TfidfModel, TfidfDocVectors]:
    """Fit vocabulary and smoothed idf, return unit-norm doc vectors.

    idf(t) = ln((1 + N) / (1 + df_t)) + 1, so ubiquitous terms keep
    nonzero weight and a single-document corpus stays usable. Documents
    without tokens get zero vectors and are reported.
    """
    if not corpus:
        raise EmptyCorpus("corpus is empty")
    doc_tokens = [(doc_id, _tokenize(text)) for doc_id, text in corpus]
    if not any(tokens for _, tokens in doc_tokens):
        raise EmptyCorpus("corpus has no tokens")

    vocabulary: dict[str, int] = {}
    for _, tokens in doc_tokens:
        for token in tokens:
            if token not in vocabulary:
                vocabulary[token] = len(vocabulary)

    n_docs = len(doc_tokens)
    df = np.zeros(len(vocabulary), dtype=np.float64)
    for _, tokens in doc_tokens:
        for token in set(tokens):
            df[vocabulary[token]] += 1
    idf = np.log((1.0 + n_docs) / (1.0 + df)) + 1.0

    matrix = np.zeros((n_docs, len(vocabulary)), dtype=np.float64)
    empty_doc_ids = []
    for row, (doc_id, tokens) in enumerate(doc_tokens):
        if not tokens:
            empty_doc_ids.append(doc_id)
            continue
        for token in tokens:
            matrix[row, vocabulary[token]] += 1.0
        matrix[row] *= idf
        norm = np.linalg.norm(matrix[row])
        if norm > 0:
            matrix[row] /= norm

    model = TfidfModel(vocabulary=vocabulary, idf=idf, doc_count=n_docs)
    vectors = TfidfDocVectors(
        doc_ids=[doc_id for doc_id, _ in corpus],
        matrix=matrix,
        empty_doc_ids=empty_doc_ids,
    )
    return model, vectors


def vectorize_query(model: TfidfModel, query: str) -> np.ndarray:
    """Query tf times stored idf; out-of-vocabulary terms contribute nothing."""
    vec = np.zeros(len(model.vocabulary), dtype=np.float64)
    for token in _tokenize(query):
        col = model.vocabulary.get(token)
        if col is not None:
            vec[col] += 1.0
    vec *= model.idf
    return vec


def tfidf_search(
    model: TfidfModel,
    doc_vectors: TfidfDocVectors,
    query: str,
    top_n: int = 10,
) -> list[SimilarityResult]:
    """Cosine ranking of documents; ties broken by ascending doc id.

    A query with no in-vocabulary tokens has a defined result: the empty
    list.
    """
    qvec = vectorize_query(model, query)
    qnorm = np.linalg.norm(qvec)
    if qnorm == 0.0:
        return []
    scores = doc_vectors.matrix @ (qvec / qnorm)  # doc rows are unit or zero
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], doc_vectors.doc_ids[i]))
    return [
        SimilarityResult(
            item_id=doc_vectors.doc_ids[i],
            score=float(min(1.0, max(-1.0, scores[i]))),
            rank=rank,
        )
        for rank, i in enumerate(order[:top_n], start=1)
    ]
