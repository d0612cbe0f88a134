"""Retrieval augmented generation: embed the question, retrieve similar
chunks from the index, and prompt a language model with that context.

Grounding is enforced by construction: the prompt is assembled from the
retrieved chunks verbatim and shipped back in the answer for auditing.
The question must be embedded with the same model that built the index;
a mismatch is an error, not a warning. A deterministic mock model makes
the whole pipeline testable offline.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from typing import Sequence

import httpx

from .errors import LlmUnavailable, ModelMismatch, TemplateInvalid
from .fnv import fnv1a_64_hex
from .index import VectorIndex
from .providers import ProviderConfig, embed_batch

DEFAULT_PROMPT_TEMPLATE = (
    "Answer using ONLY the context below. If the context is insufficient, say so.\n"
    "\n"
    "Context:\n"
    "{context}\n"
    "\n"
    "Question: {question}\n"
)

NO_CONTEXT_BLOCK = "NO RELEVANT CONTEXT FOUND"

_PLACEHOLDER_RE = re.compile(r"\{(context|question)\}")


@dataclass
class RagConfig:
    top_k: int = 4
    min_score: float = 0.3
    prompt_template: str = DEFAULT_PROMPT_TEMPLATE
    llm_kind: str = "mock"  # "mock" | "http"
    llm_endpoint_url: str = ""
    llm_model_id: str = ""
    llm_api_key_env: str = ""
    llm_timeout_ms: int = 30_000
    llm_retries: int = 2

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValueError("top_k must be positive")
        if not -1.0 <= self.min_score <= 1.0:
            raise ValueError("min_score must be within [-1, 1]")
        validate_template(self.prompt_template)
        if self.llm_kind not in ("mock", "http"):
            raise ValueError(f"unknown llm kind: {self.llm_kind!r}")
        if self.llm_kind == "http" and not self.llm_endpoint_url:
            raise ValueError("http llm requires llm_endpoint_url")


def validate_template(template: str) -> None:
    names = [m.group(1) for m in _PLACEHOLDER_RE.finditer(template)]
    if names.count("context") != 1 or names.count("question") != 1:
        raise TemplateInvalid(
            "template must contain {context} and {question} exactly once each"
        )


@dataclass(frozen=True)
class RetrievedChunk:
    chunk_id: int | str
    doc_id: str
    score: float
    text: str


@dataclass(frozen=True)
class RagAnswer:
    answer_text: str
    sources: list[RetrievedChunk]
    prompt_used: str


def retrieve_context(
    question: str,
    index: VectorIndex,
    provider: ProviderConfig,
    cfg: RagConfig,
    *,
    transport: httpx.BaseTransport | None = None,
) -> list[RetrievedChunk]:
    """Top-k chunks by cosine, filtered by the relevance floor.

    Raises ModelMismatch when the provider's model differs from the one
    that embedded the index.
    """
    if len(index) == 0:
        raise ValueError("index is empty")
    index_model = index.effective_model_id()
    if index_model is not None and index_model != provider.model_id:
        raise ModelMismatch(
            f"index was embedded with {index_model!r} but provider is {provider.model_id!r}"
        )
    (query,) = embed_batch(provider, [question], transport=transport)
    results = index.search_flat(query, cfg.top_k)
    chunks = []
    for result in results:
        if result.score < cfg.min_score:
            continue
        record = index.get(int(result.item_id))
        chunks.append(
            RetrievedChunk(
                chunk_id=result.item_id,
                doc_id=record.metadata.get("source_id", ""),
                score=result.score,
                text=record.metadata.get("text", ""),
            )
        )
    return chunks


def assemble_prompt(question: str, chunks: Sequence[RetrievedChunk], template: str) -> str:
    """Substitute the context block and question into the template.

    Chunks appear in retrieval rank order, each prefixed with its source
    id; zero chunks produce a designated no-context line. Substitution is
    single-pass, so braces inside the question or chunks are inert.
    """
    validate_template(template)
    if chunks:
        context = "\n---\n".join(f"[source {c.chunk_id}] {c.text}" for c in chunks)
    else:
        context = NO_CONTEXT_BLOCK
    replacements = {"context": context, "question": question}
    return _PLACEHOLDER_RE.sub(lambda m: replacements[m.group(1)], template)


def mock_llm(prompt: str) -> str:
    """Deterministic stand-in: a tag plus the FNV-1a-64 hex of the prompt."""
    return "MOCK:" + fnv1a_64_hex(prompt.encode("utf-8"))


def http_llm(
    prompt: str,
    cfg: RagConfig,
    *,
    transport: httpx.BaseTransport | None = None,
) -> str:
    """Chat-protocol call: one user message in, answer text out."""
    headers = {}
    if cfg.llm_api_key_env:
        key = os.environ.get(cfg.llm_api_key_env)
        if key is None:
            raise LlmUnavailable(
                f"credential environment variable {cfg.llm_api_key_env!r} is not set"
            )
        headers["Authorization"] = f"Bearer {key}"
    body = {
        "model": cfg.llm_model_id,
        "messages": [{"role": "user", "content": prompt}],
    }
    last_error: Exception | None = None
    for _attempt in range(cfg.llm_retries + 1):
        try:
            with httpx.Client(transport=transport, timeout=cfg.llm_timeout_ms / 1000.0) as client:
                response = client.post(cfg.llm_endpoint_url, json=body, headers=headers)
            if response.status_code < 200 or response.status_code >= 300:
                raise LlmUnavailable(f"llm returned HTTP {response.status_code}")
            return response.json()["choices"][0]["message"]["content"]
        except (httpx.HTTPError, LlmUnavailable, KeyError, IndexError, TypeError) as exc:
            last_error = exc
    raise LlmUnavailable(f"llm failed after {cfg.llm_retries + 1} attempts: {last_error}")


def ask(
    question: str,
    index: VectorIndex,
    provider: ProviderConfig,
    cfg: RagConfig,
    *,
    transport: httpx.BaseTransport | None = None,
    llm_transport: httpx.BaseTransport | None = None,
) -> RagAnswer:
    """The full three-step pipeline: retrieve, assemble, generate."""
    chunks = retrieve_context(question, index, provider, cfg, transport=transport)
    prompt = assemble_prompt(question, chunks, cfg.prompt_template)
    if cfg.llm_kind == "mock":
        answer_text = mock_llm(prompt)
    else:
        answer_text = http_llm(prompt, cfg, transport=llm_transport)
    answer = RagAnswer(answer_text=answer_text, sources=list(chunks), prompt_used=prompt)
    # groundedness by construction: every source text appears verbatim
    for source in answer.sources:
        assert source.text in answer.prompt_used
    return answer
