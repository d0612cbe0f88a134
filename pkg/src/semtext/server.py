"""HTTP service exposing search, classification, clustering, t-SNE, and
question answering over an ingested index.

Responses always carry raw cosine scores; the percentage field is
presentation only (score x 100, two decimals, ties away from zero).
Errors use one shape: {"error": {"code", "message"}}. While a reindex
holds the writer lock, read endpoints answer 503 with Retry-After
instead of queueing.
"""

from __future__ import annotations

import threading
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .analysis import best_fit_classify, assignments_for, kmeans_cluster, label_clusters, load_categories
from .config import AppConfig
from .errors import (
    KTooLarge,
    LlmUnavailable,
    ModelMismatch,
    ProviderUnavailable,
    SemtextError,
)
from .index import HnswParams, VectorIndex, rerank
from .ingest import ingest_corpus
from .providers import embed_batch
from .rag import ask as rag_ask
from .tsne import TsneConfig, tsne_embed
from .vectors import SimilarityResult


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, retry_after: int | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.retry_after = retry_after


def format_percent(score: float) -> str:
    """score -> 'NN.NN%', rounding halves away from zero."""
    quantized = Decimal(str(score * 100)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return f"{quantized}%"


class SearchRequest(BaseModel):
    query: str
    top_n: int = 20
    rerank: bool = False


class ClassifyRequest(BaseModel):
    text: str
    categories_file: str


class ClusterRequest(BaseModel):
    k: int
    seed: int = 0


class TsneRequest(BaseModel):
    perplexity: float = 30.0
    seed: int = 0


class AskRequest(BaseModel):
    question: str


def create_app(cfg: AppConfig, *, defer_load: bool = False) -> FastAPI:
    app = FastAPI(title="semtext")
    # the explorer UI is typically served from a different port
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.cfg = cfg
    app.state.index = None
    app.state.ready = False
    app.state.writer_active = False
    app.state.write_lock = threading.Lock()

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError) -> JSONResponse:
        headers = {}
        if exc.retry_after is not None:
            headers["Retry-After"] = str(exc.retry_after)
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"code": exc.code, "message": exc.message}},
            headers=headers,
        )

    @app.exception_handler(SemtextError)
    async def _semtext_error(_request: Request, exc: SemtextError) -> JSONResponse:
        return JSONResponse(
            status_code=500,
            content={"error": {"code": type(exc).__name__, "message": str(exc)}},
        )

    def load_index() -> None:
        path = Path(cfg.index_path)
        if path.exists():
            app.state.index = VectorIndex.load(path)
        else:
            app.state.index = VectorIndex(HnswParams())
        app.state.ready = True

    app.state.load_index = load_index
    if not defer_load:
        load_index()

    def require_index() -> VectorIndex:
        if app.state.writer_active:
            raise ApiError(503, "reindexing", "index is being rebuilt", retry_after=1)
        if not app.state.ready or app.state.index is None:
            raise ApiError(503, "not_ready", "index not loaded yet")
        return app.state.index

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "ready": bool(app.state.ready)}

    @app.post("/search")
    def search(req: SearchRequest) -> dict:
        index = require_index()
        if not req.query.strip():
            raise ApiError(400, "empty_query", "query must not be blank")
        if req.top_n < 1:
            raise ApiError(400, "bad_request", "top_n must be positive")
        index_model = index.effective_model_id()
        if index_model is not None and index_model != cfg.provider.model_id:
            raise ApiError(
                503, "model_mismatch",
                f"index embedded with {index_model!r}, provider is {cfg.provider.model_id!r}",
            )
        try:
            (query,) = embed_batch(cfg.provider, [req.query])
        except ProviderUnavailable as exc:
            raise ApiError(503, "provider_unavailable", str(exc)) from exc
        results = index.search(query, req.top_n, flat_threshold=cfg.hnsw_threshold)
        if req.rerank and results:
            candidates = [
                (r.item_id, index.get(int(r.item_id)).metadata.get("text", "")) for r in results
            ]
            cosine_by_id = {r.item_id: r.score for r in results}
            results = [
                SimilarityResult(item_id=c.item_id, score=cosine_by_id[c.item_id], rank=i)
                for i, c in enumerate(rerank(req.query, candidates), start=1)
            ]
        payload = []
        for result in results:
            record = index.get(int(result.item_id))
            payload.append(
                {
                    "item_id": str(result.item_id),
                    "doc_id": record.metadata.get("source_id", ""),
                    "rank": result.rank,
                    "score": result.score,
                    "percent": format_percent(result.score),
                    "metadata": record.metadata,
                }
            )
        return {"results": payload}

    @app.post("/classify")
    def classify(req: ClassifyRequest) -> dict:
        require_index()
        if not req.text.strip():
            raise ApiError(400, "empty_text", "text must not be blank")
        if not Path(req.categories_file).exists():
            raise ApiError(400, "bad_request", f"categories file {req.categories_file!r} not found")
        try:
            categories = load_categories(req.categories_file, cfg.provider)
            (doc,) = embed_batch(cfg.provider, [req.text])
        except ProviderUnavailable as exc:
            raise ApiError(503, "provider_unavailable", str(exc)) from exc
        fit = best_fit_classify(doc, categories)
        return {
            "category_id": fit.category_id,
            "score": fit.score,
            "percent": format_percent(fit.score),
            "margin": fit.margin,
            "runner_up": fit.runner_up,
            "tie": fit.tie,
        }

    @app.post("/cluster")
    def cluster(req: ClusterRequest) -> dict:
        index = require_index()
        records = index.items()
        if not records:
            raise ApiError(400, "bad_request", "index is empty")
        items = [(r.item_id, r.vector.values) for r in records]
        try:
            result = kmeans_cluster([r.vector for r in records], req.k, seed=req.seed)
        except KTooLarge as exc:
            raise ApiError(400, "k_too_large", str(exc)) from exc
        assignments = assignments_for(result, items)
        exemplars = label_clusters(result, items)
        texts = {r.item_id: r.metadata.get("text", "") for r in records}
        return {
            "k": req.k,
            "inertia": result.inertia,
            "assignments": [
                {
                    "item_id": str(a.item_id),
                    "cluster": a.cluster,
                    "distance": a.distance_to_centroid,
                }
                for a in assignments
            ],
            "exemplars": {
                str(cluster): [
                    {
                        "item_id": str(a.item_id),
                        "distance": a.distance_to_centroid,
                        "text": texts.get(a.item_id, ""),
                    }
                    for a in members
                ]
                for cluster, members in exemplars.items()
            },
        }

    @app.post("/tsne")
    def tsne(req: TsneRequest) -> dict:
        index = require_index()
        records = index.items()
        if len(records) < 2:
            raise ApiError(400, "bad_request", "need at least two records")
        try:
            config = TsneConfig(perplexity=req.perplexity, seed=req.seed)
        except ValueError as exc:
            raise ApiError(400, "bad_request", str(exc)) from exc
        layout = tsne_embed(
            [r.vector for r in records],
            config,
            labels=[r.metadata.get("label", "") for r in records],
            item_ids=[str(r.item_id) for r in records],
        )
        return {
            "points": [
                {"x": float(x), "y": float(y), "label": label, "item_id": item_id}
                for (x, y), label, item_id in zip(layout.points, layout.labels, layout.item_ids)
            ],
            "kl_final": layout.kl_trace[-1],
        }

    @app.post("/ask")
    def ask(req: AskRequest) -> dict:
        index = require_index()
        if not req.question.strip():
            raise ApiError(400, "empty_question", "question must not be blank")
        try:
            answer = rag_ask(req.question, index, cfg.provider, cfg.rag)
        except ModelMismatch as exc:
            raise ApiError(503, "model_mismatch", str(exc)) from exc
        except ProviderUnavailable as exc:
            raise ApiError(503, "provider_unavailable", str(exc)) from exc
        except LlmUnavailable as exc:
            raise ApiError(503, "llm_unavailable", str(exc)) from exc
        except ValueError as exc:
            raise ApiError(400, "bad_request", str(exc)) from exc
        return {
            "answer": answer.answer_text,
            "sources": [
                {
                    "doc_id": s.doc_id,
                    "chunk_id": str(s.chunk_id),
                    "score": s.score,
                    "percent": format_percent(s.score),
                    "excerpt": s.text,
                }
                for s in answer.sources
            ],
        }

    return app


def reindex(app: FastAPI, corpus_path: str) -> dict:
    """Rebuild the index from a corpus while holding the writer lock.

    Read endpoints answer 503 (with Retry-After) for the duration rather
    than queueing behind the writer.
    """
    cfg: AppConfig = app.state.cfg
    with app.state.write_lock:
        app.state.writer_active = True
        try:
            index, report = ingest_corpus(corpus_path, cfg)
            app.state.index = index
            app.state.ready = True
        finally:
            app.state.writer_active = False
    return {"docs": report.docs, "chunks": report.chunks, "skipped": report.skipped}
