"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 runtime error. Every subcommand
accepts --config (TOML); --json switches to machine-readable output.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .analysis import best_fit_classify, assignments_for, kmeans_cluster, label_clusters, load_categories
from .config import AppConfig, load_config
from .errors import SemtextError
from .index import VectorIndex
from .ingest import ingest_corpus
from .lexical import build_tfidf, dictionary_flag, load_dictionary, tfidf_search
from .providers import embed_batch
from .rag import ask as rag_ask
from .server import create_app, format_percent
from .tsne import TsneConfig, export_layout, tsne_embed


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse default exits 2; we reserve that
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="semtext", description="semantic text analysis toolkit")
    parser.add_argument("--config", help="TOML config file", default=None)
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("ingest", help="chunk, embed, and index a JSONL corpus")
    p.add_argument("--corpus", required=True)

    p = sub.add_parser("search", help="semantic search over the index")
    p.add_argument("--query", required=True)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--rerank", action="store_true")

    p = sub.add_parser("classify", help="best-fit category for a text")
    p.add_argument("--text", required=True)
    p.add_argument("--categories", required=True, help="JSON array of {id, description}")

    p = sub.add_parser("cluster", help="k-means over indexed embeddings")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("tsne", help="2-D t-SNE layout of the index")
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default=None)

    p = sub.add_parser("ask", help="retrieval-augmented answer")
    p.add_argument("--question", required=True)
    p.add_argument("--top", type=int, default=None)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)

    p = sub.add_parser("baseline", help="lexical baselines")
    baseline_sub = p.add_subparsers(dest="baseline_command")
    d = baseline_sub.add_parser("dictionary", help="rule-based term flagging")
    d.add_argument("--terms", required=True, help="term file: one per line, # comments")
    d.add_argument("--text", help="text to scan")
    d.add_argument("--input", help="file to scan")
    t = baseline_sub.add_parser("tfidf", help="TF-IDF ranking over a JSONL corpus")
    t.add_argument("--corpus", required=True)
    t.add_argument("--query", required=True)
    t.add_argument("--top", type=int, default=10)
    return parser


def _load_index(cfg: AppConfig) -> VectorIndex:
    path = Path(cfg.index_path)
    if not path.exists():
        raise SemtextError(f"no index at {cfg.index_path}; run `semtext ingest` first")
    return VectorIndex.load(path)


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(human)


def _cmd_ingest(args, cfg: AppConfig) -> int:
    _, report = ingest_corpus(args.corpus, cfg)
    payload = {"docs": report.docs, "chunks": report.chunks, "skipped": report.skipped}
    lines = [f"ingested {report.docs} docs as {report.chunks} chunks -> {cfg.index_path}"]
    for line_no, reason in report.skipped:
        lines.append(f"  skipped line {line_no}: {reason}")
    _emit(args, payload, "\n".join(lines))
    return 0


def _cmd_search(args, cfg: AppConfig) -> int:
    index = _load_index(cfg)
    (query,) = embed_batch(cfg.provider, [args.query])
    results = index.search(query, args.top, flat_threshold=cfg.hnsw_threshold)
    rows = []
    for result in results:
        record = index.get(int(result.item_id))
        rows.append(
            {
                "rank": result.rank,
                "item_id": str(result.item_id),
                "doc_id": record.metadata.get("source_id", ""),
                "score": result.score,
                "percent": format_percent(result.score),
                "text": record.metadata.get("text", "")[:120],
            }
        )
    human = "\n".join(
        f"{row['rank']:>3}. [{row['percent']:>8}] {row['doc_id']}: {row['text']}" for row in rows
    )
    _emit(args, {"results": rows}, human or "(no results)")
    return 0


def _cmd_classify(args, cfg: AppConfig) -> int:
    categories = load_categories(args.categories, cfg.provider)
    (doc,) = embed_batch(cfg.provider, [args.text])
    fit = best_fit_classify(doc, categories)
    payload = {
        "category_id": fit.category_id,
        "score": fit.score,
        "margin": fit.margin,
        "runner_up": fit.runner_up,
        "tie": fit.tie,
    }
    _emit(args, payload, f"{fit.category_id} (score {fit.score:.4f}, margin {fit.margin:.4f})")
    return 0


def _cmd_cluster(args, cfg: AppConfig) -> int:
    index = _load_index(cfg)
    records = index.items()
    if not records:
        raise SemtextError("index is empty")
    items = [(r.item_id, r.vector.values) for r in records]
    result = kmeans_cluster([r.vector for r in records], args.k, seed=args.seed)
    exemplars = label_clusters(result, items)
    texts = {r.item_id: r.metadata.get("text", "") for r in records}
    payload = {
        "k": args.k,
        "inertia": result.inertia,
        "assignments": [
            {"item_id": str(a.item_id), "cluster": a.cluster, "distance": a.distance_to_centroid}
            for a in assignments_for(result, items)
        ],
    }
    lines = [f"k={args.k} inertia={result.inertia:.4f}"]
    for cluster, members in sorted(exemplars.items()):
        lines.append(f"cluster {cluster}:")
        for member in members:
            lines.append(f"  {texts.get(member.item_id, '')[:80]}")
    _emit(args, payload, "\n".join(lines))
    return 0


def _cmd_tsne(args, cfg: AppConfig) -> int:
    index = _load_index(cfg)
    records = index.items()
    if len(records) < 2:
        raise SemtextError("need at least two indexed records")
    config = TsneConfig(perplexity=args.perplexity, seed=args.seed)
    layout = tsne_embed(
        [r.vector for r in records],
        config,
        labels=[r.metadata.get("label", "") for r in records],
        item_ids=[str(r.item_id) for r in records],
    )
    fmt = args.format or ("json" if str(args.out).endswith(".json") else "csv")
    export_layout(layout, args.out, fmt)
    payload = {"points": len(records), "out": str(args.out), "kl_final": layout.kl_trace[-1]}
    _emit(args, payload, f"wrote {len(records)} points to {args.out} (final KL {layout.kl_trace[-1]:.4f})")
    return 0


def _cmd_ask(args, cfg: AppConfig) -> int:
    index = _load_index(cfg)
    rag_cfg = cfg.rag
    if args.top is not None:
        rag_cfg = dataclasses.replace(rag_cfg, top_k=args.top)
    answer = rag_ask(args.question, index, cfg.provider, rag_cfg)
    payload = {
        "answer": answer.answer_text,
        "sources": [
            {"doc_id": s.doc_id, "chunk_id": str(s.chunk_id), "score": s.score, "excerpt": s.text}
            for s in answer.sources
        ],
    }
    lines = [answer.answer_text, ""]
    for s in answer.sources:
        lines.append(f"[{format_percent(s.score):>8}] {s.doc_id}: {s.text[:100]}")
    _emit(args, payload, "\n".join(lines))
    return 0


def _cmd_serve(args, cfg: AppConfig) -> int:
    import uvicorn

    app = create_app(cfg)
    uvicorn.run(
        app,
        host=args.host or cfg.server.bind,
        port=args.port or cfg.server.port,
        log_level="info",
    )
    return 0


def _cmd_baseline(args, cfg: AppConfig) -> int:
    if args.baseline_command == "dictionary":
        if args.text is None and args.input is None:
            raise _UsageError("baseline dictionary needs --text or --input")
        text = args.text if args.text is not None else Path(args.input).read_text(encoding="utf-8")
        dictionary = load_dictionary(args.terms)
        flagged, hits = dictionary_flag(dictionary, text)
        payload = {"flagged": flagged, "hits": [{"term": t, "offset": o} for t, o in hits]}
        human = "flagged" if flagged else "not flagged"
        human += "".join(f"\n  {t} @ {o}" for t, o in hits)
        _emit(args, payload, human)
        return 0
    if args.baseline_command == "tfidf":
        corpus = []
        for line in Path(args.corpus).read_text(encoding="utf-8").splitlines():
            if line.strip():
                record = json.loads(line)
                corpus.append((record["doc_id"], record["text"]))
        model, vectors = build_tfidf(corpus)
        results = tfidf_search(model, vectors, args.query, args.top)
        payload = {
            "results": [
                {"rank": r.rank, "doc_id": str(r.item_id), "score": r.score} for r in results
            ]
        }
        human = "\n".join(f"{r.rank:>3}. [{r.score:.4f}] {r.item_id}" for r in results)
        _emit(args, payload, human or "(no results)")
        return 0
    raise _UsageError("baseline needs a subcommand: dictionary or tfidf")


_COMMANDS = {
    "ingest": _cmd_ingest,
    "search": _cmd_search,
    "classify": _cmd_classify,
    "cluster": _cmd_cluster,
    "tsne": _cmd_tsne,
    "ask": _cmd_ask,
    "serve": _cmd_serve,
    "baseline": _cmd_baseline,
}


def run_cli(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        cfg = load_config(args.config)
        return _COMMANDS[args.command](args, cfg)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (SemtextError, OSError, json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
