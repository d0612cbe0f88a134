"""Application configuration: one TOML file wiring provider, chunking,
index location, RAG, and server settings together."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .chunking import ChunkPolicy
from .providers import ProviderConfig
from .rag import RagConfig

DEFAULT_INDEX_PATH = "index.semk"
DEFAULT_CACHE_DIR = ".embed-cache"
DEFAULT_HNSW_THRESHOLD = 50_000


@dataclass
class ServerConfig:
    bind: str = "127.0.0.1"
    port: int = 8080


@dataclass
class AppConfig:
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    chunk_policy: ChunkPolicy = field(default_factory=ChunkPolicy)
    rag: RagConfig = field(default_factory=RagConfig)
    server: ServerConfig = field(default_factory=ServerConfig)
    index_path: str = DEFAULT_INDEX_PATH
    cache_dir: str = DEFAULT_CACHE_DIR
    hnsw_threshold: int = DEFAULT_HNSW_THRESHOLD


def _build_section(cls, data: dict, list_fields: tuple[str, ...] = ()):
    kwargs = dict(data)
    for name in list_fields:
        if name in kwargs:
            kwargs[name] = tuple(kwargs[name])
    return cls(**kwargs)


def load_config(path: str | Path | None) -> AppConfig:
    """Parse a TOML config; a missing path yields pure defaults."""
    if path is None:
        return AppConfig()
    raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    provider = _build_section(ProviderConfig, raw.get("provider", {}))
    chunking = _build_section(
        ChunkPolicy, raw.get("chunking", {}), list_fields=("separators", "noise_rules")
    )
    rag = _build_section(RagConfig, raw.get("rag", {}))
    server = _build_section(ServerConfig, raw.get("server", {}))
    search = raw.get("search", {})
    return AppConfig(
        provider=provider,
        chunk_policy=chunking,
        rag=rag,
        server=server,
        index_path=raw.get("index_path", DEFAULT_INDEX_PATH),
        cache_dir=raw.get("cache_dir", DEFAULT_CACHE_DIR),
        hnsw_threshold=search.get("hnsw_threshold", DEFAULT_HNSW_THRESHOLD),
    )
