"""Service configuration: one YAML file plus environment overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import yaml

from .ingest import ChunkingParams
from .retrieval import RetrievalParams


@dataclass
class ProviderConfig:
    kind: str = "mock"  # "mock" | "remote"
    base_url: str = ""
    chat_model: str = "chat-default"
    embed_model: str = "embed-default"
    timeout: float = 60.0
    max_retries: int = 3
    concurrency: int = 4
    mock_dim: int = 16
    mock_script: str = ""  # path to a JSON list of {match, response}

    def __post_init__(self):
        if self.kind not in ("mock", "remote"):
            raise ValueError(f"provider kind must be mock or remote, got {self.kind!r}")
        if self.kind == "remote" and not self.base_url:
            raise ValueError("remote provider requires base_url")


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    retrieval: RetrievalParams = field(default_factory=RetrievalParams)
    chunking: ChunkingParams = field(default_factory=ChunkingParams)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    graph_path: str = ""
    default_language: str = "en"
    allow_out_of_range: bool = False

    def __post_init__(self):
        self.retrieval.validate(allow_out_of_range=self.allow_out_of_range)


_ENV_OVERRIDES = {
    "GRAG_HOST": ("host", str),
    "GRAG_PORT": ("port", int),
    "GRAG_GRAPH_PATH": ("graph_path", str),
    "GRAG_DEFAULT_LANGUAGE": ("default_language", str),
    "GRAG_PROVIDER_KIND": (("provider", "kind"), str),
    "GRAG_PROVIDER_BASE_URL": (("provider", "base_url"), str),
}


def load_config(path: Optional[str] = None, env=os.environ,
                allow_out_of_range: Optional[bool] = None) -> ServiceConfig:
    raw = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}

    retrieval = RetrievalParams(**raw.get("retrieval", {}))
    chunking = ChunkingParams(**raw.get("chunking", {}))
    provider = ProviderConfig(**raw.get("provider", {}))
    override = raw.get("allow_out_of_range", False)
    if allow_out_of_range is not None:
        override = allow_out_of_range

    cfg = ServiceConfig(
        host=raw.get("host", "127.0.0.1"),
        port=raw.get("port", 8080),
        retrieval=retrieval,
        chunking=chunking,
        provider=provider,
        graph_path=raw.get("graph_path", ""),
        default_language=raw.get("default_language", "en"),
        allow_out_of_range=override,
    )
    for key, (target, cast) in _ENV_OVERRIDES.items():
        if key in env:
            if isinstance(target, tuple):
                setattr(getattr(cfg, target[0]), target[1], cast(env[key]))
            else:
                setattr(cfg, target, cast(env[key]))
    return cfg


def make_providers(cfg: ProviderConfig, usage=None):
    """Build the (chat, embed) pair described by the config."""
    import json

    from .providers import (MockChatProvider, MockEmbeddingProvider, ProviderUsage,
                            RemoteChatProvider, RemoteEmbeddingProvider)

    usage = usage or ProviderUsage()
    if cfg.kind == "mock":
        rules = []
        if cfg.mock_script:
            with open(cfg.mock_script, encoding="utf-8") as fh:
                rules = [(r["match"], r["response"]) for r in json.load(fh)]
        chat = MockChatProvider(rules=rules, default_response="[]" if not rules else None,
                                usage=usage)
        embed = MockEmbeddingProvider(dim=cfg.mock_dim, usage=usage)
        return chat, embed
    chat = RemoteChatProvider(cfg.base_url, cfg.chat_model, timeout=cfg.timeout,
                              max_retries=cfg.max_retries, usage=usage)
    embed = RemoteEmbeddingProvider(cfg.base_url, cfg.embed_model, timeout=cfg.timeout,
                                    max_retries=cfg.max_retries, usage=usage)
    return chat, embed
