"""Exact cosine-similarity search over node embeddings.

Exhaustive scan by design: corpora at the intended scale are thousands of
nodes, and exactness keeps the retrieval layer testable against brute force.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np


class ZeroVectorError(ValueError):
    pass


@dataclass(frozen=True)
class ScoredId:
    id: str
    score: float


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    """dot(a, b) / (|a| * |b|), accumulated in double precision."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine undefined for zero-norm vector")
    return float(np.dot(va, vb) / (na * nb))


def rank(scored: List[ScoredId]) -> List[ScoredId]:
    """Score descending, ties broken by id ascending."""
    return sorted(scored, key=lambda s: (-s.score, s.id))


def top_k(query: Sequence[float], candidates: Mapping[str, Sequence[float]],
          k: int, t: float) -> List[ScoredId]:
    """Exhaustive scan: keep candidates scoring >= t, rank, truncate to k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scored = [ScoredId(nid, cosine(query, vec)) for nid, vec in candidates.items()]
    return rank([s for s in scored if s.score >= t])[:k]


class EmbeddingIndex:
    """Immutable id -> vector store built once from a knowledge graph."""

    def __init__(self, vectors: Mapping[str, Sequence[float]]):
        self.vectors: Dict[str, np.ndarray] = {
            nid: np.asarray(v, dtype=np.float64) for nid, v in vectors.items()
        }
        dims = {v.shape[0] for v in self.vectors.values()}
        if len(dims) > 1:
            raise ValueError(f"mixed embedding dimensions in index: {sorted(dims)}")
        self.dim = dims.pop() if dims else None

    def __len__(self):
        return len(self.vectors)

    def top_k(self, query: Sequence[float], k: int, t: float) -> List[ScoredId]:
        return top_k(query, self.vectors, k, t)
