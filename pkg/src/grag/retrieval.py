"""Local entity-based retrieval: match question entities in the graph, expand
one neighborhood ring, and assemble the context tables."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .extract import ExtractionGuidance, Triple, extract_triples
from .graph import KnowledgeGraph
from .index import EmbeddingIndex, ScoredId, cosine, rank
from .ingest import Chunk

# Empirically valid tuning ranges; out-of-range values need the override flag.
PARAM_RANGES = {
    "k": (3, 15),
    "t": (0.5, 0.75),
    "o": (5, 10),
    "i": (5, 10),
    "c": (5, 10),
}


@dataclass
class RetrievalParams:
    k: int = 12   # entities kept
    t: float = 0.5  # similarity threshold (inclusive)
    o: int = 10   # outgoing relationships
    i: int = 10   # incoming relationships
    c: int = 5    # chunks

    def validate(self, allow_out_of_range: bool = False) -> "RetrievalParams":
        if allow_out_of_range:
            return self
        for name, (lo, hi) in PARAM_RANGES.items():
            value = getattr(self, name)
            if not lo <= value <= hi:
                raise ValueError(
                    f"retrieval parameter {name}={value} outside [{lo}, {hi}] "
                    "(pass the override flag to experiment)"
                )
        return self


@dataclass
class QuestionAnalysis:
    question: str
    language: str
    triples: List[Triple]
    question_embedding: List[float]
    entity_name_embeddings: List[Tuple[str, List[float]]]


@dataclass
class RelationshipHit:
    rel_id: str
    name: str
    source: str
    target: str
    direction: str  # "outgoing" | "incoming"
    score: float


@dataclass
class ChunkHit:
    chunk_id: str
    uri: str
    content: str
    score: float


@dataclass
class RetrievalContext:
    matched_entities: List[Tuple[str, str, float]]  # (node id, name, score)
    relationships: List[RelationshipHit] = field(default_factory=list)
    chunks: List[ChunkHit] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.matched_entities


def parse_question(question: str, language: str, chat, embedder,
                   guidance: Optional[ExtractionGuidance] = None) -> QuestionAnalysis:
    """One chat call (triple extraction on the question) plus one embedding
    batch covering the question and every extracted entity name."""
    if not question:
        raise ValueError("question must be nonempty")
    pseudo = Chunk(chunk_id="", doc_id="", index=0, content=question, char_span=(0, len(question)))
    triples = extract_triples(pseudo, chat, guidance)
    names: List[str] = []
    for t in triples:
        for name in (t.head, t.tail):
            if name and name not in names:
                names.append(name)
    vectors = embedder.embed([question] + names)
    return QuestionAnalysis(
        question=question,
        language=language,
        triples=triples,
        question_embedding=vectors[0],
        entity_name_embeddings=list(zip(names, vectors[1:])),
    )


def match_entities(analysis: QuestionAnalysis, index: EmbeddingIndex,
                   params: RetrievalParams) -> List[ScoredId]:
    """Entity score = max similarity against the question embedding and every
    extracted entity-name embedding; then threshold and keep the top k."""
    scored = []
    for nid, vec in index.vectors.items():
        best = cosine(analysis.question_embedding, vec)
        for _, name_vec in analysis.entity_name_embeddings:
            best = max(best, cosine(name_vec, vec))
        if best >= params.t:
            scored.append(ScoredId(nid, best))
    return rank(scored)[:params.k]


def retrieve_context(analysis: QuestionAnalysis, g: KnowledgeGraph,
                     index: EmbeddingIndex, params: RetrievalParams) -> RetrievalContext:
    matched = match_entities(analysis, index, params)
    if not matched:
        return RetrievalContext(matched_entities=[])

    q = analysis.question_embedding

    def name_score(node) -> float:
        if node.name_embedding is None:
            return 0.0
        return cosine(q, node.name_embedding)

    # Relationship expansion: union over matched entities, ranked globally by
    # similarity of the relationship name to the question.
    rel_hits: Dict[Tuple[str, str], RelationshipHit] = {}
    for direction, limit in (("outgoing", params.o), ("incoming", params.i)):
        for ent in matched:
            for rel, other in g.neighbors(ent.id, direction, limit=len(g.nodes)):
                key = (rel.id, direction)
                if key in rel_hits:
                    continue
                ent_name = g.nodes[ent.id].name
                source, target = (
                    (ent_name, other.name) if direction == "outgoing" else (other.name, ent_name)
                )
                rel_hits[key] = RelationshipHit(
                    rel_id=rel.id, name=rel.name, source=source, target=target,
                    direction=direction, score=name_score(rel),
                )
    outgoing = sorted((h for h in rel_hits.values() if h.direction == "outgoing"),
                      key=lambda h: (-h.score, h.rel_id))[:params.o]
    incoming = sorted((h for h in rel_hits.values() if h.direction == "incoming"),
                      key=lambda h: (-h.score, h.rel_id))[:params.i]

    # Chunk expansion from matched entities plus the selected relationships.
    sources = [e.id for e in matched] + [h.rel_id for h in outgoing + incoming]
    chunk_scores = {}
    for node in g.chunks_for(sources, limit=len(g.nodes)):
        chunk_scores[node.id] = (
            cosine(q, node.content_embedding) if node.content_embedding is not None else 0.0
        )
    chunk_nodes = g.chunks_for(sources, limit=params.c, scores=chunk_scores)

    return RetrievalContext(
        matched_entities=[(e.id, g.nodes[e.id].name, e.score) for e in matched],
        relationships=outgoing + incoming,
        chunks=[
            ChunkHit(
                chunk_id=n.id,
                uri=str(n.properties.get("uri", "")),
                content=n.content,
                score=chunk_scores[n.id],
            )
            for n in chunk_nodes
        ],
    )


def _escape(cell: str) -> str:
    return cell.replace("\\", "\\\\").replace("|", "\\|").replace("\n", "\\n")


def _unescape(cell: str) -> str:
    out = []
    i = 0
    while i < len(cell):
        ch = cell[i]
        if ch == "\\" and i + 1 < len(cell):
            nxt = cell[i + 1]
            out.append({"\\": "\\", "|": "|", "n": "\n"}.get(nxt, nxt))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def serialize_context(ctx: RetrievalContext) -> str:
    """Three labeled pipe-delimited tables; row order matches the context."""
    if ctx.empty:
        raise ValueError("cannot serialize an empty retrieval context")
    lines = ["-----Entities-----", "name|score"]
    for _, name, score in ctx.matched_entities:
        lines.append(f"{_escape(name)}|{score:.6f}")
    lines.append("-----Relationships-----")
    lines.append("source|relation|target|direction|score")
    for h in ctx.relationships:
        lines.append(
            f"{_escape(h.source)}|{_escape(h.name)}|{_escape(h.target)}|{h.direction}|{h.score:.6f}"
        )
    lines.append("-----Sources-----")
    lines.append("uri|content")
    for ch in ctx.chunks:
        lines.append(f"{_escape(ch.uri)}|{_escape(ch.content)}")
    return "\n".join(lines)


def parse_context_tables(data: str) -> Dict[str, List[List[str]]]:
    """Inverse of serialize_context, for tests and debugging tooling."""
    tables: Dict[str, List[List[str]]] = {}
    current = None
    for line in data.split("\n"):
        if line.startswith("-----") and line.endswith("-----"):
            current = line.strip("-")
            tables[current] = []
            continue
        if current is None:
            continue
        row = []
        cell = []
        i = 0
        while i < len(line):
            if line[i] == "\\" and i + 1 < len(line):
                cell.append(line[i:i + 2])
                i += 2
            elif line[i] == "|":
                row.append(_unescape("".join(cell)))
                cell = []
                i += 1
            else:
                cell.append(line[i])
                i += 1
        row.append(_unescape("".join(cell)))
        tables[current].append(row)
    return tables
