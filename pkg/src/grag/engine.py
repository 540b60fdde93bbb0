"""End-to-end wiring: corpus -> graph -> index -> answers."""

from __future__ import annotations

from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import generation
from .extract import ExtractionGuidance, Triple, extract_triples
from .graph import KnowledgeGraph, UserMetadata, init_ontology
from .index import EmbeddingIndex
from .ingest import Chunk, ChunkingParams, SourceDocument, chunk_document, clean_document
from .retrieval import RetrievalParams

EMBED_BATCH_SIZE = 128


def extract_corpus_triples(chunks: Sequence[Chunk], chat,
                           guidance: Optional[ExtractionGuidance] = None,
                           progress=None) -> List[Triple]:
    triples: List[Triple] = []
    for n, chunk in enumerate(chunks, 1):
        if chunk.content:
            triples.extend(extract_triples(chunk, chat, guidance))
        if progress:
            progress(n, len(chunks))
    return triples


def attach_corpus_embeddings(g: KnowledgeGraph, embedder) -> None:
    """Embed entity/relationship names and chunk contents in stable order."""
    targets: List[Tuple[str, str, str]] = []  # (node id, field, text)
    for nid in sorted(g.nodes):
        node = g.nodes[nid]
        if node.kind in ("Entity", "Relationship") and node.name:
            targets.append((nid, "name", node.name))
        elif node.kind == "Chunk" and node.content:
            targets.append((nid, "content", node.content))
    for i in range(0, len(targets), EMBED_BATCH_SIZE):
        batch = targets[i:i + EMBED_BATCH_SIZE]
        vectors = embedder.embed([text for _, _, text in batch])
        for (nid, fieldname, _), vec in zip(batch, vectors):
            g.attach_embedding(nid, fieldname, vec)


def build_graph_from_parts(documents: Sequence[SourceDocument],
                           chunks: Sequence[Chunk],
                           triples: Iterable[Triple],
                           embedder=None) -> KnowledgeGraph:
    g = init_ontology()
    uris = {d.doc_id: d.uri for d in documents}
    for doc in documents:
        g.add_document(doc)
    for chunk in chunks:
        g.add_chunk(chunk, uri=uris.get(chunk.doc_id, ""))
    for t in triples:
        g.upsert_triple(t)
    if embedder is not None:
        attach_corpus_embeddings(g, embedder)
    return g


def build_graph(documents: Sequence[SourceDocument], chunking: ChunkingParams,
                chat, embedder, guidance: Optional[ExtractionGuidance] = None,
                progress=None) -> KnowledgeGraph:
    """Whole construction pipeline: clean, chunk, extract, upsert, embed."""
    all_chunks: List[Chunk] = []
    for doc in documents:
        all_chunks.extend(chunk_document(doc, chunking))
    triples = extract_corpus_triples(all_chunks, chat, guidance, progress=progress)
    return build_graph_from_parts(documents, all_chunks, triples, embedder)


def build_entity_index(g: KnowledgeGraph) -> EmbeddingIndex:
    return EmbeddingIndex({
        n.id: n.name_embedding for n in g.entities() if n.name_embedding is not None
    })


class Engine:
    """A built graph plus providers, ready to answer questions."""

    def __init__(self, graph: KnowledgeGraph, chat, embedder,
                 params: Optional[RetrievalParams] = None,
                 default_language: str = generation.DEFAULT_LANGUAGE):
        self.graph = graph
        self.chat = chat
        self.embedder = embedder
        self.params = params or RetrievalParams()
        self.default_language = default_language
        self.index = build_entity_index(graph)

    def resolve_language(self, requested: Optional[str], user: Optional[UserMetadata]) -> str:
        """Precedence: request field > stored user metadata > config default."""
        if requested:
            return requested
        if user and user.language:
            return user.language
        return self.default_language

    def answer(self, question: str, language: Optional[str] = None,
               user_id: Optional[str] = None) -> generation.Answer:
        user = self.graph.get_user_metadata(user_id) if user_id else None
        lang = self.resolve_language(language, user)
        return generation.answer(question, user, self.graph, self.index,
                                 self.chat, self.embedder, self.params, language=lang)

    def answer_llm_only(self, question: str, language: Optional[str] = None) -> generation.Answer:
        return generation.answer_llm_only(question, language or self.default_language, self.chat)
