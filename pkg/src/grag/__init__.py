"""Graph-based retrieval-augmented generation engine."""

from .engine import Engine, build_graph, build_graph_from_parts, build_entity_index
from .extract import ExtractionGuidance, Triple, extract_triples, filter_by_ontology, normalize_name
from .generation import Answer, answer, answer_llm_only, extract_citations, no_result_response
from .graph import KnowledgeGraph, UserMetadata, init_ontology
from .index import EmbeddingIndex, cosine, top_k
from .ingest import Chunk, ChunkingParams, SourceDocument, chunk_text, clean_document
from .providers import (MockChatProvider, MockEmbeddingProvider, ProviderUsage,
                        RemoteChatProvider, RemoteEmbeddingProvider)
from .retrieval import (QuestionAnalysis, RetrievalContext, RetrievalParams,
                        match_entities, parse_question, retrieve_context, serialize_context)

__version__ = "0.1.0"
