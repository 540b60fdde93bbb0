"""HTTP surface: querying, user metadata, ingestion/build jobs, statistics.

Graph builds run on a single background worker and commit by atomically
swapping the engine, so queries never observe a half-built graph.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .config import ServiceConfig, make_providers
from .engine import Engine, build_graph_from_parts, extract_corpus_triples, attach_corpus_embeddings
from .graph import KnowledgeGraph, UserMetadata, init_ontology
from .ingest import Chunk, SourceDocument, chunk_document
from .providers import ProviderError


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, retryable: bool = False):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.retryable = retryable


class QueryRequest(BaseModel):
    question: str
    user_id: Optional[str] = None
    language: Optional[str] = None


class UserMetadataBody(BaseModel):
    language: str = ""
    country: str = ""
    preferences: Dict[str, str] = {}


class DocumentRecord(BaseModel):
    doc_id: str
    uri: str = ""
    format: str = "plain"
    text: str = ""
    language: str = "en"


class DocumentsBody(BaseModel):
    documents: List[DocumentRecord]


@dataclass
class Job:
    id: str
    kind: str
    status: str = "queued"  # queued -> running -> done | error
    progress: Dict[str, int] = field(default_factory=dict)
    error: str = ""


class ServiceState:
    def __init__(self, config: ServiceConfig, chat=None, embedder=None):
        self.config = config
        if chat is None or embedder is None:
            chat, embedder = make_providers(config.provider)
        self.chat = chat
        self.embedder = embedder
        self.engine: Optional[Engine] = None
        self.users = init_ontology()  # user tables live here until a graph is committed
        self.documents: List[SourceDocument] = []
        self.chunks: List[Chunk] = []
        self.jobs: Dict[str, Job] = {}
        self.worker_lock = threading.Lock()

    @property
    def user_store(self) -> KnowledgeGraph:
        return self.engine.graph if self.engine else self.users

    def load_graph(self, graph: KnowledgeGraph) -> None:
        # Carry user tables forward, then swap atomically.
        for user in self.user_store.users.values():
            graph.set_user_metadata(user)
        self.engine = Engine(graph, self.chat, self.embedder,
                             params=self.config.retrieval,
                             default_language=self.config.default_language)


def create_app(config: Optional[ServiceConfig] = None, chat=None, embedder=None,
               graph: Optional[KnowledgeGraph] = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="grag")
    state = ServiceState(config, chat=chat, embedder=embedder)
    if graph is not None:
        state.load_graph(graph)
    app.state.grag = state

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": exc.message, "retryable": exc.retryable},
        )

    @app.middleware("http")
    async def request_id_header(request: Request, call_next):
        response = await call_next(request)
        response.headers["X-Request-Id"] = request.headers.get("X-Request-Id", uuid.uuid4().hex)
        return response

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "graph_loaded": state.engine is not None,
            "provider_kind": getattr(state.chat, "kind", "unknown"),
        }

    @app.post("/query")
    def query(body: QueryRequest):
        if not body.question.strip():
            raise ApiError(400, "empty_question", "question must be nonempty")
        if state.engine is None:
            raise ApiError(503, "graph_not_loaded", "no knowledge graph is loaded")
        try:
            ans = state.engine.answer(body.question, language=body.language,
                                      user_id=body.user_id)
        except ProviderError as exc:
            raise ApiError(502, "provider_failure", str(exc), retryable=exc.retryable)
        return {
            "answer": ans.text,
            "citations": ans.citations,
            "language": ans.language,
            "empty_context": ans.empty_context,
            "diagnostics": {
                "llm_calls": ans.diagnostics.llm_calls,
                "embedding_calls": ans.diagnostics.embedding_calls,
                "embedded_texts": ans.diagnostics.embedded_texts,
                "wall_time": ans.diagnostics.wall_time,
            },
        }

    @app.put("/users/{user_id}/metadata", status_code=204)
    def put_user(user_id: str, body: UserMetadataBody):
        if not user_id:
            raise ApiError(400, "empty_user_id", "user id must be nonempty")
        state.user_store.set_user_metadata(UserMetadata(
            user_id=user_id, language=body.language, country=body.country,
            preferences=dict(body.preferences),
        ))

    @app.get("/users/{user_id}/metadata")
    def get_user(user_id: str):
        meta = state.user_store.get_user_metadata(user_id)
        if meta is None:
            raise ApiError(404, "unknown_user", f"no metadata for user {user_id!r}")
        return {"language": meta.language, "country": meta.country,
                "preferences": meta.preferences}

    def _start_job(kind: str, work) -> Job:
        job = Job(id=uuid.uuid4().hex, kind=kind)
        state.jobs[job.id] = job

        def run():
            with state.worker_lock:
                job.status = "running"
                try:
                    work(job)
                    job.status = "done"
                except Exception as exc:
                    job.status = "error"
                    job.error = str(exc)

        threading.Thread(target=run, daemon=True).start()
        return job

    @app.post("/documents", status_code=202)
    def post_documents(body: DocumentsBody):
        docs = [SourceDocument(doc_id=d.doc_id, uri=d.uri, format=d.format,
                               raw=d.text, language=d.language)
                for d in body.documents]

        def work(job: Job):
            chunks = []
            for n, doc in enumerate(docs, 1):
                chunks.extend(chunk_document(doc, state.config.chunking))
                job.progress = {"documents": n, "chunks": len(chunks)}
            state.documents.extend(docs)
            state.chunks.extend(chunks)

        return {"job_id": _start_job("ingest", work).id}

    @app.post("/kg/build", status_code=202)
    def build_kg():
        if any(j.kind == "build" and j.status in ("queued", "running")
               for j in state.jobs.values()):
            raise ApiError(409, "build_running", "a graph build is already in progress")

        def work(job: Job):
            triples = extract_corpus_triples(
                state.chunks, state.chat,
                progress=lambda done, total: job.progress.update(
                    {"chunks_processed": done, "chunks_total": total}),
            )
            job.progress["triples_extracted"] = len(triples)
            g = build_graph_from_parts(state.documents, state.chunks, triples)
            attach_corpus_embeddings(g, state.embedder)
            if state.config.graph_path:
                g.save(state.config.graph_path)
            state.load_graph(g)

        return {"job_id": _start_job("build", work).id}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise ApiError(404, "unknown_job", f"no job {job_id!r}")
        return {"id": job.id, "kind": job.kind, "status": job.status,
                "progress": job.progress, "error": job.error}

    @app.get("/graph/stats")
    def graph_stats():
        if state.engine is None:
            raise ApiError(503, "graph_not_loaded", "no knowledge graph is loaded")
        return state.engine.graph.stats()

    return app
