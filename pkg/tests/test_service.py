import json
import threading
import time

import pytest
from fastapi.testclient import TestClient

from grag.config import ProviderConfig, ServiceConfig
from grag.engine import build_graph
from grag.ingest import ChunkingParams, SourceDocument
from grag.providers import (MockChatProvider, MockEmbeddingProvider,
                            ProviderError, ProviderUsage)
from grag.service import create_app

EXTRACTION = json.dumps([{"head": "led bulb", "head_type": "device",
                          "relation": "reduces", "tail": "energy use",
                          "tail_type": "concept"}])


def providers(answer_text="The answer [Ref: https://ex.org/a]."):
    usage = ProviderUsage()
    chat = MockChatProvider(rules=[
        ("---Role---", answer_text),
        ("Text:", EXTRACTION),
    ], usage=usage)
    emb = MockEmbeddingProvider(usage=usage)
    return chat, emb


def loaded_client(**config_kw):
    chat, emb = providers()
    docs = [SourceDocument("d1", "https://ex.org/a", "plain",
                           "Led bulbs reduce energy use in the home.")]
    g = build_graph(docs, ChunkingParams(1000, 200), chat, emb)
    app = create_app(ServiceConfig(**config_kw), chat=chat, embedder=emb, graph=g)
    client = TestClient(app, raise_server_exceptions=False)
    emb.overrides["good question?"] = emb._vector("Led bulb")
    return client, chat, emb


def empty_client(**config_kw):
    chat, emb = providers()
    app = create_app(ServiceConfig(**config_kw), chat=chat, embedder=emb)
    return TestClient(app, raise_server_exceptions=False), chat, emb


def wait_job(client, job_id, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        job = client.get(f"/jobs/{job_id}").json()
        if job["status"] in ("done", "error"):
            return job
        time.sleep(0.01)
    raise AssertionError(f"job {job_id} did not finish: {job}")


class TestHealth:
    def test_reports_graph_state(self):
        client, _, _ = empty_client()
        body = client.get("/health").json()
        assert body["status"] == "ok" and body["graph_loaded"] is False
        assert body["provider_kind"] == "mock"

    def test_request_id_echoed(self):
        client, _, _ = empty_client()
        r = client.get("/health", headers={"X-Request-Id": "req-42"})
        assert r.headers["X-Request-Id"] == "req-42"

    def test_request_id_generated(self):
        client, _, _ = empty_client()
        assert client.get("/health").headers["X-Request-Id"]


class TestQuery:
    def test_golden_answer(self):
        client, _, _ = loaded_client()
        r = client.post("/query", json={"question": "good question?", "language": "en"})
        assert r.status_code == 200
        body = r.json()
        assert body["answer"] == "The answer [Ref: https://ex.org/a]."
        assert body["citations"] == ["https://ex.org/a"]
        assert body["empty_context"] is False
        assert body["diagnostics"]["llm_calls"] == 2
        assert body["diagnostics"]["embedding_calls"] == 1

    def test_empty_question_400(self):
        client, _, _ = loaded_client()
        r = client.post("/query", json={"question": "   "})
        assert r.status_code == 400
        body = r.json()
        assert body["code"] == "empty_question" and body["retryable"] is False

    def test_no_graph_503(self):
        client, _, _ = empty_client()
        r = client.post("/query", json={"question": "q?"})
        assert r.status_code == 503
        assert r.json()["code"] == "graph_not_loaded"

    def test_provider_failure_502(self):
        client, chat, _ = loaded_client()
        chat.rules = []
        chat.default_response = None  # every prompt is now a script gap
        r = client.post("/query", json={"question": "good question?"})
        assert r.status_code == 502
        body = r.json()
        assert body["code"] == "provider_failure"
        assert isinstance(body["retryable"], bool)

    def test_user_language_applied(self):
        client, _, _ = loaded_client()
        client.put("/users/u1/metadata", json={"language": "it", "country": "IT"})
        r = client.post("/query", json={"question": "good question?", "user_id": "u1"})
        assert r.json()["language"] == "it"

    def test_request_language_beats_user(self):
        client, _, _ = loaded_client()
        client.put("/users/u1/metadata", json={"language": "it"})
        r = client.post("/query", json={"question": "good question?",
                                        "user_id": "u1", "language": "de"})
        assert r.json()["language"] == "de"


class TestUserMetadata:
    def test_put_then_get(self):
        client, _, _ = empty_client()
        r = client.put("/users/u9/metadata", json={
            "language": "it", "country": "CH", "preferences": {"style": "short"}})
        assert r.status_code == 204
        body = client.get("/users/u9/metadata").json()
        assert body == {"language": "it", "country": "CH",
                        "preferences": {"style": "short"}}

    def test_unknown_user_404(self):
        client, _, _ = empty_client()
        r = client.get("/users/ghost/metadata")
        assert r.status_code == 404
        assert r.json()["code"] == "unknown_user"

    def test_put_overwrites(self):
        client, _, _ = empty_client()
        client.put("/users/u/metadata", json={"language": "it"})
        client.put("/users/u/metadata", json={"language": "de"})
        assert client.get("/users/u/metadata").json()["language"] == "de"


class TestJobs:
    DOCS = {"documents": [{"doc_id": "d1", "uri": "https://ex.org/a", "format": "plain",
                           "text": "Led bulbs reduce energy use in the home."}]}

    def test_unknown_job_404(self):
        client, _, _ = empty_client()
        assert client.get("/jobs/nope").status_code == 404

    def test_ingest_job_completes(self):
        client, _, _ = empty_client()
        r = client.post("/documents", json=self.DOCS)
        assert r.status_code == 202
        job = wait_job(client, r.json()["job_id"])
        assert job["status"] == "done" and job["kind"] == "ingest"
        assert job["progress"] == {"documents": 1, "chunks": 1}

    def test_documents_then_build_then_query(self, tmp_path):
        graph_path = str(tmp_path / "kb.jsonl")
        client, chat, emb = empty_client(graph_path=graph_path)
        wait_job(client, client.post("/documents", json=self.DOCS).json()["job_id"])
        job = wait_job(client, client.post("/kg/build").json()["job_id"])
        assert job["status"] == "done"
        assert job["progress"]["triples_extracted"] == 1
        assert client.get("/health").json()["graph_loaded"] is True
        stats = client.get("/graph/stats").json()
        assert stats["entities"] == 2 and stats["relationships"] == 1
        emb.overrides["good question?"] = emb._vector("Led bulb")
        r = client.post("/query", json={"question": "good question?"})
        assert r.json()["citations"] == ["https://ex.org/a"]
        # the committed graph was also persisted
        assert (tmp_path / "kb.jsonl").read_text().startswith("graphkb v1")

    def test_users_survive_build(self):
        client, chat, emb = empty_client()
        client.put("/users/u1/metadata", json={"language": "it"})
        wait_job(client, client.post("/documents", json=self.DOCS).json()["job_id"])
        wait_job(client, client.post("/kg/build").json()["job_id"])
        assert client.get("/users/u1/metadata").json()["language"] == "it"

    def test_build_failure_reported(self):
        client, chat, _ = empty_client()
        wait_job(client, client.post("/documents", json=self.DOCS).json()["job_id"])
        chat.rules = []
        chat.default_response = None
        job = wait_job(client, client.post("/kg/build").json()["job_id"])
        assert job["status"] == "error" and job["error"]
        assert client.get("/health").json()["graph_loaded"] is False

    def test_concurrent_build_409(self):
        client, chat, _ = empty_client()
        wait_job(client, client.post("/documents", json=self.DOCS).json()["job_id"])
        release = threading.Event()
        inner = chat.chat

        def slow_chat(prompt, model=None):
            release.wait(timeout=10)
            return inner(prompt, model=model) if model else inner(prompt)

        chat.chat = slow_chat
        first = client.post("/kg/build")
        assert first.status_code == 202
        second = client.post("/kg/build")
        assert second.status_code == 409
        assert second.json()["code"] == "build_running"
        release.set()
        assert wait_job(client, first.json()["job_id"])["status"] == "done"


class TestGraphStats:
    def test_stats_requires_graph(self):
        client, _, _ = empty_client()
        r = client.get("/graph/stats")
        assert r.status_code == 503

    def test_stats_shape(self):
        client, _, _ = loaded_client()
        stats = client.get("/graph/stats").json()
        for key in ("entities", "relationships", "documents", "chunks", "edges"):
            assert isinstance(stats[key], int)
