import pytest

from grag.config import (ProviderConfig, ServiceConfig, load_config,
                         make_providers)
from grag.ingest import ChunkingParams
from grag.providers import MockChatProvider, RemoteChatProvider
from grag.retrieval import RetrievalParams


class TestDefaults:
    def test_retrieval_defaults(self):
        cfg = load_config(None, env={})
        p = cfg.retrieval
        assert (p.k, p.t, p.o, p.i, p.c) == (12, 0.5, 10, 10, 5)

    def test_chunking_defaults(self):
        cfg = load_config(None, env={})
        assert cfg.chunking.chunk_size == 1000
        assert cfg.chunking.chunk_overlap == 200

    def test_service_defaults(self):
        cfg = load_config(None, env={})
        assert cfg.host == "127.0.0.1" and cfg.port == 8080
        assert cfg.default_language == "en"
        assert cfg.provider.kind == "mock"


class TestYamlLoading:
    def test_nested_sections(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text(
            "port: 9001\n"
            "default_language: it\n"
            "retrieval:\n  k: 8\n  t: 0.6\n"
            "chunking:\n  chunk_size: 500\n  chunk_overlap: 50\n"
            "provider:\n  kind: mock\n  mock_dim: 4\n"
        )
        cfg = load_config(str(path), env={})
        assert cfg.port == 9001 and cfg.default_language == "it"
        assert cfg.retrieval.k == 8 and cfg.retrieval.t == 0.6
        assert cfg.chunking.chunk_size == 500
        assert cfg.provider.mock_dim == 4

    def test_out_of_range_rejected(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("retrieval:\n  k: 99\n")
        with pytest.raises(ValueError, match="k=99"):
            load_config(str(path), env={})

    def test_out_of_range_with_explicit_override(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("retrieval:\n  k: 99\nallow_out_of_range: true\n")
        assert load_config(str(path), env={}).retrieval.k == 99

    def test_empty_file(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("")
        assert load_config(str(path), env={}).port == 8080


class TestEnvOverrides:
    def test_scalar_and_nested(self):
        env = {"GRAG_PORT": "7070", "GRAG_DEFAULT_LANGUAGE": "de",
               "GRAG_PROVIDER_KIND": "remote",
               "GRAG_PROVIDER_BASE_URL": "https://llm.example"}
        cfg = load_config(None, env=env)
        assert cfg.port == 7070
        assert cfg.default_language == "de"
        assert cfg.provider.kind == "remote"
        assert cfg.provider.base_url == "https://llm.example"

    def test_env_beats_file(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("port: 9001\n")
        assert load_config(str(path), env={"GRAG_PORT": "1234"}).port == 1234


class TestProviders:
    def test_remote_requires_base_url(self):
        with pytest.raises(ValueError, match="base_url"):
            ProviderConfig(kind="remote")

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            ProviderConfig(kind="wat")

    def test_mock_script_rules(self, tmp_path):
        script = tmp_path / "script.json"
        script.write_text('[{"match": "hello", "response": "world"}]')
        chat, emb = make_providers(ProviderConfig(kind="mock", mock_script=str(script)))
        assert isinstance(chat, MockChatProvider)
        assert chat.chat("well hello there") == "world"

    def test_unscripted_mock_answers_empty_list(self):
        chat, _ = make_providers(ProviderConfig(kind="mock"))
        assert chat.chat("anything") == "[]"

    def test_remote_pair(self):
        chat, emb = make_providers(ProviderConfig(kind="remote",
                                                  base_url="https://llm.example"))
        assert isinstance(chat, RemoteChatProvider)
        assert chat.usage is emb.usage

    def test_shared_usage_counter(self):
        chat, emb = make_providers(ProviderConfig(kind="mock"))
        chat.chat("x")
        emb.embed(["a"])
        assert chat.usage.snapshot() == (1, 1, 1)
