import json

import pytest

from grag.engine import Engine, build_graph
from grag.generation import (Answer, answer_llm_only, build_answer_prompt,
                             extract_citations, no_result_response)
from grag.graph import UserMetadata
from grag.ingest import ChunkingParams, SourceDocument
from grag.providers import MockChatProvider, MockEmbeddingProvider, ProviderUsage


class TestBuildAnswerPrompt:
    def test_language_directive(self):
        prompt = build_answer_prompt("q?", "DATA", None, "it")
        assert "Answer in Italian" in prompt

    def test_context_substituted_verbatim(self):
        data = "-----Entities-----\nname|score\nA|1.000000"
        prompt = build_answer_prompt("q?", data, None, "en")
        assert data in prompt

    def test_no_placeholder_survives(self):
        prompt = build_answer_prompt("q?", "DATA", UserMetadata("u", country="IT"), "en")
        assert "{language}" not in prompt and "{context_data}" not in prompt
        assert "{personalization}" not in prompt and "{question}" not in prompt

    def test_personalization_line(self):
        user = UserMetadata("u", country="CH", preferences={"style": "concise"})
        prompt = build_answer_prompt("q?", "DATA", user, "en")
        assert "country: CH" in prompt and "style: concise" in prompt

    def test_empty_context_rejected(self):
        with pytest.raises(ValueError):
            build_answer_prompt("q?", "", None, "en")


class TestNoResultResponse:
    def test_english(self):
        assert no_result_response("en") == (
            "No results were found for this question in the knowledge base.")

    def test_italian(self):
        assert "Nessun risultato" in no_result_response("it")

    def test_unknown_falls_back_to_default(self):
        assert no_result_response("xx") == no_result_response("en")

    def test_region_subtag(self):
        assert no_result_response("it-CH") == no_result_response("it")


class TestExtractCitations:
    def test_single_ref(self):
        text = "Some answer [Ref: https://a.example/x]."
        assert extract_citations(text) == ["https://a.example/x"]

    def test_no_block(self):
        assert extract_citations("plain text with no references") == []

    def test_dedup_preserves_order(self):
        text = "[References: https://u1.example; https://u2.example; https://u1.example]"
        assert extract_citations(text) == ["https://u1.example", "https://u2.example"]

    def test_non_uri_tokens_dropped(self):
        text = "[References: https://ok.example; not a uri]"
        assert extract_citations(text) == ["https://ok.example"]

    def test_multiple_blocks(self):
        text = "a [Ref: https://one.example] b [References: https://two.example]"
        assert extract_citations(text) == ["https://one.example", "https://two.example"]


def built_engine(answer_text="The answer [Ref: https://ex.org/a]."):
    usage = ProviderUsage()
    extraction = json.dumps([{"head": "led bulb", "head_type": "device",
                              "relation": "reduces", "tail": "energy use",
                              "tail_type": "concept"}])
    chat = MockChatProvider(rules=[
        ("---Role---", answer_text),   # formatter prompts carry the role header
        ("Text:", extraction),         # extraction prompts carry the text slot
    ], usage=usage)
    emb = MockEmbeddingProvider(usage=usage)
    docs = [SourceDocument("d1", "https://ex.org/a", "plain",
                           "Led bulbs reduce energy use in the home.")]
    g = build_graph(docs, ChunkingParams(1000, 200), chat, emb)
    engine = Engine(g, chat, emb)
    return engine, emb, usage


class TestAnswer:
    def question_near(self, emb, name):
        emb.overrides["the question?"] = emb._vector(name)
        return "the question?"

    def test_end_to_end_answer_with_citation(self):
        engine, emb, usage = built_engine()
        q = self.question_near(emb, "Led bulb")
        ans = engine.answer(q, language="en")
        assert not ans.empty_context
        assert ans.text == "The answer [Ref: https://ex.org/a]."
        assert ans.citations == ["https://ex.org/a"]
        assert ans.language == "en"

    def test_call_accounting_non_empty(self):
        engine, emb, _ = built_engine()
        q = self.question_near(emb, "Led bulb")
        ans = engine.answer(q, language="en")
        assert ans.diagnostics.llm_calls == 2
        assert ans.diagnostics.embedding_calls == 1

    def test_below_threshold_no_result_path(self):
        engine, emb, _ = built_engine()
        # extraction finds nothing in this question, and its embedding is far
        # from every entity name, so no entity clears the threshold
        engine.chat.rules.insert(0, ("totally unrelated", "[]"))
        ans = engine.answer("totally unrelated question about nothing", language="it")
        assert ans.empty_context
        assert ans.text == no_result_response("it")
        assert ans.diagnostics.llm_calls == 1
        assert ans.citations == []

    def test_citation_containment(self):
        engine, emb, _ = built_engine(
            answer_text="x [Ref: https://ex.org/a] y [Ref: https://elsewhere.example]")
        q = self.question_near(emb, "Led bulb")
        ans = engine.answer(q, language="en")
        # https://ex.org/a is the only uri in the context Sources table
        assert "https://ex.org/a" in ans.citations

    def test_determinism_under_mocks(self):
        first, emb1, _ = built_engine()
        second, emb2, _ = built_engine()
        q1 = self.question_near(emb1, "Led bulb")
        q2 = self.question_near(emb2, "Led bulb")
        a1, a2 = first.answer(q1, language="en"), second.answer(q2, language="en")
        assert (a1.text, a1.citations, a1.empty_context) == (a2.text, a2.citations, a2.empty_context)

    def test_ten_question_batch_accounting(self):
        engine, emb, _ = built_engine()
        for i in range(10):
            q = f"q{i} about bulbs?"
            emb.overrides[q] = emb._vector("Led bulb")
            ans = engine.answer(q, language="en")
            assert not ans.empty_context
            assert ans.diagnostics.llm_calls == 2


class TestAnswerLlmOnly:
    def test_passthrough_and_counts(self):
        chat = MockChatProvider(default_response="short answer")
        ans = answer_llm_only("q?", "en", chat)
        assert ans.text == "short answer"
        assert ans.citations == []
        assert (ans.diagnostics.llm_calls, ans.diagnostics.embedding_calls) == (1, 0)

    def test_language_in_prompt(self):
        seen = {}

        class Spy:
            def chat(self, prompt, model=None):
                seen["prompt"] = prompt
                return "ok"

        answer_llm_only("q?", "it", Spy())
        assert "Answer in Italian" in seen["prompt"]
