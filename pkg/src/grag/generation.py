"""Answer formatting: build the final prompt, produce cited answers in the
user's language, handle the no-result path, and the retrieval-free mode."""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import List, Optional
from urllib.parse import urlparse

from .graph import KnowledgeGraph, UserMetadata
from .index import EmbeddingIndex
from .retrieval import (QuestionAnalysis, RetrievalParams, parse_question,
                        retrieve_context, serialize_context)

DEFAULT_LANGUAGE = "en"

LANGUAGE_NAMES = {
    "en": "English",
    "it": "Italian",
    "de": "German",
    "fr": "French",
    "es": "Spanish",
}

_CITATION_BLOCK = re.compile(r"\[(?:References|Ref):\s*([^\]]*)\]")


class TemplateError(ValueError):
    pass


@dataclass
class Diagnostics:
    llm_calls: int = 0
    embedding_calls: int = 0
    embedded_texts: int = 0
    wall_time: float = 0.0


@dataclass
class Answer:
    text: str
    citations: List[str]
    language: str
    empty_context: bool
    diagnostics: Diagnostics = field(default_factory=Diagnostics)


_ANSWER_TEMPLATE = None
_NO_RESULTS = None


def _answer_template() -> str:
    global _ANSWER_TEMPLATE
    if _ANSWER_TEMPLATE is None:
        _ANSWER_TEMPLATE = resources.files("grag.assets").joinpath(
            "answer_prompt.txt").read_text(encoding="utf-8")
    return _ANSWER_TEMPLATE


def _no_results_table() -> dict:
    global _NO_RESULTS
    if _NO_RESULTS is None:
        _NO_RESULTS = json.loads(resources.files("grag.assets").joinpath(
            "no_results.json").read_text(encoding="utf-8"))
    return _NO_RESULTS


def language_name(tag: str) -> str:
    base = tag.split("-")[0].lower() if tag else DEFAULT_LANGUAGE
    return LANGUAGE_NAMES.get(base, tag)


def build_answer_prompt(question: str, context_data: str,
                        user: Optional[UserMetadata], language: str) -> str:
    """Instantiate the formatter template; no placeholder may survive."""
    if not context_data:
        raise ValueError("context_data must be nonempty")
    personalization = ""
    if user and (user.country or user.preferences):
        bits = []
        if user.country:
            bits.append(f"country: {user.country}")
        for key, value in sorted((user.preferences or {}).items()):
            bits.append(f"{key}: {value}")
        personalization = "Tailor the answer to this user (" + ", ".join(bits) + ").\n"
    prompt = (
        _answer_template()
        .replace("{personalization}", personalization)
        .replace("{language}", language_name(language))
        .replace("{context_data}", context_data)
        .replace("{question}", question)
    )
    leftover = re.search(r"\{[a-z_]+\}", prompt)
    if leftover:
        raise TemplateError(f"unresolved placeholder {leftover.group(0)} in answer prompt")
    return prompt


def no_result_response(language: str) -> str:
    """Fixed localized template; unknown languages fall back to the default."""
    table = _no_results_table()
    base = language.split("-")[0].lower() if language else DEFAULT_LANGUAGE
    return table.get(base, table[DEFAULT_LANGUAGE])


def extract_citations(text: str) -> List[str]:
    """URIs from bracketed [References: ...] / [Ref: ...] blocks, deduplicated
    in first-occurrence order; non-URI tokens are dropped."""
    seen = []
    for block in _CITATION_BLOCK.findall(text):
        for token in block.split(";"):
            token = token.strip().rstrip(".,")
            if not token or token in seen:
                continue
            parsed = urlparse(token)
            if parsed.scheme and (parsed.netloc or parsed.path):
                seen.append(token)
    return seen


def answer(question: str, user: Optional[UserMetadata], g: KnowledgeGraph,
           index: EmbeddingIndex, chat, embedder, params: RetrievalParams,
           language: Optional[str] = None) -> Answer:
    """Full pipeline: parse -> retrieve -> format (or the no-result path)."""
    start = time.perf_counter()
    lang = language or (user.language if user and user.language else DEFAULT_LANGUAGE)
    usage = getattr(chat, "usage", None)
    before = usage.snapshot() if usage else (0, 0, 0)

    analysis = parse_question(question, lang, chat, embedder)
    ctx = retrieve_context(analysis, g, index, params)
    if ctx.empty:
        text = no_result_response(lang)
        citations: List[str] = []
    else:
        prompt = build_answer_prompt(question, serialize_context(ctx), user, lang)
        text = chat.chat(prompt)
        citations = extract_citations(text)

    diag = Diagnostics(wall_time=time.perf_counter() - start)
    if usage is not None and getattr(embedder, "usage", None) is usage:
        after = usage.snapshot()
        diag.llm_calls = after[0] - before[0]
        diag.embedding_calls = after[1] - before[1]
        diag.embedded_texts = after[2] - before[2]
    else:
        diag.llm_calls = 1 if ctx.empty else 2
        diag.embedding_calls = 1
    return Answer(text=text, citations=citations, language=lang,
                  empty_context=ctx.empty, diagnostics=diag)


def answer_llm_only(question: str, language: str, chat) -> Answer:
    """Retrieval-free mode: a single minimal QA chat call, no citations."""
    start = time.perf_counter()
    prompt = f"{question}\nAnswer in {language_name(language)}."
    text = chat.chat(prompt)
    diag = Diagnostics(llm_calls=1, embedding_calls=0, embedded_texts=0,
                       wall_time=time.perf_counter() - start)
    return Answer(text=text, citations=[], language=language,
                  empty_context=False, diagnostics=diag)
