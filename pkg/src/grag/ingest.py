"""Document cleaning and boundary-aware overlapping chunking."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from html import unescape
from html.parser import HTMLParser
from pathlib import Path
from typing import Iterable, List, Optional, Tuple

from .ids import chunk_key, node_id

# A line that is only a page number, optionally flanked by dashes/whitespace.
# Inline numerals ("art. 38") are untouched because they never fill a line.
_PAGE_NUMBER_LINE = re.compile(r"^[\s\-–—]*\d+[\s\-–—]*$")

# Split-point cascade, highest priority first; a hard character cut is the
# final fallback.  Separators stay attached to the chunk they terminate.
SEPARATOR_CASCADE: Tuple[Tuple[str, ...], ...] = (
    ("\n",),            # paragraph break (cleaning collapses blank runs to one \n)
    (". ", "! ", "? "),  # sentence terminators
    (", ",),
    (" ",),
)

_BLOCK_TAGS = {
    "p", "div", "br", "li", "ul", "ol", "tr", "table", "section", "article",
    "h1", "h2", "h3", "h4", "h5", "h6", "blockquote", "header", "footer",
}


@dataclass
class SourceDocument:
    doc_id: str
    uri: str
    format: str  # "html" | "plain"
    raw: str
    language: str = "en"

    def __post_init__(self):
        if not self.doc_id:
            raise ValueError("doc_id must be nonempty")
        if self.format not in ("html", "plain"):
            raise ValueError(f"unsupported document format: {self.format!r}")


@dataclass
class Chunk:
    chunk_id: str
    doc_id: str
    index: int
    content: str
    char_span: Tuple[int, int]


@dataclass
class ChunkingParams:
    chunk_size: int = 1000
    chunk_overlap: int = 200

    def __post_init__(self):
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        if not 0 <= self.chunk_overlap < self.chunk_size:
            raise ValueError("chunk_overlap must satisfy 0 <= overlap < chunk_size")


class _TagStripper(HTMLParser):
    """Best-effort tag stripping; never raises on malformed markup."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: List[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in ("script", "style"):
            self._skip_depth += 1
        elif tag in _BLOCK_TAGS:
            self.parts.append("\n")

    def handle_endtag(self, tag):
        if tag in ("script", "style"):
            self._skip_depth = max(0, self._skip_depth - 1)
        elif tag in _BLOCK_TAGS:
            self.parts.append("\n")

    def handle_data(self, data):
        if not self._skip_depth:
            self.parts.append(data)


def _normalize_whitespace(text: str, drop_page_numbers: bool) -> str:
    lines = []
    for line in text.replace("\r\n", "\n").replace("\r", "\n").split("\n"):
        line = re.sub(r"[ \t\f\v]+", " ", line).strip()
        if not line:
            continue
        if drop_page_numbers and _PAGE_NUMBER_LINE.match(line):
            continue
        lines.append(line)
    return "\n".join(lines)


def clean_document(doc: SourceDocument) -> str:
    """Strip HTML markup or standalone page-number lines, normalize whitespace.

    Deterministic and idempotent: cleaning a cleaned text is a no-op.
    """
    if doc.format == "html":
        stripper = _TagStripper()
        stripper.feed(doc.raw)
        stripper.close()
        text = unescape("".join(stripper.parts))
        return _normalize_whitespace(text, drop_page_numbers=False)
    return _normalize_whitespace(doc.raw, drop_page_numbers=True)


def _split_point(text: str, start: int, limit: int) -> int:
    """End offset for the chunk starting at `start`, capped at `limit`.

    Takes the last occurrence of the highest-priority separator inside the
    window; falls back to a hard cut at the size limit.
    """
    window = text[start:limit]
    for seps in SEPARATOR_CASCADE:
        best = -1
        for sep in seps:
            idx = window.rfind(sep)
            if idx >= 0:
                best = max(best, idx + len(sep))
        if best > 0:
            return start + best
    return limit


def _next_start(text: str, end: int, overlap: int, prev_start: int) -> int:
    """Start of the chunk following the one that ended at `end`.

    Picks the earliest separator boundary inside the trailing overlap window
    so the overlap stays <= chunk_overlap while landing on a word boundary
    whenever one exists.
    """
    lo = max(end - overlap, 0)
    pick = None
    for seps in SEPARATOR_CASCADE:
        cands = []
        for sep in seps:
            idx = text.find(sep, max(lo - len(sep), 0))
            while idx != -1:
                pos = idx + len(sep)
                if pos > end:
                    break
                if pos >= lo:
                    cands.append(pos)
                    break
                idx = text.find(sep, idx + 1)
        if cands:
            pick = min(cands)
            break
    if pick is None:
        pick = lo
    return max(pick, prev_start + 1)


def chunk_text(text: str, params: ChunkingParams, doc_id: str = "") -> List[Chunk]:
    """Split cleaned text into overlapping chunks on separator boundaries.

    Spans cover the text with no gaps; adjacent chunks share at most
    chunk_overlap characters; every chunk fits in chunk_size.
    """
    if not text:
        return []
    spans: List[Tuple[int, int]] = []
    start = 0
    n = len(text)
    while True:
        if n - start <= params.chunk_size:
            spans.append((start, n))
            break
        end = _split_point(text, start, start + params.chunk_size)
        spans.append((start, end))
        start = _next_start(text, end, params.chunk_overlap, start)
    return [
        Chunk(
            chunk_id=node_id("Chunk", chunk_key(doc_id, i)),
            doc_id=doc_id,
            index=i,
            content=text[a:b],
            char_span=(a, b),
        )
        for i, (a, b) in enumerate(spans)
    ]


def chunk_document(doc: SourceDocument, params: ChunkingParams) -> List[Chunk]:
    return chunk_text(clean_document(doc), params, doc_id=doc.doc_id)


def load_manifest(path) -> List[SourceDocument]:
    """Read a line-delimited corpus manifest.

    Each record carries {doc_id, uri, format, text or path, language}; `path`
    entries are resolved relative to the manifest file.
    """
    base = Path(path).parent
    docs = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad manifest record: {exc}") from exc
            doc_id = rec.get("doc_id", "")
            if doc_id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate doc_id {doc_id!r}")
            seen.add(doc_id)
            if "text" in rec:
                raw = rec["text"]
            elif "path" in rec:
                raw = (base / rec["path"]).read_text(encoding="utf-8")
            else:
                raise ValueError(f"{path}:{lineno}: record needs 'text' or 'path'")
            docs.append(
                SourceDocument(
                    doc_id=doc_id,
                    uri=rec.get("uri", ""),
                    format=rec.get("format", "plain"),
                    raw=raw,
                    language=rec.get("language", "en"),
                )
            )
    return docs


def dump_chunks(chunks: Iterable[Chunk], path, uris: Optional[dict] = None) -> None:
    """Write chunks as line-delimited JSON; `uris` maps doc_id -> source uri."""
    with open(path, "w", encoding="utf-8") as fh:
        for c in chunks:
            rec = {
                "chunk_id": c.chunk_id,
                "doc_id": c.doc_id,
                "index": c.index,
                "content": c.content,
                "char_span": list(c.char_span),
            }
            if uris and c.doc_id in uris:
                rec["uri"] = uris[c.doc_id]
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def load_chunks(path) -> Tuple[List[Chunk], dict]:
    """Inverse of dump_chunks; returns (chunks, doc_id -> uri map)."""
    chunks = []
    uris = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad chunk record: {exc}") from exc
            chunks.append(
                Chunk(
                    chunk_id=rec["chunk_id"],
                    doc_id=rec["doc_id"],
                    index=rec["index"],
                    content=rec["content"],
                    char_span=tuple(rec["char_span"]),
                )
            )
            if rec.get("uri"):
                uris[rec["doc_id"]] = rec["uri"]
    return chunks, uris
