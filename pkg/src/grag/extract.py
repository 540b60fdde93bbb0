"""LLM-driven extraction of entity-relationship-entity triples from chunks."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, Iterable, List, Optional, Set

from .ingest import Chunk

REQUIRED_KEYS = ("head", "head_type", "relation", "tail", "tail_type")


class ExtractionFormatError(Exception):
    """Provider response could not be parsed as a JSON list of objects."""

    def __init__(self, message: str, raw_response: str):
        super().__init__(message)
        self.raw_response = raw_response


@dataclass(frozen=True)
class Triple:
    head: str
    head_type: str
    relation: str
    tail: str
    tail_type: str
    source_chunk_id: str = ""
    # Free-form enrichment from the extractor; excluded from identity.
    properties: Optional[Dict[str, str]] = field(default=None, compare=False, hash=False)

    def key(self):
        return (self.head, self.head_type, self.relation, self.tail, self.tail_type,
                self.source_chunk_id)


@dataclass
class ExtractionGuidance:
    focus_instructions: str = ""
    allowed_entity_types: Optional[Set[str]] = None
    allowed_relation_types: Optional[Set[str]] = None


def normalize_name(raw: str) -> str:
    """Canonical form: underscores to spaces, lowercase, capitalize first char.

    Unifies variants like "Energy Efficiency" / "energy_efficiency" into
    "Energy efficiency".
    """
    s = re.sub(r"\s+", " ", raw.replace("_", " ")).strip().lower()
    # str.capitalize titlecases the first char; upper() would expand ligatures
    # like the eszett and break idempotence.
    return s[:1].capitalize() + s[1:]


def _load_template() -> str:
    return resources.files("grag.assets").joinpath("extract_prompt.txt").read_text(encoding="utf-8")


_TEMPLATE = None


def extraction_prompt(text: str, guidance: Optional[ExtractionGuidance] = None) -> str:
    global _TEMPLATE
    if _TEMPLATE is None:
        _TEMPLATE = _load_template()
    focus = ""
    if guidance and guidance.focus_instructions:
        focus = guidance.focus_instructions.strip() + "\n"
    return _TEMPLATE.replace("{focus}", focus).replace("{text}", text)


def _parse_records(response: str) -> List[dict]:
    try:
        data = json.loads(response)
    except json.JSONDecodeError:
        # Lenient second pass: models often wrap the JSON array in prose.
        start, end = response.find("["), response.rfind("]")
        if start == -1 or end <= start:
            raise ExtractionFormatError("no JSON array in response", response) from None
        try:
            data = json.loads(response[start:end + 1])
        except json.JSONDecodeError:
            raise ExtractionFormatError("unparseable JSON array in response", response) from None
    if not isinstance(data, list):
        raise ExtractionFormatError("response is not a JSON list", response)
    return [r for r in data if isinstance(r, dict)]


def extract_triples(chunk: Chunk, provider, guidance: Optional[ExtractionGuidance] = None) -> List[Triple]:
    """One chat call per chunk; malformed records are dropped, not repaired."""
    if not chunk.content:
        raise ValueError("chunk content must be nonempty")
    prompt = extraction_prompt(chunk.content, guidance)
    response = provider.chat(prompt)
    triples = []
    for rec in _parse_records(response):
        if any(k not in rec for k in REQUIRED_KEYS):
            continue
        head = normalize_name(str(rec["head"]))
        relation = normalize_name(str(rec["relation"]))
        tail = normalize_name(str(rec["tail"]))
        if not head or not relation or not tail:
            continue
        props = rec.get("properties")
        triples.append(
            Triple(
                head=head,
                head_type=normalize_name(str(rec["head_type"])),
                relation=relation,
                tail=tail,
                tail_type=normalize_name(str(rec["tail_type"])),
                source_chunk_id=chunk.chunk_id,
                properties=dict(props) if isinstance(props, dict) else None,
            )
        )
    return triples


def filter_by_ontology(triples: Iterable[Triple], guidance: Optional[ExtractionGuidance]) -> List[Triple]:
    """Retain triples whose types fall inside the expert allowlists."""
    triples = list(triples)
    if guidance is None:
        return triples
    ents = guidance.allowed_entity_types
    rels = guidance.allowed_relation_types
    if ents is not None:
        ents = {normalize_name(e) for e in ents}
    if rels is not None:
        rels = {normalize_name(r) for r in rels}
    out = []
    for t in triples:
        if ents is not None and (t.head_type not in ents or t.tail_type not in ents):
            continue
        if rels is not None and t.relation not in rels:
            continue
        out.append(t)
    return out


def dump_triples(triples: Iterable[Triple], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triples:
            rec = {
                "head": t.head,
                "head_type": t.head_type,
                "relation": t.relation,
                "tail": t.tail,
                "tail_type": t.tail_type,
                "properties": t.properties,
                "source_chunk_id": t.source_chunk_id,
            }
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def load_triples(path) -> List[Triple]:
    triples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad triple record: {exc}") from exc
            triples.append(
                Triple(
                    head=rec["head"],
                    head_type=rec["head_type"],
                    relation=rec["relation"],
                    tail=rec["tail"],
                    tail_type=rec["tail_type"],
                    source_chunk_id=rec.get("source_chunk_id", ""),
                    properties=rec.get("properties"),
                )
            )
    return triples
