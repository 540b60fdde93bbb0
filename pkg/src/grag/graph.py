"""Typed knowledge graph with hash identity, merge-on-insert, and persistence.

Nodes are Entity / Relationship / Document / Chunk; edges carry the small
closed set of labels needed to reconstruct the original triples exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .extract import Triple
from .ids import NODE_KINDS, chunk_key, node_id, relationship_key
from .ingest import Chunk, SourceDocument

SCHEMA_VERSION = "graphkb v1"

EDGE_LABELS = (
    "hasSource", "hasTarget", "hasRelationship", "hasChunk",
    "isSourceOf", "isTargetOf", "relatesSource", "relatesTarget",
)


class UnknownNodeError(KeyError):
    pass


class DimensionMismatchError(ValueError):
    pass


class GraphIntegrityError(ValueError):
    pass


class GraphFormatError(ValueError):
    pass


@dataclass
class GraphNode:
    id: str
    kind: str
    name: str = ""
    content: str = ""
    properties: Dict[str, object] = field(default_factory=dict)
    name_embedding: Optional[List[float]] = None
    content_embedding: Optional[List[float]] = None


@dataclass
class UserMetadata:
    user_id: str
    language: str = ""
    country: str = ""
    preferences: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.user_id:
            raise ValueError("user_id must be nonempty")


@dataclass
class InsertReport:
    nodes_added: int
    edges_added: int
    merged: bool


class KnowledgeGraph:
    """In-memory graph store; single writer, concurrent readers."""

    def __init__(self):
        self.node_kinds: Tuple[str, ...] = NODE_KINDS
        self.edge_labels: Tuple[str, ...] = EDGE_LABELS
        self.schema_version: str = SCHEMA_VERSION
        self.nodes: Dict[str, GraphNode] = {}
        self.edges: Set[Tuple[str, str, str]] = set()  # (label, from, to)
        self.users: Dict[str, UserMetadata] = {}
        self.embedding_dim: Optional[int] = None
        self._adj: Dict[Tuple[str, str], List[str]] = {}

    # -- construction -----------------------------------------------------

    def _ensure_node(self, kind: str, key: str, **attrs) -> Tuple[GraphNode, bool]:
        nid = node_id(kind, key)
        node = self.nodes.get(nid)
        if node is None:
            node = GraphNode(id=nid, kind=kind, **attrs)
            self.nodes[nid] = node
            return node, True
        return node, False

    def _add_edge(self, label: str, src: str, dst: str) -> int:
        edge = (label, src, dst)
        if edge in self.edges:
            return 0
        self.edges.add(edge)
        self._adj.setdefault((src, label), []).append(dst)
        return 1

    def add_document(self, doc: SourceDocument) -> GraphNode:
        node, _ = self._ensure_node("Document", doc.uri or doc.doc_id, name=doc.uri or doc.doc_id)
        node.properties.setdefault("doc_id", doc.doc_id)
        node.properties.setdefault("language", doc.language)
        return node

    def add_chunk(self, chunk: Chunk, uri: str = "") -> GraphNode:
        node, _ = self._ensure_node("Chunk", chunk_key(chunk.doc_id, chunk.index), content=chunk.content)
        node.properties.update({"doc_id": chunk.doc_id, "index": chunk.index})
        if uri:
            node.properties["uri"] = uri
            doc_nid = node_id("Document", uri)
            if doc_nid in self.nodes:
                self._add_edge("hasChunk", doc_nid, node.id)
        return node

    def upsert_triple(self, t: Triple) -> InsertReport:
        """Merge-on-insert by hash identity; re-inserting is a no-op."""
        if t.source_chunk_id and t.source_chunk_id not in self.nodes:
            raise GraphIntegrityError(f"triple references unknown chunk {t.source_chunk_id}")

        nodes_added = 0
        edges_added = 0
        head, h_new = self._ensure_node("Entity", t.head, name=t.head)
        tail, t_new = self._ensure_node("Entity", t.tail, name=t.tail)
        rel, r_new = self._ensure_node(
            "Relationship", relationship_key(t.relation, t.head, t.tail), name=t.relation
        )
        nodes_added += sum((h_new, t_new, r_new))
        merged = not (h_new and t_new and r_new)

        head.properties["type"] = t.head_type
        tail.properties["type"] = t.tail_type
        rel.properties["head_type"] = t.head_type
        rel.properties["tail_type"] = t.tail_type
        if t.properties:
            head.properties.update(t.properties)

        edges_added += self._add_edge("hasSource", rel.id, head.id)
        edges_added += self._add_edge("hasTarget", rel.id, tail.id)
        edges_added += self._add_edge("relatesSource", rel.id, head.id)
        edges_added += self._add_edge("relatesTarget", rel.id, tail.id)
        edges_added += self._add_edge("isSourceOf", head.id, rel.id)
        edges_added += self._add_edge("isTargetOf", tail.id, rel.id)
        edges_added += self._add_edge("hasRelationship", head.id, rel.id)
        edges_added += self._add_edge("hasRelationship", tail.id, rel.id)
        if t.source_chunk_id:
            for nid in (head.id, tail.id, rel.id):
                edges_added += self._add_edge("hasChunk", nid, t.source_chunk_id)
        return InsertReport(nodes_added=nodes_added, edges_added=edges_added, merged=merged)

    def attach_embedding(self, nid: str, fieldname: str, vector: Sequence[float]) -> None:
        if fieldname not in ("name", "content"):
            raise ValueError(f"unknown embedding field: {fieldname!r}")
        node = self.nodes.get(nid)
        if node is None:
            raise UnknownNodeError(nid)
        vec = [float(x) for x in vector]
        if self.embedding_dim is None:
            self.embedding_dim = len(vec)
        elif len(vec) != self.embedding_dim:
            raise DimensionMismatchError(
                f"vector dim {len(vec)} != corpus dim {self.embedding_dim}"
            )
        if fieldname == "name":
            node.name_embedding = vec
        else:
            node.content_embedding = vec

    # -- queries ----------------------------------------------------------

    def _targets(self, src: str, label: str) -> List[str]:
        return self._adj.get((src, label), [])

    def reconstruct_triples(self) -> Set[Triple]:
        """Round-trip inverse of upsert_triple (properties excluded)."""
        out: Set[Triple] = set()
        for node in self.nodes.values():
            if node.kind != "Relationship":
                continue
            sources = self._targets(node.id, "hasSource")
            targets = self._targets(node.id, "hasTarget")
            if len(sources) != 1 or len(targets) != 1:
                raise GraphIntegrityError(
                    f"relationship {node.id} has {len(sources)} hasSource and "
                    f"{len(targets)} hasTarget edges"
                )
            head = self.nodes[sources[0]]
            tail = self.nodes[targets[0]]
            chunk_ids = self._targets(node.id, "hasChunk") or [""]
            for cid in chunk_ids:
                out.add(
                    Triple(
                        head=head.name,
                        head_type=str(node.properties.get("head_type", "")),
                        relation=node.name,
                        tail=tail.name,
                        tail_type=str(node.properties.get("tail_type", "")),
                        source_chunk_id=cid,
                    )
                )
        return out

    def neighbors(self, entity: str, direction: str, limit: int,
                  scores: Optional[Dict[str, float]] = None) -> List[Tuple[GraphNode, GraphNode]]:
        """(relationship, other entity) pairs where `entity` is head (outgoing)
        or tail (incoming)."""
        node = self.nodes.get(entity)
        if node is None:
            raise UnknownNodeError(entity)
        if node.kind != "Entity":
            raise ValueError(f"node {entity} is {node.kind}, not Entity")
        if direction == "outgoing":
            rel_ids = self._targets(entity, "isSourceOf")
            other_label = "hasTarget"
        elif direction == "incoming":
            rel_ids = self._targets(entity, "isTargetOf")
            other_label = "hasSource"
        else:
            raise ValueError(f"direction must be outgoing or incoming, got {direction!r}")
        pairs = []
        for rid in rel_ids:
            others = self._targets(rid, other_label)
            if not others:
                raise GraphIntegrityError(f"relationship {rid} missing {other_label}")
            pairs.append((self.nodes[rid], self.nodes[others[0]]))
        if scores is not None:
            pairs.sort(key=lambda p: (-scores.get(p[0].id, float("-inf")), p[0].id))
        else:
            pairs.sort(key=lambda p: (p[0].name, p[1].name, p[0].id))
        return pairs[:limit]

    def chunks_for(self, ids: Iterable[str], limit: int,
                   scores: Optional[Dict[str, float]] = None) -> List[GraphNode]:
        """Deduplicated chunk nodes reachable via hasChunk from `ids`."""
        seen = set()
        chunks = []
        for nid in ids:
            for cid in self._targets(nid, "hasChunk"):
                if cid not in seen:
                    seen.add(cid)
                    chunks.append(self.nodes[cid])
        if scores is not None:
            chunks.sort(key=lambda c: (-scores.get(c.id, float("-inf")), c.id))
        else:
            chunks.sort(key=lambda c: (str(c.properties.get("doc_id", "")),
                                       int(c.properties.get("index", 0)), c.id))
        return chunks[:limit]

    def entities(self) -> List[GraphNode]:
        return [n for n in self.nodes.values() if n.kind == "Entity"]

    def stats(self) -> Dict[str, object]:
        counts = {k: 0 for k in self.node_kinds}
        for n in self.nodes.values():
            counts[n.kind] += 1
        return {
            "entities": counts["Entity"],
            "relationships": counts["Relationship"],
            "documents": counts["Document"],
            "chunks": counts["Chunk"],
            "edges": len(self.edges),
            "embedding_dim": self.embedding_dim,
        }

    # -- user metadata ----------------------------------------------------

    def set_user_metadata(self, m: UserMetadata) -> None:
        self.users[m.user_id] = m

    def get_user_metadata(self, user_id: str) -> Optional[UserMetadata]:
        return self.users.get(user_id)

    # -- persistence ------------------------------------------------------

    def save(self, path) -> None:
        """Line-delimited records: header, meta, nodes, edges, users.

        Sorted keys and sorted record order make output byte-stable; floats
        serialize as shortest round-trip decimals.
        """
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(SCHEMA_VERSION + "\n")
            fh.write(json.dumps({"t": "meta", "embedding_dim": self.embedding_dim},
                                sort_keys=True) + "\n")
            for nid in sorted(self.nodes):
                n = self.nodes[nid]
                rec = {
                    "t": "node", "id": n.id, "kind": n.kind, "name": n.name,
                    "content": n.content, "properties": n.properties,
                    "name_embedding": n.name_embedding,
                    "content_embedding": n.content_embedding,
                }
                fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
            for label, src, dst in sorted(self.edges):
                fh.write(json.dumps({"t": "edge", "label": label, "from": src, "to": dst},
                                    sort_keys=True) + "\n")
            for uid in sorted(self.users):
                u = self.users[uid]
                rec = {"t": "user", "user_id": u.user_id, "language": u.language,
                       "country": u.country, "preferences": u.preferences}
                fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "KnowledgeGraph":
        g = cls()
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n")
            if header != SCHEMA_VERSION:
                raise GraphFormatError(f"unsupported graph file version: {header!r}")
            for lineno, line in enumerate(fh, 2):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise GraphFormatError(f"{path}:{lineno}: corrupt record: {exc}") from exc
                kind = rec.get("t")
                if kind == "meta":
                    g.embedding_dim = rec.get("embedding_dim")
                elif kind == "node":
                    g.nodes[rec["id"]] = GraphNode(
                        id=rec["id"], kind=rec["kind"], name=rec["name"],
                        content=rec.get("content", ""),
                        properties=rec.get("properties", {}),
                        name_embedding=rec.get("name_embedding"),
                        content_embedding=rec.get("content_embedding"),
                    )
                elif kind == "edge":
                    g._add_edge(rec["label"], rec["from"], rec["to"])
                elif kind == "user":
                    g.users[rec["user_id"]] = UserMetadata(
                        user_id=rec["user_id"], language=rec.get("language", ""),
                        country=rec.get("country", ""),
                        preferences=rec.get("preferences", {}),
                    )
                else:
                    raise GraphFormatError(f"{path}:{lineno}: unknown record type {kind!r}")
        return g

    # -- equality ---------------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        def node_key(n: GraphNode):
            return (n.id, n.kind, n.name, n.content, sorted(n.properties.items()),
                    n.name_embedding, n.content_embedding)
        return (
            {nid: node_key(n) for nid, n in self.nodes.items()}
            == {nid: node_key(n) for nid, n in other.nodes.items()}
            and self.edges == other.edges
            and self.users == other.users
            and self.embedding_dim == other.embedding_dim
        )


def init_ontology() -> KnowledgeGraph:
    """Empty graph with the closed node-kind and edge-label registries."""
    return KnowledgeGraph()
