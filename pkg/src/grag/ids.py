"""Stable node identities for knowledge-graph objects."""

import hashlib

NODE_KINDS = ("Entity", "Relationship", "Document", "Chunk")


class InvalidKeyError(ValueError):
    pass


def node_id(kind: str, key: str) -> str:
    """MD5 digest of "<kind>:<key>", lowercase hex.

    The kind prefix keeps an Entity and a Relationship with the same name
    from colliding.
    """
    if kind not in NODE_KINDS:
        raise InvalidKeyError(f"unknown node kind: {kind!r}")
    if not key:
        raise InvalidKeyError("node key must be nonempty")
    return hashlib.md5(f"{kind}:{key}".encode("utf-8")).hexdigest()


def chunk_key(doc_id: str, index: int) -> str:
    """Positional identity: chunk content may repeat across documents."""
    return f"{doc_id}#{index}"


def relationship_key(relation: str, head: str, tail: str) -> str:
    """Relationship instances are keyed per endpoint pair, so a "Reduces"
    between unrelated entity pairs stays two distinct nodes."""
    return f"{relation}|{head}|{tail}"
