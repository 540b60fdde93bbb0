import json
import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from grag.extract import Triple, normalize_name
from grag.graph import init_ontology
from grag.ingest import Chunk
from grag.providers import MockChatProvider, MockEmbeddingProvider, ProviderUsage


NAMES = ["Alpha", "Beta", "Gamma", "Delta", "Epsilon",
         "Zeta", "Eta", "Theta", "Iota", "Kappa"]
RELATIONS = ["Reduces", "Requires", "Powers", "Heats", "Improves"]


def random_triple(rng: random.Random, chunk_ids=("",)) -> Triple:
    head, tail = rng.sample(NAMES, 2)
    # Types derive from names so merged entities stay type-consistent.
    return Triple(
        head=head, head_type=f"Type {head.lower()}",
        relation=rng.choice(RELATIONS),
        tail=tail, tail_type=f"Type {tail.lower()}",
        source_chunk_id=rng.choice(chunk_ids),
    )


def graph_with_chunk(chunk_id_key="doc#0", content="some chunk content", uri="https://ex.org/doc"):
    """Empty graph holding one chunk node, for provenance edges."""
    g = init_ontology()
    chunk = Chunk(chunk_id="", doc_id="doc", index=0, content=content, char_span=(0, len(content)))
    node = g.add_chunk(chunk, uri=uri)
    return g, node.id


_acceptance_outcomes = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _acceptance_outcomes[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion."""
    if not _acceptance_outcomes:
        return
    lines = []
    for nodeid, outcome in _acceptance_outcomes.items():
        name = nodeid.rsplit("::", 1)[-1]
        tag = name.replace("test_criterion_", "")
        number, _, title = tag.partition("_")
        lines.append((int(number),
                      f"criterion {number} ({title.replace('_', ' ')}): "
                      f"{'PASS' if outcome == 'passed' else 'FAIL'}"))
    terminalreporter.write_line("")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)


@pytest.fixture
def usage():
    return ProviderUsage()


@pytest.fixture
def mock_embedder(usage):
    return MockEmbeddingProvider(dim=16, usage=usage)


def scripted_chat(rules, usage=None, default=None):
    return MockChatProvider(rules=rules, default_response=default, usage=usage)


def extraction_json(*records):
    return json.dumps(list(records))
