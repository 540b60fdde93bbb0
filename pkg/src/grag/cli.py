"""Command-line front end; each subcommand is a thin wrapper over one module."""

from __future__ import annotations

import json
import sys

import click

from .config import load_config, make_providers
from .engine import (Engine, attach_corpus_embeddings, build_graph_from_parts,
                     extract_corpus_triples)
from .extract import dump_triples, load_triples
from .graph import KnowledgeGraph
from .ingest import ChunkingParams, chunk_document, dump_chunks, load_manifest, load_chunks
from .retrieval import RetrievalParams
from . import evaluation


@click.group()
def main():
    """Graph-based retrieval-augmented question answering."""


def _config(path, allow_out_of_range=None):
    return load_config(path, allow_out_of_range=allow_out_of_range)


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True),
              help="Line-delimited corpus manifest.")
@click.option("--chunk-size", default=1000, show_default=True)
@click.option("--chunk-overlap", default=200, show_default=True)
@click.option("--out", required=True, type=click.Path())
def ingest(corpus, chunk_size, chunk_overlap, out):
    """Clean and chunk a document corpus."""
    docs = load_manifest(corpus)
    params = ChunkingParams(chunk_size=chunk_size, chunk_overlap=chunk_overlap)
    chunks = []
    for doc in docs:
        chunks.extend(chunk_document(doc, params))
    dump_chunks(chunks, out, uris={d.doc_id: d.uri for d in docs})
    click.echo(f"{len(docs)} documents -> {len(chunks)} chunks -> {out}")


@main.command()
@click.option("--chunks", "chunks_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
def extract(chunks_path, out, config_path):
    """Run LLM triple extraction over a chunks file."""
    cfg = _config(config_path)
    chat, _ = make_providers(cfg.provider)
    chunks, _ = load_chunks(chunks_path)
    triples = extract_corpus_triples(chunks, chat)
    dump_triples(triples, out)
    click.echo(f"{len(chunks)} chunks -> {len(triples)} triples -> {out}")


@main.command("build-kg")
@click.option("--chunks", "chunks_path", required=True, type=click.Path(exists=True))
@click.option("--triples", "triples_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
def build_kg(chunks_path, triples_path, out, config_path):
    """Build the knowledge graph from chunks and extracted triples."""
    cfg = _config(config_path)
    _, embedder = make_providers(cfg.provider)
    chunks, uris = load_chunks(chunks_path)
    from .ingest import SourceDocument
    docs = [SourceDocument(doc_id=d, uri=u, format="plain", raw="")
            for d, u in sorted(uris.items())]
    g = build_graph_from_parts(docs, chunks, load_triples(triples_path))
    attach_corpus_embeddings(g, embedder)
    g.save(out)
    stats = g.stats()
    click.echo(f"graph written to {out}: {stats}")


@main.command("kg-stats")
@click.argument("graph_file", type=click.Path(exists=True))
def kg_stats(graph_file):
    """Print node/edge statistics of a graph file."""
    g = KnowledgeGraph.load(graph_file)
    click.echo(json.dumps(g.stats(), indent=2, sort_keys=True))


def _retrieval_overrides(cfg, k, t, o, i, c, allow_out_of_range):
    params = cfg.retrieval
    updates = {"k": k, "t": t, "o": o, "i": i, "c": c}
    for name, value in updates.items():
        if value is not None:
            setattr(params, name, value)
    return params.validate(allow_out_of_range=allow_out_of_range or cfg.allow_out_of_range)


@main.command()
@click.argument("question")
@click.option("--graph", "graph_file", required=True, type=click.Path(exists=True))
@click.option("--lang", default=None, help="Answer language tag, e.g. it or en.")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--k", type=int, default=None)
@click.option("--t", type=float, default=None)
@click.option("--o", type=int, default=None)
@click.option("--i", type=int, default=None)
@click.option("--c", type=int, default=None)
@click.option("--allow-out-of-range", is_flag=True, default=False)
def ask(question, graph_file, lang, config_path, k, t, o, i, c, allow_out_of_range):
    """Answer one question against a built graph."""
    cfg = _config(config_path)
    params = _retrieval_overrides(cfg, k, t, o, i, c, allow_out_of_range)
    chat, embedder = make_providers(cfg.provider)
    engine = Engine(KnowledgeGraph.load(graph_file), chat, embedder, params=params,
                    default_language=cfg.default_language)
    ans = engine.answer(question, language=lang)
    click.echo(ans.text)
    if ans.citations:
        click.echo("Citations: " + "; ".join(ans.citations))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
def serve(config_path):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    cfg = _config(config_path)
    graph = KnowledgeGraph.load(cfg.graph_path) if cfg.graph_path else None
    app = create_app(cfg, graph=graph)
    uvicorn.run(app, host=cfg.host, port=cfg.port)


@main.group("eval")
def eval_group():
    """Benchmark runs and judgment aggregation."""


@eval_group.command("run")
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--graph", "graph_file", required=True, type=click.Path(exists=True))
@click.option("--lang", type=click.Choice(["it", "en"]), default="en", show_default=True)
@click.option("--mode", type=click.Choice(["rag", "ablation"]), default="rag", show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
def eval_run(dataset, graph_file, lang, mode, out, config_path):
    """Answer every dataset question and write a run file."""
    cfg = _config(config_path)
    chat, embedder = make_providers(cfg.provider)
    engine = Engine(KnowledgeGraph.load(graph_file), chat, embedder,
                    params=cfg.retrieval, default_language=cfg.default_language)
    records = evaluation.load_qa_dataset(dataset)
    results = evaluation.run_benchmark(records, engine, lang, mode, out)
    errors = sum(1 for r in results if "error" in r)
    click.echo(f"{len(results)} answers written to {out} ({errors} errors)")


@eval_group.command("aggregate")
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--judgments", required=True, type=click.Path(exists=True))
@click.option("--run", "run_file", type=click.Path(exists=True))
@click.option("--out", type=click.Path())
def eval_aggregate(dataset, judgments, run_file, out):
    """Aggregate human judgments into the language-by-country table."""
    records = evaluation.load_qa_dataset(dataset)
    table = evaluation.aggregate(evaluation.load_judgments(judgments), records)
    run_records = None
    if run_file:
        with open(run_file, encoding="utf-8") as fh:
            run_records = [json.loads(line) for line in fh if line.strip()]
    text, machine = evaluation.render_report(table, run_records)
    click.echo(text)
    if out:
        evaluation.save_table(machine, out)


@main.command()
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--lang", type=click.Choice(["it", "en"]), default="en", show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
def ablate(dataset, lang, out, config_path):
    """Retrieval-free baseline over a dataset."""
    cfg = _config(config_path)
    chat, embedder = make_providers(cfg.provider)

    class _LlmOnly:
        def answer_llm_only(self, question, language=None):
            from .generation import answer_llm_only
            return answer_llm_only(question, language or cfg.default_language, chat)

    records = evaluation.load_qa_dataset(dataset)
    results = evaluation.run_benchmark(records, _LlmOnly(), lang, "ablation", out)
    click.echo(f"{len(results)} ablation answers written to {out}")


if __name__ == "__main__":
    sys.exit(main())
