"""Validation harness: QA datasets, benchmark/ablation runs, human judgments,
and the language-by-country aggregation table."""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

COUNTRIES = ("IT", "CH", "Both")
LANG_GROUPS = ("IT", "EN", "All")
COUNTRY_GROUPS = ("IT", "CH", "Both", "All")


class DatasetError(ValueError):
    pass


@dataclass
class QaRecord:
    id: str
    question_it: str
    question_en: str
    expected: str
    country: str

    def question(self, language: str) -> str:
        return self.question_it if language.lower().startswith("it") else self.question_en


@dataclass
class Judgment:
    record_id: str
    language: str  # "IT" | "EN"
    judge_id: str
    faithfulness: float
    answer_relevance: float
    context_relevance: float
    overall: float


@dataclass
class AggregateCell:
    language: str
    country: str
    mean: float    # percentage
    stderr: float  # percentage
    n: int


def load_qa_dataset(path) -> List[QaRecord]:
    records = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: bad record: {exc}") from exc
            for fieldname in ("id", "question_it", "question_en", "expected", "country"):
                if not rec.get(fieldname):
                    raise DatasetError(f"{path}:{lineno}: missing field {fieldname!r}")
            if rec["id"] in seen:
                raise DatasetError(f"{path}:{lineno}: duplicate id {rec['id']!r}")
            seen.add(rec["id"])
            if rec["country"] not in COUNTRIES:
                raise DatasetError(
                    f"{path}:{lineno}: bad country {rec['country']!r} (expected one of {COUNTRIES})"
                )
            records.append(QaRecord(
                id=rec["id"], question_it=rec["question_it"], question_en=rec["question_en"],
                expected=rec["expected"], country=rec["country"],
            ))
    return records


def dataset_counts(records: Sequence[QaRecord]) -> Dict[str, int]:
    counts = {c: 0 for c in COUNTRIES}
    for r in records:
        counts[r.country] += 1
    return counts


def load_judgments(path) -> List[Judgment]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: bad judgment: {exc}") from exc
            scores = {k: float(rec[k]) for k in
                      ("faithfulness", "answer_relevance", "context_relevance", "overall")}
            for name, value in scores.items():
                if not 0.0 <= value <= 1.0:
                    raise DatasetError(f"{path}:{lineno}: {name}={value} outside [0, 1]")
            # Penalty rule: a perfect overall requires all three metrics perfect.
            if scores["overall"] == 1.0 and min(scores.values()) < 1.0:
                raise DatasetError(
                    f"{path}:{lineno}: overall=1.0 with an imperfect metric score"
                )
            if rec["language"] not in ("IT", "EN"):
                raise DatasetError(f"{path}:{lineno}: bad language {rec['language']!r}")
            out.append(Judgment(record_id=rec["record_id"], language=rec["language"],
                                judge_id=rec["judge_id"], **scores))
    return out


def run_benchmark(dataset: Sequence[QaRecord], engine, language: str,
                  mode: str, out_path, resume: bool = True) -> List[dict]:
    """Answer every dataset question, one result record per line; reruns skip
    already-answered ids so an interrupted run can resume."""
    if mode not in ("rag", "ablation"):
        raise ValueError(f"mode must be rag or ablation, got {mode!r}")
    out_path = Path(out_path)
    done = set()
    results = []
    if resume and out_path.exists():
        with out_path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rec = json.loads(line)
                    done.add(rec["record_id"])
                    results.append(rec)
    lang_tag = language.lower()
    with out_path.open("a", encoding="utf-8") as fh:
        for record in dataset:
            if record.id in done:
                continue
            question = record.question(lang_tag)
            try:
                if mode == "rag":
                    ans = engine.answer(question, language=lang_tag)
                else:
                    ans = engine.answer_llm_only(question, language=lang_tag)
                rec = {
                    "record_id": record.id,
                    "question": question,
                    "text": ans.text,
                    "citations": ans.citations,
                    "language": ans.language,
                    "empty_context": ans.empty_context,
                    "diagnostics": asdict(ans.diagnostics),
                }
            except Exception as exc:  # record and continue; one bad record must not kill a run
                rec = {"record_id": record.id, "question": question, "error": str(exc)}
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
            fh.flush()
            results.append(rec)
    return results


def _group_questions(dataset: Sequence[QaRecord], lang_group: str, country_group: str):
    langs = ("IT", "EN") if lang_group == "All" else (lang_group,)
    countries = COUNTRIES if country_group == "All" else (country_group,)
    return [(r.id, lang) for r in dataset if r.country in countries for lang in langs]


def aggregate(judgments: Sequence[Judgment],
              dataset: Sequence[QaRecord]) -> Dict[Tuple[str, str], AggregateCell]:
    """3x4 table of mean +/- stderr percentages.

    Marginals are recomputed from the union of the underlying judgments,
    never averaged from cell means.  The +/- is the dispersion of per-judge
    group means over sqrt(judges).
    """
    known = {r.id for r in dataset}
    by_pair: Dict[Tuple[str, str], List[Judgment]] = {}
    judges = sorted({j.judge_id for j in judgments})
    for j in judgments:
        if j.record_id not in known:
            raise DatasetError(f"judgment references unknown record {j.record_id!r}")
        by_pair.setdefault((j.record_id, j.language), []).append(j)

    table: Dict[Tuple[str, str], AggregateCell] = {}
    for lang_group in LANG_GROUPS:
        for country_group in COUNTRY_GROUPS:
            pairs = [p for p in _group_questions(dataset, lang_group, country_group)
                     if p in by_pair]
            if not pairs:
                table[(lang_group, country_group)] = AggregateCell(
                    language=lang_group, country=country_group, mean=0.0, stderr=0.0, n=0)
                continue
            per_question = [statistics.fmean(j.overall for j in by_pair[p]) for p in pairs]
            mean = statistics.fmean(per_question) * 100.0
            judge_means = []
            for judge in judges:
                scores = [j.overall for p in pairs for j in by_pair[p] if j.judge_id == judge]
                if scores:
                    judge_means.append(statistics.fmean(scores))
            if len(judge_means) > 1:
                spread = statistics.pstdev(judge_means)
                stderr = spread / math.sqrt(len(judge_means)) * 100.0
            else:
                stderr = 0.0
            table[(lang_group, country_group)] = AggregateCell(
                language=lang_group, country=country_group,
                mean=mean, stderr=stderr, n=len(pairs))
    return table


def _mean_sd(values: Sequence[float]) -> Tuple[float, float]:
    if not values:
        return (0.0, 0.0)
    m = statistics.fmean(values)
    sd = statistics.pstdev(values) if len(values) > 1 else 0.0
    return (m, sd)


def render_report(table: Dict[Tuple[str, str], AggregateCell],
                  run_records: Optional[Sequence[dict]] = None) -> Tuple[str, dict]:
    """Human-readable report plus a machine-readable dict of the same data."""
    lines = [
        "Answer validity by language and context country (mean +/- stderr %).",
        "+/- convention: dispersion of per-judge group means over sqrt(judges).",
        "",
        "            " + "".join(f"{c:>16}" for c in COUNTRY_GROUPS),
    ]
    for lang in LANG_GROUPS:
        cells = []
        for country in COUNTRY_GROUPS:
            cell = table[(lang, country)]
            cells.append(f"{cell.mean:6.1f}+/-{cell.stderr:4.1f}%")
        lines.append(f"{lang:>10}  " + "".join(f"{c:>16}" for c in cells))

    diag = {}
    if run_records:
        ok = [r for r in run_records if "diagnostics" in r]
        latency, sd_latency = _mean_sd([r["diagnostics"]["wall_time"] for r in ok])
        chat, sd_chat = _mean_sd([r["diagnostics"]["llm_calls"] for r in ok])
        emb, sd_emb = _mean_sd([r["diagnostics"]["embedded_texts"] for r in ok])
        diag = {
            "answered": len(ok),
            "errors": len(run_records) - len(ok),
            "latency_mean": latency, "latency_sd": sd_latency,
            "llm_calls_mean": chat, "llm_calls_sd": sd_chat,
            "embedded_texts_mean": emb, "embedded_texts_sd": sd_emb,
        }
        lines.append("")
        lines.append(f"Questions answered: {len(ok)} (errors: {diag['errors']})")
        lines.append(f"Latency per question: {latency:.2f} +/- {sd_latency:.2f} s")
        lines.append(f"LLM calls per question: {chat:.2f} +/- {sd_chat:.2f}")
        lines.append(f"Embedded texts per question: {emb:.2f} +/- {sd_emb:.2f}")
    else:
        lines.append("")
        lines.append("No run diagnostics: no data.")

    machine = {
        "cells": [asdict(cell) for (_, _), cell in sorted(table.items())],
        "diagnostics": diag,
    }
    return "\n".join(lines), machine


def save_table(machine: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(machine, fh, ensure_ascii=False, sort_keys=True, indent=2)


def load_table(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
