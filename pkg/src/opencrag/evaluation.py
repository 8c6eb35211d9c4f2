"""Dataset ingestion, answer matching, and run-report aggregation.

Aggregation is done in exact rational arithmetic and only rendered to
one decimal place at the edge, so replayed tables are reproduced exactly.
"""

from __future__ import annotations

import csv
import json
import re
import string
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .types import ActionKind, DocSource, Document, PipelineResult, Question

_ACTION_ORDER = (ActionKind.CORRECT, ActionKind.AMBIGUOUS, ActionKind.INCORRECT)


class IngestError(ValueError):
    pass


# Question typing -----------------------------------------------------------


def _load_qtype_rules(path: Optional[Path] = None) -> list[tuple[str, str]]:
    if path is not None:
        raw = json.loads(Path(path).read_text())
    else:
        raw = json.loads(
            resources.files("opencrag.data").joinpath("qtype_keywords.json").read_text()
        )
    return [(kw.lower(), cat) for kw, cat in raw["rules"]]


_QTYPE_RULES = _load_qtype_rules()


def classify_qtype(question: str, rules: Optional[list[tuple[str, str]]] = None) -> str:
    """First keyword match wins; unmatched questions are 'other'."""
    text = question.lower()
    for keyword, category in rules if rules is not None else _QTYPE_RULES:
        if keyword in text:
            return category
    return "other"


# Ingestion -----------------------------------------------------------------


def _iter_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"{path}:{lineno}: malformed JSON ({exc})") from exc


def ingest_popqa(path: str | Path) -> list[Question]:
    """Parse a PopQA-style JSONL file.

    Each line needs id, question, answers (alias list) and optionally
    docs (list of {text, title}); qtype is assigned here by keyword
    rules, never trusted from the file.
    """
    path = Path(path)
    questions = []
    for lineno, obj in _iter_jsonl(path):
        for required in ("id", "question", "answers"):
            if required not in obj:
                raise IngestError(f"{path}:{lineno}: missing field {required!r}")
        if not obj["answers"]:
            raise IngestError(f"{path}:{lineno}: 'answers' must be non-empty")
        docs = tuple(
            Document(text=d["text"], source=DocSource.PRECOMPUTED, title=d.get("title"))
            for d in obj.get("docs", [])
        )
        questions.append(
            Question(
                id=str(obj["id"]),
                text=obj["question"],
                gold_aliases=tuple(str(a) for a in obj["answers"]),
                retrieved_docs=docs,
                qtype=classify_qtype(obj["question"]),
            )
        )
    return questions


def ingest_arc(path: str | Path) -> list[Question]:
    """Parse an ARC-style JSONL file (id, question, choices, answerKey)."""
    path = Path(path)
    questions = []
    for lineno, obj in _iter_jsonl(path):
        for required in ("id", "question", "choices", "answerKey"):
            if required not in obj:
                raise IngestError(f"{path}:{lineno}: missing field {required!r}")
        choices = tuple((c["label"], c["text"]) for c in obj["choices"])
        labels = [label for label, _ in choices]
        if obj["answerKey"] not in labels:
            raise IngestError(
                f"{path}:{lineno}: answerKey {obj['answerKey']!r} not among labels {labels}"
            )
        docs = tuple(
            Document(text=d["text"], source=DocSource.PRECOMPUTED, title=d.get("title"))
            for d in obj.get("docs", [])
        )
        questions.append(
            Question(
                id=str(obj["id"]),
                text=obj["question"],
                choices=choices,
                answer_key=obj["answerKey"],
                retrieved_docs=docs,
                qtype=classify_qtype(obj["question"]),
            )
        )
    return questions


# Answer matching -----------------------------------------------------------


def _normalize(text: str) -> str:
    return " ".join(text.lower().split())


def match_popqa(prediction: str, gold_aliases: Sequence[str]) -> bool:
    """True iff any gold alias appears in the prediction.

    Both sides are lowercased and whitespace-collapsed; aliases are
    additionally stripped of boundary punctuation.
    """
    if not gold_aliases:
        raise ValueError("gold_aliases must be non-empty")
    pred = _normalize(prediction)
    for alias in gold_aliases:
        needle = _normalize(alias).strip(string.punctuation + " ")
        if needle and needle in pred:
            return True
    return False


def match_arc(prediction: str, choices: Sequence[tuple[str, str]], answer_key: str) -> bool:
    """True iff the gold choice text appears, or the answer letter appears
    as a standalone token ("B", "B)", "(B"), case-insensitively.
    """
    gold_text = next((text for label, text in choices if label == answer_key), None)
    if gold_text is None:
        raise ValueError(f"answer key {answer_key!r} not among choice labels")
    if _normalize(gold_text) and _normalize(gold_text) in _normalize(prediction):
        return True
    # Word-boundary letter match so 'a' inside "absorb" never counts.
    pattern = rf"(?<![A-Za-z0-9]){re.escape(answer_key)}(?![A-Za-z0-9])"
    return re.search(pattern, prediction, flags=re.IGNORECASE) is not None


def matches(prediction: str, question: Question) -> bool:
    if question.is_arc:
        return match_arc(prediction, question.choices, question.answer_key)
    return match_popqa(prediction, question.gold_aliases)


# Aggregation ---------------------------------------------------------------


def _pct(value: Optional[Fraction]) -> Optional[str]:
    """Render a fraction as a percentage with one decimal, half-up."""
    if value is None:
        return None
    exact = Decimal(value.numerator * 100) / Decimal(value.denominator)
    return str(exact.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ActionStats:
    count: int
    share: Optional[Fraction]
    accuracy: Optional[Fraction]


@dataclass(frozen=True)
class QtypeStats:
    count: int
    accuracy: Optional[Fraction]
    dominant_action: Optional[ActionKind]


@dataclass(frozen=True)
class RunReport:
    n: int
    errors: int
    overall_accuracy: Optional[Fraction]
    per_action: dict[ActionKind, ActionStats]
    per_qtype: dict[str, QtypeStats]
    per_qtype_action: dict[tuple[str, ActionKind], tuple[int, Optional[Fraction]]]
    wiki_hit_rate: Optional[Fraction] = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "errors": self.errors,
            "overall_accuracy_pct": _pct(self.overall_accuracy),
            "per_action": {
                kind.value: {
                    "count": stats.count,
                    "share_pct": _pct(stats.share),
                    "accuracy_pct": _pct(stats.accuracy),
                }
                for kind, stats in sorted(self.per_action.items(), key=lambda kv: kv[0].value)
            },
            "per_qtype": {
                qtype: {
                    "count": stats.count,
                    "accuracy_pct": _pct(stats.accuracy),
                    "dominant_action": stats.dominant_action.value
                    if stats.dominant_action
                    else None,
                }
                for qtype, stats in sorted(self.per_qtype.items())
            },
            "per_qtype_action": {
                f"{qtype}/{kind.value}": {"count": count, "accuracy_pct": _pct(acc)}
                for (qtype, kind), (count, acc) in sorted(
                    self.per_qtype_action.items(), key=lambda kv: (kv[0][0], kv[0][1].value)
                )
            },
            "wiki_hit_rate": float(self.wiki_hit_rate) if self.wiki_hit_rate is not None else None,
        }


def _dominant(counts: dict[ActionKind, int]) -> Optional[ActionKind]:
    if not counts or not any(counts.values()):
        return None
    best = max(counts.values())
    # Ties break toward Correct > Ambiguous > Incorrect.
    for kind in _ACTION_ORDER:
        if counts.get(kind, 0) == best:
            return kind
    return None


def aggregate(results: Sequence[PipelineResult]) -> RunReport:
    """Build a RunReport from completed results (exact rational arithmetic)."""
    n = len(results)
    ok = [r for r in results if r.error is None and r.action is not None]
    errors = n - len(ok)

    per_action: dict[ActionKind, ActionStats] = {}
    for kind in _ACTION_ORDER:
        subset = [r for r in ok if r.action.kind is kind]
        count = len(subset)
        share = Fraction(count, len(ok)) if ok else None
        accuracy = (
            Fraction(sum(1 for r in subset if r.correct), count) if count else None
        )
        per_action[kind] = ActionStats(count, share, accuracy)

    per_qtype: dict[str, QtypeStats] = {}
    per_qtype_action: dict[tuple[str, ActionKind], tuple[int, Optional[Fraction]]] = {}
    for qtype in sorted({r.qtype for r in ok}):
        subset = [r for r in ok if r.qtype == qtype]
        action_counts = {
            kind: sum(1 for r in subset if r.action.kind is kind) for kind in _ACTION_ORDER
        }
        per_qtype[qtype] = QtypeStats(
            count=len(subset),
            accuracy=Fraction(sum(1 for r in subset if r.correct), len(subset)),
            dominant_action=_dominant(action_counts),
        )
        for kind in _ACTION_ORDER:
            cell = [r for r in subset if r.action.kind is kind]
            acc = Fraction(sum(1 for r in cell if r.correct), len(cell)) if cell else None
            per_qtype_action[(qtype, kind)] = (len(cell), acc)

    overall = Fraction(sum(1 for r in ok if r.correct), len(ok)) if ok else None
    attempted = [r for r in results if r.wiki_hit is not None]
    wiki_rate = (
        Fraction(sum(1 for r in attempted if r.wiki_hit), len(attempted)) if attempted else None
    )
    return RunReport(
        n=n,
        errors=errors,
        overall_accuracy=overall,
        per_action=per_action,
        per_qtype=per_qtype,
        per_qtype_action=per_qtype_action,
        wiki_hit_rate=wiki_rate,
    )


def write_report_csv(report: RunReport, path: str | Path) -> None:
    """Per-(qtype, action) accuracy/count matrix for external plotting."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["qtype"]
        for kind in _ACTION_ORDER:
            header += [f"{kind.value}_count", f"{kind.value}_accuracy_pct"]
        writer.writerow(header)
        for qtype in sorted(report.per_qtype):
            row: list = [qtype]
            for kind in _ACTION_ORDER:
                count, acc = report.per_qtype_action.get((qtype, kind), (0, None))
                row += [count, _pct(acc) if acc is not None else ""]
            writer.writerow(row)
