"""Core domain types shared across the engine.

Everything here is an immutable value object: instances are safe to share
between worker threads without locking.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Optional

# Tolerance for clamping float noise coming back from remote backends.
SCORE_CLAMP_EPS = 1e-6


class ScoreOutOfRangeError(ValueError):
    """A relevance score fell outside [-1, 1] by more than float noise."""


class DocSource(str, enum.Enum):
    PRECOMPUTED = "precomputed-retrieval"
    WIKIPEDIA = "wikipedia"


class ActionKind(str, enum.Enum):
    CORRECT = "Correct"
    INCORRECT = "Incorrect"
    AMBIGUOUS = "Ambiguous"


class Provenance(str, enum.Enum):
    REFINED_INTERNAL = "refined-internal"
    EXTERNAL = "external"
    COMBINED = "combined"
    EMPTY = "empty"


@dataclass(frozen=True)
class RelevanceScore:
    """Scalar relevance in [-1, 1] emitted by the evaluator backend."""

    value: float

    def __post_init__(self) -> None:
        if not -1.0 <= self.value <= 1.0:
            raise ScoreOutOfRangeError(f"relevance score {self.value} outside [-1, 1]")

    @classmethod
    def from_backend(cls, raw: float) -> "RelevanceScore":
        """Build a score from a backend response, clamping float noise.

        Values outside [-1, 1] by at most SCORE_CLAMP_EPS are clamped;
        larger violations raise ScoreOutOfRangeError.
        """
        if raw > 1.0:
            if raw - 1.0 > SCORE_CLAMP_EPS:
                raise ScoreOutOfRangeError(f"backend score {raw} outside [-1, 1]")
            raw = 1.0
        elif raw < -1.0:
            if -1.0 - raw > SCORE_CLAMP_EPS:
                raise ScoreOutOfRangeError(f"backend score {raw} outside [-1, 1]")
            raw = -1.0
        return cls(raw)


@dataclass(frozen=True)
class Document:
    text: str
    source: DocSource = DocSource.PRECOMPUTED
    title: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("document text must be non-empty")

    def to_dict(self) -> dict:
        return {"text": self.text, "source": self.source.value, "title": self.title}

    @classmethod
    def from_dict(cls, d: dict) -> "Document":
        return cls(text=d["text"], source=DocSource(d["source"]), title=d.get("title"))


@dataclass(frozen=True)
class Question:
    """A query with gold data, in one of two dataset modes.

    Exactly one of gold_aliases (popqa mode) or choices+answer_key (arc
    mode) is populated.
    """

    id: str
    text: str
    gold_aliases: tuple[str, ...] = ()
    choices: tuple[tuple[str, str], ...] = ()  # (label letter, choice text)
    answer_key: Optional[str] = None
    retrieved_docs: tuple[Document, ...] = ()
    qtype: str = "other"

    def __post_init__(self) -> None:
        popqa = bool(self.gold_aliases)
        arc = bool(self.choices) or self.answer_key is not None
        if popqa == arc:
            raise ValueError(
                f"question {self.id!r}: exactly one of gold_aliases / "
                "(choices + answer_key) must be populated"
            )
        if arc:
            if not self.choices or self.answer_key is None:
                raise ValueError(f"question {self.id!r}: arc mode needs choices and answer_key")
            labels = [label for label, _ in self.choices]
            if self.answer_key not in labels:
                raise ValueError(
                    f"question {self.id!r}: answer key {self.answer_key!r} not among labels {labels}"
                )

    @property
    def is_arc(self) -> bool:
        return bool(self.choices)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"id": self.id, "text": self.text, "qtype": self.qtype}
        if self.gold_aliases:
            d["gold_aliases"] = list(self.gold_aliases)
        else:
            d["choices"] = [[label, text] for label, text in self.choices]
            d["answer_key"] = self.answer_key
        d["retrieved_docs"] = [doc.to_dict() for doc in self.retrieved_docs]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Question":
        return cls(
            id=d["id"],
            text=d["text"],
            gold_aliases=tuple(d.get("gold_aliases", ())),
            choices=tuple((label, text) for label, text in d.get("choices", ())),
            answer_key=d.get("answer_key"),
            retrieved_docs=tuple(Document.from_dict(x) for x in d.get("retrieved_docs", ())),
            qtype=d.get("qtype", "other"),
        )


@dataclass(frozen=True)
class Thresholds:
    """Decision and refinement thresholds (PopQA defaults)."""

    upper: float = 0.59
    lower: float = -0.99
    strip_discard: float = -0.5
    strip_top_n: int = 5

    def __post_init__(self) -> None:
        if not (-1.0 <= self.lower < self.upper <= 1.0):
            raise ValueError(f"need -1 <= lower < upper <= 1, got {self.lower}, {self.upper}")
        if self.strip_top_n < 1:
            raise ValueError("strip_top_n must be positive")

    def to_dict(self) -> dict:
        return {
            "upper": self.upper,
            "lower": self.lower,
            "strip_discard": self.strip_discard,
            "strip_top_n": self.strip_top_n,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Thresholds":
        return cls(**d)


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    doc_scores: tuple[RelevanceScore, ...] = ()

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "doc_scores": [s.value for s in self.doc_scores]}

    @classmethod
    def from_dict(cls, d: dict) -> "Action":
        return cls(
            kind=ActionKind(d["kind"]),
            doc_scores=tuple(RelevanceScore(v) for v in d["doc_scores"]),
        )


@dataclass(frozen=True)
class KnowledgeContext:
    text: str
    provenance: Provenance

    def __post_init__(self) -> None:
        if (self.provenance is Provenance.EMPTY) != (self.text == ""):
            raise ValueError("provenance=empty iff text is empty")

    @classmethod
    def empty(cls) -> "KnowledgeContext":
        return cls(text="", provenance=Provenance.EMPTY)

    def to_dict(self) -> dict:
        return {"text": self.text, "provenance": self.provenance.value}

    @classmethod
    def from_dict(cls, d: dict) -> "KnowledgeContext":
        return cls(text=d["text"], provenance=Provenance(d["provenance"]))


@dataclass(frozen=True)
class PipelineResult:
    """Outcome of running one question through the pipeline.

    action is None only for errored questions; those carry the error
    message and are counted separately in reports.
    """

    question_id: str
    action: Optional[Action]
    context: KnowledgeContext = field(default_factory=KnowledgeContext.empty)
    prediction: str = ""
    correct: bool = False
    wiki_hit: Optional[bool] = None
    qtype: str = "other"
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "action": self.action.to_dict() if self.action is not None else None,
            "context": self.context.to_dict(),
            "prediction": self.prediction,
            "correct": self.correct,
            "wiki_hit": self.wiki_hit,
            "qtype": self.qtype,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineResult":
        return cls(
            question_id=d["question_id"],
            action=Action.from_dict(d["action"]) if d.get("action") is not None else None,
            context=KnowledgeContext.from_dict(d["context"]),
            prediction=d["prediction"],
            correct=d["correct"],
            wiki_hit=d.get("wiki_hit"),
            qtype=d.get("qtype", "other"),
            error=d.get("error"),
        )
