"""Decompose-then-recompose knowledge refinement for the Correct action.

Documents are split into strips of up to three sentences, each strip is
scored against the question, low-scoring strips are discarded, and the
best survivors are concatenated into the refined context.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .backends import EvaluatorBackend
from .types import Document, KnowledgeContext, Provenance, RelevanceScore, Thresholds

STRIP_SIZE = 3

# Sentence boundary: '.', '!' or '?' followed by whitespace or end of text.
# Deliberately dumb (no abbreviation handling) so splitting is reproducible.
_SENT_BOUNDARY = re.compile(r"(?<=[.!?])(?=\s|$)")


@dataclass(frozen=True)
class KnowledgeStrip:
    text: str
    score: RelevanceScore
    source_doc_index: int
    strip_index: int


def split_sentences(text: str) -> list[str]:
    """Split text into sentences on terminator punctuation.

    A trailing segment without a terminator is kept; segments are
    whitespace-trimmed and empty ones dropped.
    """
    return [seg for seg in (piece.strip() for piece in _SENT_BOUNDARY.split(text)) if seg]


def decompose(doc: Document, doc_index: int = 0, strip_size: int = STRIP_SIZE) -> list[str]:
    """Group a document's sentences into consecutive strips.

    The final remainder of 1-2 sentences becomes its own short strip
    rather than being dropped (answers often sit at document tails).
    """
    sentences = split_sentences(doc.text)
    return [
        " ".join(sentences[i : i + strip_size])
        for i in range(0, len(sentences), strip_size)
    ]


def refine(
    question: str,
    docs: Sequence[Document],
    evaluator: EvaluatorBackend,
    t: Thresholds,
) -> KnowledgeContext:
    """Build the refined internal context from retrieved documents.

    Strips scoring strictly below t.strip_discard are dropped; the
    surviving strips are sorted by score descending (ties broken by
    document order, then strip order) and the top t.strip_top_n are
    concatenated with single spaces.
    """
    if not docs:
        raise ValueError("refine requires at least one document")
    strips: list[KnowledgeStrip] = []
    for doc_index, doc in enumerate(docs):
        for strip_index, text in enumerate(decompose(doc, doc_index)):
            score = evaluator.score(question, text)
            strips.append(KnowledgeStrip(text, score, doc_index, strip_index))

    survivors = [s for s in strips if s.score.value >= t.strip_discard]
    survivors.sort(key=lambda s: (-s.score.value, s.source_doc_index, s.strip_index))
    kept = survivors[: t.strip_top_n]
    if not kept:
        return KnowledgeContext.empty()
    return KnowledgeContext(
        text=" ".join(s.text for s in kept),
        provenance=Provenance.REFINED_INTERNAL,
    )
