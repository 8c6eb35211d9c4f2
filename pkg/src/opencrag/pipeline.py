"""End-to-end pipeline: score documents, dispatch the action, build the
context (refine / wikipedia / combine), prompt the generator, judge the
prediction.
"""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import evaluation, wiki
from .backends import BackendError, EvaluatorBackend, GeneratorBackend
from .dispatch import decide_action
from .refine import refine
from .types import (
    Action,
    ActionKind,
    KnowledgeContext,
    PipelineResult,
    Provenance,
    Question,
    Thresholds,
)

logger = logging.getLogger(__name__)


class DatasetMode(str, enum.Enum):
    POPQA = "popqa"
    ARC = "arc"


@dataclass(frozen=True)
class PipelineConfig:
    thresholds: Thresholds = field(default_factory=Thresholds)
    max_docs: int = 10
    dataset_mode: DatasetMode = DatasetMode.POPQA
    enable_web_search: bool = False
    workers: int = 1
    wiki_config: wiki.WikiConfig = field(default_factory=wiki.WikiConfig)

    def __post_init__(self) -> None:
        if self.max_docs < 1:
            raise ValueError("max_docs must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


PROMPT_HEADER = "Answer the question in one or two concise sentences."
ARC_INSTRUCTION = "Answer with the letter of the correct choice and its text."


def build_prompt(question: Question, context: KnowledgeContext, mode: DatasetMode) -> str:
    """Render the frozen generator prompt template.

    The Context block is omitted entirely for empty contexts; arc mode
    adds a letter-labelled Choices block.
    """
    lines = [PROMPT_HEADER, ""]
    if context.provenance is not Provenance.EMPTY:
        lines += ["Context:", context.text, ""]
    lines.append(f"Question: {question.text}")
    if mode is DatasetMode.ARC:
        lines += ["", "Choices:"]
        lines += [f"{label}) {text}" for label, text in question.choices]
        lines += ["", ARC_INSTRUCTION]
    return "\n".join(lines)


def _external_context(
    question: Question, cfg: PipelineConfig, wiki_client: Optional[wiki.WikiClient]
) -> tuple[Optional[KnowledgeContext], Optional[bool]]:
    """Fetch external knowledge through the Wikipedia fallback pipeline.

    Returns (context or None, wiki_hit flag); the flag stays None when no
    fetch was attempted.
    """
    if not cfg.enable_web_search or wiki_client is None:
        return None, None
    entity = wiki.extract_entity(question.text)
    query = entity if entity is not None else question.text
    result = wiki.fetch(query, cfg.wiki_config, wiki_client)
    if result.hit:
        return KnowledgeContext(result.extract_text, Provenance.EXTERNAL), True
    return None, False


def _combine(internal: KnowledgeContext, external: Optional[KnowledgeContext]) -> KnowledgeContext:
    """Merge internal and external knowledge, internal first."""
    if external is None:
        return internal
    if internal.provenance is Provenance.EMPTY:
        return external
    return KnowledgeContext(
        text=f"{internal.text} {external.text}", provenance=Provenance.COMBINED
    )


def run_question(
    question: Question,
    cfg: PipelineConfig,
    evaluator: EvaluatorBackend,
    generator: GeneratorBackend,
    wiki_client: Optional[wiki.WikiClient] = None,
) -> PipelineResult:
    """Run one question through the full corrective pipeline."""
    try:
        return _run_question_inner(question, cfg, evaluator, generator, wiki_client)
    except BackendError as exc:
        logger.warning("question %s errored: %s", question.id, exc)
        return PipelineResult(
            question_id=question.id,
            action=None,
            qtype=question.qtype,
            error=str(exc),
        )


def _run_question_inner(
    question: Question,
    cfg: PipelineConfig,
    evaluator: EvaluatorBackend,
    generator: GeneratorBackend,
    wiki_client: Optional[wiki.WikiClient],
) -> PipelineResult:
    docs = list(question.retrieved_docs[: cfg.max_docs])
    wiki_hit: Optional[bool] = None

    if docs:
        scores = [evaluator.score(question.text, doc.text) for doc in docs]
        action = decide_action(scores, cfg.thresholds)
    else:
        # No retrieval: the dispatcher is bypassed and the pipeline acts
        # as Ambiguous without internal knowledge (web search only).
        action = Action(kind=ActionKind.AMBIGUOUS, doc_scores=())

    if action.kind is ActionKind.CORRECT:
        context = refine(question.text, docs, evaluator, cfg.thresholds)
    elif action.kind is ActionKind.INCORRECT:
        external, wiki_hit = _external_context(question, cfg, wiki_client)
        context = external if external is not None else KnowledgeContext.empty()
    else:
        internal = (
            refine(question.text, docs, evaluator, cfg.thresholds)
            if docs
            else KnowledgeContext.empty()
        )
        external, wiki_hit = _external_context(question, cfg, wiki_client)
        context = _combine(internal, external)

    prediction = generator.generate(build_prompt(question, context, cfg.dataset_mode))
    return PipelineResult(
        question_id=question.id,
        action=action,
        context=context,
        prediction=prediction,
        correct=evaluation.matches(prediction, question),
        wiki_hit=wiki_hit,
        qtype=question.qtype,
    )


def run_dataset(
    questions: Sequence[Question],
    cfg: PipelineConfig,
    evaluator: EvaluatorBackend,
    generator: GeneratorBackend,
    wiki_client: Optional[wiki.WikiClient] = None,
) -> tuple[list[PipelineResult], evaluation.RunReport]:
    """Run all questions through a bounded worker pool.

    Results come back in input order regardless of completion order, so
    reports are independent of the parallelism degree.
    """

    def worker(q: Question) -> PipelineResult:
        return run_question(q, cfg, evaluator, generator, wiki_client)

    if cfg.workers == 1 or len(questions) <= 1:
        results = [worker(q) for q in questions]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(worker, questions))
    return results, evaluation.aggregate(results)
