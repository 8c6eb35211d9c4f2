"""opencrag: corrective-RAG orchestration engine with pluggable backends."""

from .types import (
    Action,
    ActionKind,
    Document,
    KnowledgeContext,
    PipelineResult,
    Provenance,
    Question,
    RelevanceScore,
    Thresholds,
)

__all__ = [
    "Action",
    "ActionKind",
    "Document",
    "KnowledgeContext",
    "PipelineResult",
    "Provenance",
    "Question",
    "RelevanceScore",
    "Thresholds",
]

__version__ = "0.1.0"
