"""Decision rule mapping per-document relevance scores to an action."""

from __future__ import annotations

from typing import Sequence

from .types import Action, ActionKind, RelevanceScore, Thresholds


class EmptyScoresError(ValueError):
    pass


def decide_action(scores: Sequence[RelevanceScore], t: Thresholds) -> Action:
    """Pick Correct / Incorrect / Ambiguous from document scores.

    Correct when at least one document scores strictly above t.upper;
    Incorrect when every document scores strictly below t.lower
    (equivalently, max < lower); Ambiguous otherwise. Equality with a
    threshold is neither above nor below, so boundary ties land in
    Ambiguous.
    """
    if not scores:
        raise EmptyScoresError("decide_action requires at least one score")
    best = max(s.value for s in scores)
    if best > t.upper:
        kind = ActionKind.CORRECT
    elif best < t.lower:
        kind = ActionKind.INCORRECT
    else:
        kind = ActionKind.AMBIGUOUS
    return Action(kind=kind, doc_scores=tuple(scores))
