"""Synthetic result-record builders used by the aggregation replay tests.

These construct (action, correct) record sets whose counts match the
published per-action and per-question-type breakdowns, so the aggregator
can be checked against the rendered numbers exactly.
"""

from opencrag.types import Action, ActionKind, PipelineResult

# (action, subset size, number correct): 754/379/252 with accuracies that
# render to 78.1 / 19.3 / 36.1 at one decimal.
ACTION_RECORDS = [
    (ActionKind.CORRECT, 754, 589),
    (ActionKind.AMBIGUOUS, 379, 73),
    (ActionKind.INCORRECT, 252, 91),
]

# (qtype, count, correct, dominant action) reproducing the nine
# per-question-type rows; the remainder of the 1,385 records is "other".
QTYPE_ROWS = [
    ("country", 274, 235, ActionKind.CORRECT),
    ("sport", 196, 143, ActionKind.CORRECT),
    ("occupation", 121, 74, ActionKind.CORRECT),
    ("city", 175, 95, ActionKind.CORRECT),
    ("author", 234, 94, ActionKind.AMBIGUOUS),
    ("composer", 46, 15, ActionKind.AMBIGUOUS),
    ("director", 90, 26, ActionKind.AMBIGUOUS),
    ("genre", 112, 25, ActionKind.AMBIGUOUS),
    ("religion", 40, 2, ActionKind.CORRECT),
]


def make_action_fixture() -> list[PipelineResult]:
    results = []
    idx = 0
    for kind, count, correct in ACTION_RECORDS:
        for i in range(count):
            results.append(
                PipelineResult(
                    question_id=f"r{idx}",
                    action=Action(kind=kind),
                    prediction="p",
                    correct=i < correct,
                )
            )
            idx += 1
    return results


def make_qtype_fixture() -> list[PipelineResult]:
    results = []
    idx = 0
    for qtype, count, correct, dominant in QTYPE_ROWS:
        other = (
            ActionKind.AMBIGUOUS if dominant is ActionKind.CORRECT else ActionKind.CORRECT
        )
        for i in range(count):
            # Slight majority of the dominant action within each qtype.
            kind = dominant if i % 3 != 2 else other
            results.append(
                PipelineResult(
                    question_id=f"t{idx}",
                    action=Action(kind=kind),
                    prediction="p",
                    correct=i < correct,
                    qtype=qtype,
                )
            )
            idx += 1
    # Pad to 1,385 records with an unmatched category.
    while idx < 1385:
        results.append(
            PipelineResult(
                question_id=f"t{idx}",
                action=Action(kind=ActionKind.CORRECT),
                prediction="p",
                correct=False,
                qtype="other",
            )
        )
        idx += 1
    return results
