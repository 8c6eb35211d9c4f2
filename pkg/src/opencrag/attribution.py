"""Black-box token attribution for evaluator scores.

Treats the evaluator as a coalition game over tokens of the formatted
"question [SEP] document" string: v(S) is the score of the input with
only tokens in S visible. Exact Shapley values are computed by full
coalition enumeration for small n; a hierarchical partition scheme gives
a budgeted approximation for longer inputs.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .backends import SEP_TOKEN, format_evaluator_input

Scorer = Callable[[str], float]

MASK_PLACEHOLDER = "..."
EXACT_MAX_TOKENS = 16


class TooManyTokensError(ValueError):
    pass


class AttributionMethod(str, enum.Enum):
    EXACT = "exact"
    PARTITION = "partition"


@dataclass(frozen=True)
class TokenizedInput:
    tokens: tuple[str, ...]
    boundary_index: int  # position of the [SEP] token

    def __post_init__(self) -> None:
        if not 1 <= self.boundary_index < len(self.tokens):
            raise ValueError("boundary index must fall inside the token list")


@dataclass(frozen=True)
class Attribution:
    tokens: tuple[str, ...]
    values: tuple[float, ...]
    base_value: float  # score of the fully masked input
    full_value: float  # score of the unmasked input
    method: AttributionMethod

    def to_dict(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "values": list(self.values),
            "base_value": self.base_value,
            "full_value": self.full_value,
            "method": self.method.value,
        }


def tokenize_for_masking(question: str, document: str) -> TokenizedInput:
    """Whitespace-tokenize the formatted evaluator input.

    The separator token is itself maskable (it can carry attribution).
    """
    formatted = format_evaluator_input(question, document)
    tokens = tuple(formatted.split())
    return TokenizedInput(tokens=tokens, boundary_index=tokens.index(SEP_TOKEN))


def mask_render(inp: TokenizedInput, keep: Iterable[int]) -> str:
    """Render the input with all tokens outside `keep` masked.

    Masked tokens become the placeholder; adjacent placeholders collapse
    to a single one.
    """
    keep_set = set(keep)
    pieces: list[str] = []
    for i, token in enumerate(inp.tokens):
        if i in keep_set:
            pieces.append(token)
        elif not pieces or pieces[-1] != MASK_PLACEHOLDER:
            pieces.append(MASK_PLACEHOLDER)
    return " ".join(pieces)


class _GameCache:
    """Memoized coalition evaluations keyed by bitmask."""

    def __init__(self, inp: TokenizedInput, scorer: Scorer):
        self.inp = inp
        self.scorer = scorer
        self.calls = 0
        self._cache: dict[int, float] = {}

    def value(self, mask: int) -> float:
        if mask not in self._cache:
            keep = [i for i in range(len(self.inp.tokens)) if mask >> i & 1]
            self._cache[mask] = self.scorer(mask_render(self.inp, keep))
            self.calls += 1
        return self._cache[mask]


def exact_shapley(inp: TokenizedInput, scorer: Scorer) -> Attribution:
    """Classic Shapley values by full coalition enumeration (2^n calls)."""
    n = len(inp.tokens)
    if n > EXACT_MAX_TOKENS:
        raise TooManyTokensError(f"{n} tokens exceeds the exact limit of {EXACT_MAX_TOKENS}")
    game = _GameCache(inp, scorer)
    # weight[s] = s!(n-s-1)!/n! for a coalition of size s not containing i
    fact = [math.factorial(k) for k in range(n + 1)]
    weight = [fact[s] * fact[n - s - 1] / fact[n] for s in range(n)]
    values = [0.0] * n
    full_mask = (1 << n) - 1
    for mask in range(1 << n):
        size = mask.bit_count()
        v = game.value(mask)
        for i in range(n):
            bit = 1 << i
            if mask & bit:
                continue
            values[i] += weight[size] * (game.value(mask | bit) - v)
    return Attribution(
        tokens=inp.tokens,
        values=tuple(values),
        base_value=game.value(0),
        full_value=game.value(full_mask),
        method=AttributionMethod.EXACT,
    )


def _span_mask(lo: int, hi: int) -> int:
    return ((1 << (hi - lo)) - 1) << lo


def partition_shapley(inp: TokenizedInput, scorer: Scorer, budget: int | None = None) -> Attribution:
    """Hierarchical midpoint-partition approximation under a call budget.

    The root contribution is v(full) - v(empty). Each span splits at its
    midpoint and both child insertion orders are recursed with half
    weight, so children always sum exactly to their parent. Descent
    stops when the memoized scorer-call budget would be exceeded; an
    unexpanded span spreads its contribution uniformly over its tokens.
    Deterministic for fixed input, scorer, and budget.
    """
    n = len(inp.tokens)
    if budget is None:
        budget = 4 * n
    game = _GameCache(inp, scorer)
    full_mask = (1 << n) - 1
    base = game.value(0)
    full = game.value(full_mask)
    values = [0.0] * n

    def solve(lo: int, hi: int, ctx: int, scale: float) -> None:
        """Distribute scale * (v(ctx | span) - v(ctx)) over span tokens.

        Both child insertion orders are recursed with half weight, so the
        span total is preserved exactly at every level (Owen-style).
        """
        span = _span_mask(lo, hi)
        contribution = game.value(ctx | span) - game.value(ctx)
        if hi - lo == 1:
            values[lo] += scale * contribution
            return
        mid = (lo + hi) // 2
        left = _span_mask(lo, mid)
        right = _span_mask(mid, hi)
        # A split touches at most 4 coalition values beyond the parent's;
        # stop descending when the (memoized) call budget cannot cover it.
        if game.calls + 4 > budget:
            per_token = scale * contribution / (hi - lo)
            for i in range(lo, hi):
                values[i] += per_token
            return
        solve(lo, mid, ctx, scale * 0.5)
        solve(mid, hi, ctx | left, scale * 0.5)
        solve(mid, hi, ctx, scale * 0.5)
        solve(lo, mid, ctx | right, scale * 0.5)

    solve(0, n, 0, 1.0)

    return Attribution(
        tokens=inp.tokens,
        values=tuple(values),
        base_value=base,
        full_value=full,
        method=AttributionMethod.PARTITION,
    )


def score_attribution(
    question: str,
    document: str,
    scorer: Scorer,
    method: AttributionMethod = AttributionMethod.EXACT,
    budget: int | None = None,
) -> Attribution:
    inp = tokenize_for_masking(question, document)
    if method is AttributionMethod.EXACT:
        return exact_shapley(inp, scorer)
    return partition_shapley(inp, scorer, budget)


def export_attributions(
    samples: Sequence[tuple[str, str, Attribution]],
    json_path: str | Path,
    csv_path: str | Path | None = None,
) -> None:
    """Write attributions as a JSON array plus an optional CSV matrix
    (rows = samples, columns = token positions) for heatmap plotting.
    """
    records = [
        {"question": q, "document": d, **attr.to_dict()} for q, d, attr in samples
    ]
    Path(json_path).write_text(json.dumps(records, indent=2))
    if csv_path is None:
        return
    width = max((len(attr.values) for _, _, attr in samples), default=0)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample"] + [f"pos_{i}" for i in range(width)])
        for idx, (_, _, attr) in enumerate(samples):
            row: list = [idx]
            row += list(attr.values)
            row += [""] * (width - len(attr.values))
            writer.writerow(row)
