"""Bridge configuration."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class BridgeConfig:
    """Serving configuration.

    `max_input_tokens` is the evaluator's hard sequence limit: longer
    inputs are truncated from the document side first (the question is
    always kept whole), which affects scores on very long pages and is
    therefore part of the documented contract rather than an internal
    detail.
    """

    evaluator_checkpoint: str = "t5-large"
    generator_checkpoint: str = "microsoft/Phi-3-mini-4k-instruct"
    device: str = "cpu"
    max_input_tokens: int = 512
    fp16: bool = False

    def __post_init__(self) -> None:
        if self.max_input_tokens <= 0:
            raise ValueError("max_input_tokens must be positive")
        if not self.evaluator_checkpoint or not self.generator_checkpoint:
            raise ValueError("checkpoint ids must be non-empty")
