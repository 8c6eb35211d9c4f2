"""Model wrappers behind the /score and /generate endpoints.

Two families share one small interface:

- Lexical stubs: pure functions of their inputs, no downloads, fully
  deterministic. These back the test suite and offline serving.
- Hugging Face wrappers: a fine-tuned sequence-classification evaluator
  and a causal-LM generator with greedy decoding. Imported lazily so the
  default install does not need torch/transformers.
"""

from __future__ import annotations

import logging
import re
from typing import Protocol

from .config import BridgeConfig

logger = logging.getLogger(__name__)

_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


class Evaluator(Protocol):
    def score(self, question: str, document: str) -> float: ...


class Generator(Protocol):
    def generate(self, prompt: str, max_tokens: int) -> str: ...


def _normalize(token: str) -> str:
    word = token.strip(".,;:!?()[]\"'").lower()
    if word.endswith("'s"):
        word = word[:-2]
    return word


def _truncate_document(question: str, document: str, max_tokens: int) -> str:
    """Drop document tokens (never question tokens) past the length cap."""
    budget = max_tokens - len(question.split()) - 1  # -1 for the separator
    doc_tokens = document.split()
    if budget < 1:
        budget = 1
    if len(doc_tokens) > budget:
        return " ".join(doc_tokens[:budget])
    return document


class LexicalEvaluator:
    """Deterministic relevance scorer keyed on named entities.

    Capitalized question tokens (excluding the sentence-initial word) are
    treated as the entity mention; the score is the fraction of entity
    words present in the document, rescaled to [-1, 1]. A question with
    no capitalized tokens falls back to token-set Jaccard overlap. Crude,
    but it reproduces the regimes that matter: an on-topic article about
    the asked-about entity scores near 1, an unrelated document near -1.
    """

    def __init__(self, cfg: BridgeConfig | None = None):
        self.cfg = cfg or BridgeConfig()

    def score(self, question: str, document: str) -> float:
        document = _truncate_document(question, document, self.cfg.max_input_tokens)
        q_tokens = question.split()
        entities = {_normalize(t) for t in q_tokens[1:] if t[:1].isupper()} - {""}
        doc_tokens = {_normalize(t) for t in document.split()} - {""}
        if entities:
            coverage = len(entities & doc_tokens) / len(entities)
            return 2.0 * coverage - 1.0
        q_set = {_normalize(t) for t in q_tokens} - {""}
        union = q_set | doc_tokens
        jaccard = len(q_set & doc_tokens) / len(union) if union else 0.0
        return 2.0 * jaccard - 1.0


class TemplateGenerator:
    """Deterministic generator stub.

    Expects the engine's prompt layout (optional Context: block, then a
    Question: line) but degrades gracefully on free-form prompts: it
    answers with the context sentence sharing the most tokens with the
    question (later sentences win ties), or a fixed fallback. Output is
    capped at `max_tokens` whitespace tokens.
    """

    FALLBACK = "I don't know."

    def generate(self, prompt: str, max_tokens: int) -> str:
        question, context = _parse_prompt(prompt)
        answer, best = self.FALLBACK, 0
        if question and context:
            q_words = {_normalize(t) for t in question.split()} - {""}
            for sentence in _SENTENCE_END.split(context):
                s_words = {_normalize(t) for t in sentence.split()} - {""}
                overlap = len(q_words & s_words)
                if overlap and overlap >= best:
                    answer, best = sentence.strip(), overlap
        tokens = answer.split()
        return " ".join(tokens[:max_tokens]) if len(tokens) > max_tokens else answer


def _parse_prompt(prompt: str) -> tuple[str, str]:
    question = ""
    context_lines: list[str] = []
    in_context = False
    for raw in prompt.splitlines():
        line = raw.strip()
        if line.startswith("Context:"):
            in_context = True
            rest = line[len("Context:"):].strip()
            if rest:
                context_lines.append(rest)
        elif line.startswith("Question:"):
            in_context = False
            question = line[len("Question:"):].strip()
        elif line.startswith("Choices:"):
            in_context = False
        elif in_context and line:
            context_lines.append(line)
    if not question:
        # free-form prompt: treat the last line as the question
        lines = [l for l in prompt.splitlines() if l.strip()]
        question = lines[-1].strip() if lines else ""
    return question, " ".join(context_lines)


class HfEvaluator:
    """Fine-tuned sequence-classification evaluator (T5-family).

    The raw regression logit is squashed with tanh into [-1, 1]; inputs
    beyond the tokenizer limit are truncated document-side first.
    """

    def __init__(self, cfg: BridgeConfig):
        import torch
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        self.cfg = cfg
        self._torch = torch
        dtype = torch.float16 if cfg.fp16 else torch.float32
        self.tokenizer = AutoTokenizer.from_pretrained(cfg.evaluator_checkpoint)
        self.model = AutoModelForSequenceClassification.from_pretrained(
            cfg.evaluator_checkpoint, num_labels=1, torch_dtype=dtype
        ).to(cfg.device)
        self.model.eval()

    def score(self, question: str, document: str) -> float:
        torch = self._torch
        enc = self.tokenizer(
            question,
            document,
            truncation="only_second",
            max_length=self.cfg.max_input_tokens,
            return_tensors="pt",
        ).to(self.cfg.device)
        with torch.no_grad():
            logit = self.model(**enc).logits.squeeze().item()
        return float(torch.tanh(torch.tensor(logit)))


class HfGenerator:
    """Causal-LM generator with greedy decoding (temperature 0)."""

    def __init__(self, cfg: BridgeConfig):
        import torch
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self.cfg = cfg
        self._torch = torch
        dtype = torch.float16 if cfg.fp16 else torch.float32
        self.tokenizer = AutoTokenizer.from_pretrained(cfg.generator_checkpoint)
        self.model = AutoModelForCausalLM.from_pretrained(
            cfg.generator_checkpoint, torch_dtype=dtype
        ).to(cfg.device)
        self.model.eval()

    def generate(self, prompt: str, max_tokens: int) -> str:
        torch = self._torch
        enc = self.tokenizer(
            prompt,
            truncation=True,
            max_length=self.cfg.max_input_tokens,
            return_tensors="pt",
        ).to(self.cfg.device)
        with torch.no_grad():
            out = self.model.generate(
                **enc,
                max_new_tokens=max_tokens,
                do_sample=False,
                num_beams=1,
                pad_token_id=self.tokenizer.eos_token_id,
            )
        new_tokens = out[0][enc["input_ids"].shape[1]:]
        return self.tokenizer.decode(new_tokens, skip_special_tokens=True).strip()


def build_models(cfg: BridgeConfig, kind: str) -> tuple[Evaluator, Generator]:
    if kind == "stub":
        return LexicalEvaluator(cfg), TemplateGenerator()
    if kind == "real":
        logger.info(
            "loading checkpoints %s / %s on %s",
            cfg.evaluator_checkpoint, cfg.generator_checkpoint, cfg.device,
        )
        return HfEvaluator(cfg), HfGenerator(cfg)
    raise ValueError(f"unknown model kind: {kind!r}")
