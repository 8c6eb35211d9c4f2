"""Pluggable model backends: protocol, deterministic stubs, HTTP clients.

The engine never does model inference in-process. Real backends sit behind
two HTTP endpoints (/score and /generate); the stubs below are pure
functions of their inputs so the whole pipeline can run offline and
deterministically.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Protocol

import requests

from .types import RelevanceScore

logger = logging.getLogger(__name__)

SEP_TOKEN = "[SEP]"
STUB_SENTINEL = "UNKNOWN"


class BackendError(Exception):
    """Base class for backend failures surfaced to the pipeline."""


class EmptyInputError(BackendError, ValueError):
    pass


class MalformedResponseError(BackendError):
    pass


class BackendUnavailableError(BackendError):
    """Transient failures exhausted all retries."""


class EvaluatorBackend(Protocol):
    def score(self, question: str, document: str) -> RelevanceScore: ...


class GeneratorBackend(Protocol):
    def generate(self, prompt: str) -> str: ...


def format_evaluator_input(question: str, document: str) -> str:
    """Join a question/document pair with the evaluator's separator token."""
    if not question or not document:
        raise EmptyInputError("question and document must be non-empty")
    return f"{question} {SEP_TOKEN} {document}"


def stub_score(question: str, document: str) -> RelevanceScore:
    """Deterministic lexical stand-in for the evaluator.

    Returns 2*J - 1 where J is the Jaccard overlap of the lowercased
    whitespace token sets; lies in [-1, 1] by construction.
    """
    if not question or not document:
        raise EmptyInputError("question and document must be non-empty")
    q_tokens = set(question.lower().split())
    d_tokens = set(document.lower().split())
    union = q_tokens | d_tokens
    jaccard = len(q_tokens & d_tokens) / len(union) if union else 0.0
    return RelevanceScore(2.0 * jaccard - 1.0)


def _strip_word(token: str) -> str:
    return token.strip(".,;:!?()[]\"'").lower()


def stub_generate(prompt: str) -> str:
    """Deterministic stand-in for the generator.

    Parses the prompt template from the orchestrator, then echoes the last
    context sentence sharing any token with the question; falls back to
    the fixed sentinel when there is no context or no overlap.
    """
    question = ""
    context_lines: list[str] = []
    in_context = False
    for line in prompt.splitlines():
        stripped = line.strip()
        if stripped.startswith("Context:"):
            in_context = True
            rest = stripped[len("Context:"):].strip()
            if rest:
                context_lines.append(rest)
            continue
        if stripped.startswith("Question:"):
            in_context = False
            question = stripped[len("Question:"):].strip()
            continue
        if stripped.startswith("Choices:"):
            in_context = False
            continue
        if in_context and stripped:
            context_lines.append(stripped)
    context = " ".join(context_lines)
    if not context or not question:
        return STUB_SENTINEL

    from .refine import split_sentences  # local import avoids a cycle

    q_tokens = {_strip_word(t) for t in question.split()} - {""}
    answer = None
    for sentence in split_sentences(context):
        s_tokens = {_strip_word(t) for t in sentence.split()} - {""}
        if q_tokens & s_tokens:
            answer = sentence
    return answer if answer is not None else STUB_SENTINEL


class StubEvaluator:
    """In-process evaluator backend built on stub_score."""

    def score(self, question: str, document: str) -> RelevanceScore:
        return stub_score(question, document)


class StubGenerator:
    def generate(self, prompt: str) -> str:
        return stub_generate(prompt)


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str
    timeout_ms: int = 30_000
    max_retries: int = 3
    cache_dir: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")


def _post_with_retries(
    url: str,
    payload: dict,
    cfg: BackendConfig,
    session: requests.Session,
    sleep: Callable[[float], None],
) -> dict:
    """POST json, retrying on timeouts / connection errors / 5xx only.

    4xx means a protocol bug on our side and is never retried.
    """
    timeout_s = cfg.timeout_ms / 1000.0
    last_exc: Exception | None = None
    for attempt in range(cfg.max_retries + 1):
        try:
            resp = session.post(url, json=payload, timeout=timeout_s)
        except (requests.Timeout, requests.ConnectionError) as exc:
            last_exc = exc
        else:
            if resp.status_code < 400:
                try:
                    return resp.json()
                except ValueError as exc:
                    raise MalformedResponseError(f"non-JSON response from {url}") from exc
            if resp.status_code < 500:
                raise MalformedResponseError(f"{url} returned {resp.status_code}: {resp.text[:200]}")
            last_exc = BackendUnavailableError(f"{url} returned {resp.status_code}")
        if attempt < cfg.max_retries:
            backoff = 0.5 * (2**attempt)
            logger.warning("retrying %s after failure (%s), attempt %d", url, last_exc, attempt + 1)
            sleep(backoff)
    raise BackendUnavailableError(f"{url} unreachable after {cfg.max_retries} retries") from last_exc


class HttpEvaluator:
    """Evaluator client speaking the POST /score wire format."""

    def __init__(
        self,
        cfg: BackendConfig,
        session: Optional[requests.Session] = None,
        sleep: Optional[Callable[[float], None]] = None,
    ):
        self.cfg = cfg
        self.session = session or requests.Session()
        self._sleep = sleep if sleep is not None else time.sleep

    def score(self, question: str, document: str) -> RelevanceScore:
        if not question or not document:
            raise EmptyInputError("question and document must be non-empty")
        url = self.cfg.endpoint.rstrip("/") + "/score"
        body = _post_with_retries(
            url, {"question": question, "document": document}, self.cfg, self.session, self._sleep
        )
        if "score" not in body or not isinstance(body["score"], (int, float)):
            raise MalformedResponseError(f"missing numeric 'score' in response: {body}")
        return RelevanceScore.from_backend(float(body["score"]))


class HttpGenerator:
    """Generator client speaking the POST /generate wire format."""

    def __init__(
        self,
        cfg: BackendConfig,
        max_tokens: int = 128,
        session: Optional[requests.Session] = None,
        sleep: Optional[Callable[[float], None]] = None,
    ):
        self.cfg = cfg
        self.max_tokens = max_tokens
        self.session = session or requests.Session()
        self._sleep = sleep if sleep is not None else time.sleep

    def generate(self, prompt: str) -> str:
        url = self.cfg.endpoint.rstrip("/") + "/generate"
        body = _post_with_retries(
            url, {"prompt": prompt, "max_tokens": self.max_tokens}, self.cfg, self.session, self._sleep
        )
        if "text" not in body or not isinstance(body["text"], str):
            raise MalformedResponseError(f"missing 'text' in response: {body}")
        if not body["text"]:
            raise MalformedResponseError("generator returned empty text")
        return body["text"]


def _cache_key(question: str, document: str) -> str:
    formatted = format_evaluator_input(question, document)
    return hashlib.sha256(formatted.encode("utf-8")).hexdigest()


class CachingEvaluator:
    """Memoizes an evaluator backend keyed by content hash of the pair.

    Guarantees at most one inner call per distinct (question, document)
    pair per process, which both bounds cost (refinement re-scores strips
    heavily) and makes runs with a flaky remote backend reproducible.
    Thread-safe; an optional cache_dir persists entries across runs.
    """

    def __init__(self, inner: EvaluatorBackend, cache_dir: Optional[Path] = None):
        self.inner = inner
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self._mem: dict[str, RelevanceScore] = {}
        self._lock = threading.Lock()
        self._key_locks: dict[str, threading.Lock] = {}

    def score(self, question: str, document: str) -> RelevanceScore:
        key = _cache_key(question, document)
        with self._lock:
            if key in self._mem:
                return self._mem[key]
            key_lock = self._key_locks.setdefault(key, threading.Lock())
        # Per-key lock: concurrent calls for the same pair wait for the one
        # in flight instead of hitting the backend twice; distinct pairs
        # still fan out freely.
        with key_lock:
            with self._lock:
                if key in self._mem:
                    return self._mem[key]
            score = self._load_disk(key)
            if score is None:
                score = self.inner.score(question, document)
                self._store_disk(key, score)
            with self._lock:
                self._mem[key] = score
                self._key_locks.pop(key, None)
            return score

    def _load_disk(self, key: str) -> Optional[RelevanceScore]:
        if not self.cache_dir:
            return None
        path = self.cache_dir / f"{key}.json"
        if not path.exists():
            return None
        try:
            return RelevanceScore(json.loads(path.read_text())["score"])
        except (ValueError, KeyError, OSError):
            return None

    def _store_disk(self, key: str, score: RelevanceScore) -> None:
        if not self.cache_dir:
            return
        path = self.cache_dir / f"{key}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps({"score": score.value}))
        tmp.replace(path)
