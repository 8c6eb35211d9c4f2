"""Wikipedia fallback retrieval: entity extraction plus four ordered
lookup strategies (direct page, typed suffix, search API, disambiguation
resolution).

All traffic goes through a pluggable client interface so tests can run
against an in-process fake with a canned corpus; the real client speaks
the MediaWiki action API with a token-bucket rate limiter and a disk
cache.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

import requests

logger = logging.getLogger(__name__)

DEFAULT_TYPED_SUFFIXES = (
    "(politician)",
    "(singer)",
    "(actor)",
    "(writer)",
    "(film)",
    "(song)",
    "(footballer)",
    "(musician)",
)


class Strategy(str, enum.Enum):
    DIRECT = "direct"
    TYPED_SUFFIX = "typed-suffix"
    SEARCH_API = "search-api"
    DISAMBIGUATION = "disambiguation"


@dataclass(frozen=True)
class WikiResult:
    page_title: str = ""
    extract_text: str = ""
    strategy_used: Optional[Strategy] = None
    hit: bool = False
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "page_title": self.page_title,
            "extract_text": self.extract_text,
            "strategy_used": self.strategy_used.value if self.strategy_used else None,
            "hit": self.hit,
            "error": self.error,
        }


@dataclass(frozen=True)
class WikiConfig:
    api_endpoint: str = "https://en.wikipedia.org/w/api.php"
    rate_limit: float = 10.0  # max requests per second
    cache_dir: Optional[Path] = None
    typed_suffixes: tuple[str, ...] = DEFAULT_TYPED_SUFFIXES
    search_limit: int = 5

    def __post_init__(self) -> None:
        if self.rate_limit <= 0:
            raise ValueError("rate_limit must be positive")


@dataclass(frozen=True)
class WikiPage:
    title: str
    extract: str
    is_disambiguation: bool = False
    links: tuple[str, ...] = ()


class WikiClient(Protocol):
    """Minimal surface the fallback strategies need."""

    def get_page(self, title: str) -> Optional[WikiPage]: ...

    def search(self, query: str, limit: int) -> list[str]: ...


# Entity extraction ---------------------------------------------------------

# Ordered question templates covering the nine PopQA forms. Matching is
# case-insensitive; the capture keeps the original casing for page lookup.
_ENTITY_PATTERNS = [
    re.compile(r"^what is (.+?)'s occupation\??$", re.IGNORECASE),
    re.compile(r"^in what (?:city|town) was (.+?) born\??$", re.IGNORECASE),
    re.compile(r"^in what country (?:is|was) (.+?)(?: located)?\??$", re.IGNORECASE),
    re.compile(r"^what sport does (.+?) play\??$", re.IGNORECASE),
    re.compile(r"^who (?:is|was) the author of (.+?)\??$", re.IGNORECASE),
    re.compile(r"^who (?:is|was) the composer of (.+?)\??$", re.IGNORECASE),
    re.compile(r"^who (?:is|was) the director of (.+?)\??$", re.IGNORECASE),
    re.compile(r"^who directed (.+?)\??$", re.IGNORECASE),
    re.compile(r"^who composed (.+?)\??$", re.IGNORECASE),
    re.compile(r"^who wrote (.+?)\??$", re.IGNORECASE),
    re.compile(r"^what genre is (.+?)\??$", re.IGNORECASE),
    re.compile(
        r"^what is the (?:religion|genre|occupation|capital) of (.+?)\??$", re.IGNORECASE
    ),
]


def extract_entity(question: str) -> Optional[str]:
    """Pull the primary entity out of a templated question.

    Returns None when no template matches; possessive markers and
    surrounding quotes/whitespace are stripped from the captured span.
    """
    text = question.strip()
    for pattern in _ENTITY_PATTERNS:
        m = pattern.match(text)
        if m:
            entity = m.group(1).strip().strip('"“”')
            if entity.lower().endswith("'s"):
                entity = entity[:-2]
            return entity.strip() or None
    return None


# Rate limiting -------------------------------------------------------------


class TokenBucket:
    """Rate limiter: at most `rate` requests in any 1-second window.

    Implemented as a next-free-slot scheduler with a minimum spacing of
    1/rate between grants (no burst capacity: a startup burst plus the
    refill could exceed the per-window bound). The spacing carries a one
    part per billion safety margin so accumulated float rounding can
    never squeeze an extra grant into a window. The clock and sleep
    functions are injectable so tests can drive a virtual clock.
    """

    def __init__(
        self,
        rate: float,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate
        self._interval = (1.0 / rate) * (1.0 + 1e-9)
        self._clock = clock
        self._sleep = sleep
        self._next_free = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            now = self._clock()
            start = max(now, self._next_free)
            wait = start - now
            self._next_free = start + self._interval
        if wait > 0:
            self._sleep(wait)


# HTTP client ---------------------------------------------------------------


class HttpWikiClient:
    """MediaWiki action API client with rate limiting and a disk cache."""

    def __init__(
        self,
        cfg: WikiConfig,
        session: Optional[requests.Session] = None,
        bucket: Optional[TokenBucket] = None,
    ):
        self.cfg = cfg
        self.session = session or requests.Session()
        self.bucket = bucket or TokenBucket(cfg.rate_limit)
        if cfg.cache_dir:
            Path(cfg.cache_dir).mkdir(parents=True, exist_ok=True)

    def _request(self, params: dict) -> dict:
        key = hashlib.sha256(
            json.dumps(params, sort_keys=True).encode("utf-8")
        ).hexdigest()
        cached = self._cache_load(key)
        if cached is not None:
            return cached
        self.bucket.acquire()
        resp = self.session.get(self.cfg.api_endpoint, params=params, timeout=30)
        resp.raise_for_status()
        body = resp.json()
        self._cache_store(key, body)
        return body

    def _cache_load(self, key: str) -> Optional[dict]:
        if not self.cfg.cache_dir:
            return None
        path = Path(self.cfg.cache_dir) / f"{key}.json"
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text())
        except (ValueError, OSError):
            return None

    def _cache_store(self, key: str, body: dict) -> None:
        if not self.cfg.cache_dir:
            return
        path = Path(self.cfg.cache_dir) / f"{key}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(body))
        tmp.replace(path)  # atomic on POSIX

    def get_page(self, title: str) -> Optional[WikiPage]:
        body = self._request(
            {
                "action": "query",
                "prop": "extracts|pageprops|links",
                "titles": title,
                "exintro": 1,
                "explaintext": 1,
                "redirects": 1,
                "pllimit": 50,
                "format": "json",
            }
        )
        pages = body.get("query", {}).get("pages", {})
        for page_id, page in pages.items():
            if page_id == "-1" or "missing" in page:
                return None
            return WikiPage(
                title=page.get("title", title),
                extract=(page.get("extract") or "").strip(),
                is_disambiguation="disambiguation" in page.get("pageprops", {}),
                links=tuple(link["title"] for link in page.get("links", [])),
            )
        return None

    def search(self, query: str, limit: int) -> list[str]:
        body = self._request(
            {
                "action": "query",
                "list": "search",
                "srsearch": query,
                "srlimit": limit,
                "format": "json",
            }
        )
        return [hit["title"] for hit in body.get("query", {}).get("search", [])]


# Fallback strategies -------------------------------------------------------


def _usable(page: Optional[WikiPage]) -> bool:
    return page is not None and bool(page.extract) and not page.is_disambiguation


def fetch(entity: str, cfg: WikiConfig, client: WikiClient) -> WikiResult:
    """Try the four lookup strategies strictly in order, stopping at the
    first page with a non-empty, non-disambiguation extract.

    Network failures count as a miss (hit=False with the error recorded),
    never as an abort: a dataset run should survive flaky connectivity.
    """
    if not entity:
        raise ValueError("entity must be non-empty")
    try:
        return _fetch_inner(entity, cfg, client)
    except requests.RequestException as exc:
        logger.warning("wiki fetch failed for %r: %s", entity, exc)
        return WikiResult(hit=False, error=str(exc))


def _fetch_inner(entity: str, cfg: WikiConfig, client: WikiClient) -> WikiResult:
    # 1. direct page lookup
    page = client.get_page(entity)
    if _usable(page):
        return WikiResult(page.title, page.extract, Strategy.DIRECT, hit=True)

    # 2. typed suffix lookup, e.g. "X (politician)"
    for suffix in cfg.typed_suffixes:
        suffixed = client.get_page(f"{entity} {suffix}")
        if _usable(suffixed):
            return WikiResult(suffixed.title, suffixed.extract, Strategy.TYPED_SUFFIX, hit=True)

    # 3. search API, first usable result wins
    for title in client.search(entity, cfg.search_limit):
        candidate = client.get_page(title)
        if _usable(candidate):
            return WikiResult(candidate.title, candidate.extract, Strategy.SEARCH_API, hit=True)

    # 4. resolve one hop through a disambiguation page: first listed link
    #    whose title contains the entity string
    disambig = page if (page is not None and page.is_disambiguation) else None
    if disambig is None:
        candidate = client.get_page(f"{entity} (disambiguation)")
        if candidate is not None and candidate.is_disambiguation:
            disambig = candidate
    if disambig is not None:
        for link in disambig.links:
            if entity.lower() in link.lower():
                resolved = client.get_page(link)
                if _usable(resolved):
                    return WikiResult(
                        resolved.title, resolved.extract, Strategy.DISAMBIGUATION, hit=True
                    )
                break  # only the first matching link is tried

    return WikiResult(hit=False)


def hit_rate(results: Sequence[WikiResult]) -> float:
    """Fraction of results with hit=True."""
    if not results:
        raise ValueError("hit_rate requires at least one result")
    return sum(1 for r in results if r.hit) / len(results)


def render_hit_rate(results: Sequence[WikiResult]) -> str:
    return f"{hit_rate(results):.3f}"
