import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path

import pytest

from opencrag.backends import stub_generate, stub_score
from opencrag.wiki import WikiPage

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def fixture20_path() -> Path:
    return DATA_DIR / "fixture20.jsonl"


class FakeWikiClient:
    """In-process stand-in for the MediaWiki client with a call log.

    corpus maps title -> WikiPage; search_index maps query -> result
    titles. Every get_page/search call is appended to .calls so tests can
    assert strategy ordering.
    """

    def __init__(self, corpus: dict[str, WikiPage], search_index: dict[str, list[str]] | None = None):
        self.corpus = corpus
        self.search_index = search_index or {}
        self.calls: list[tuple[str, str]] = []

    def get_page(self, title: str):
        self.calls.append(("get_page", title))
        return self.corpus.get(title)

    def search(self, query: str, limit: int):
        self.calls.append(("search", query))
        return self.search_index.get(query, [])[:limit]


@pytest.fixture
def fake_wiki_client() -> FakeWikiClient:
    corpus = {
        "Plain Page": WikiPage("Plain Page", "Plain Page is an article."),
        "Empty Page": WikiPage("Empty Page", ""),
        "Shadow (politician)": WikiPage("Shadow (politician)", "Shadow is a politician."),
        "Hidden Gem": WikiPage("Hidden Gem", "Hidden Gem is a lake."),
        "Mercury": WikiPage(
            "Mercury",
            "",
            is_disambiguation=True,
            links=("Mercury (planet)", "Mercury (element)"),
        ),
        "Mercury (planet)": WikiPage("Mercury (planet)", "Mercury is the innermost planet."),
        "Mercury (element)": WikiPage("Mercury (element)", "Mercury is a chemical element."),
    }
    search_index = {"Hidden": ["Empty Page", "Hidden Gem"]}
    return FakeWikiClient(corpus, search_index)


class _BackendHandler(BaseHTTPRequestHandler):
    """Tiny stub-backed model server used to exercise the HTTP clients."""

    fail_next: list[int] = []  # status codes to emit before succeeding
    canned_score: float | None = None

    def do_POST(self):  # noqa: N802
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length) or b"{}")
        if type(self).fail_next:
            status = type(self).fail_next.pop(0)
            self.send_response(status)
            self.end_headers()
            return
        if self.path == "/score":
            if type(self).canned_score is not None:
                payload = {"score": type(self).canned_score}
            else:
                payload = {"score": stub_score(body["question"], body["document"]).value}
        elif self.path == "/generate":
            payload = {"text": stub_generate(body["prompt"])}
        else:
            self.send_response(404)
            self.end_headers()
            return
        data = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):  # keep test output quiet
        pass


@pytest.fixture
def backend_server():
    """Yields (base_url, handler_class) for a live stub model server."""
    _BackendHandler.fail_next = []
    _BackendHandler.canned_score = None
    server = HTTPServer(("127.0.0.1", 0), _BackendHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_port}", _BackendHandler
    finally:
        server.shutdown()
        thread.join(timeout=5)
