"""Serve the stub-model bridge over real HTTP and drive the orchestration
engine's CLI against it, exactly as a production deployment would."""

import threading
import time
from pathlib import Path

import pytest
import uvicorn

from cragbridge.models import LexicalEvaluator, TemplateGenerator
from cragbridge.server import create_app

opencrag_cli = pytest.importorskip("opencrag.cli")

SMOKE5 = Path(__file__).parent / "data" / "smoke5.jsonl"


@pytest.fixture(scope="module")
def bridge_url():
    app = create_app(LexicalEvaluator(), TemplateGenerator())
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("bridge server failed to start")
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def test_healthz_over_http(bridge_url):
    import requests

    assert requests.get(f"{bridge_url}/healthz", timeout=5).status_code == 200


def test_engine_run_against_bridge_exits_zero(bridge_url, tmp_path):
    out = tmp_path / "results.jsonl"
    report = tmp_path / "report.json"
    code = opencrag_cli.main(
        [
            "run",
            "--dataset",
            str(SMOKE5),
            "--mode",
            "popqa",
            "--limit",
            "5",
            "--evaluator-url",
            bridge_url,
            "--generator-url",
            bridge_url,
            "--out",
            str(out),
            "--report",
            str(report),
        ]
    )
    assert code == 0
    assert len(out.read_text().strip().splitlines()) == 5


def test_engine_run_is_reproducible_against_bridge(bridge_url, tmp_path):
    outputs = []
    for i in range(2):
        out = tmp_path / f"r{i}.jsonl"
        code = opencrag_cli.main(
            [
                "run",
                "--dataset",
                str(SMOKE5),
                "--evaluator-url",
                bridge_url,
                "--generator-url",
                bridge_url,
                "--out",
                str(out),
                "--report",
                str(tmp_path / f"rep{i}.json"),
            ]
        )
        assert code == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
