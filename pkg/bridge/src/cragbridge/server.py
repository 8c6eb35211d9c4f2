"""FastAPI app and CLI entrypoint.

Wire protocol (shared with the orchestration engine):

- POST /score    {"question": str, "document": str} -> {"score": float in [-1, 1]}
- POST /generate {"prompt": str, "max_tokens": int} -> {"text": str}
- GET  /healthz  -> 200

Schema violations return 400 (not FastAPI's default 422); model failures
return 500. Requests are handled serially — the engine's retry layer is
responsible for saturation.
"""

from __future__ import annotations

import argparse
import logging
import sys

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import BridgeConfig
from .models import Evaluator, Generator, build_models

logger = logging.getLogger(__name__)


class ScoreRequest(BaseModel):
    question: str = Field(min_length=1)
    document: str = Field(min_length=1)


class GenerateRequest(BaseModel):
    prompt: str = Field(min_length=1)
    max_tokens: int = Field(default=128, ge=1)


def create_app(evaluator: Evaluator, generator: Generator) -> FastAPI:
    app = FastAPI(title="crag-bridge")

    @app.exception_handler(RequestValidationError)
    async def _schema_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(Exception)
    async def _model_error(request: Request, exc: Exception):
        logger.exception("model failure")
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/score")
    def score(req: ScoreRequest):
        value = evaluator.score(req.question, req.document)
        # Belt and braces: the wire contract promises [-1, 1] regardless
        # of what the model head emits.
        return {"score": max(-1.0, min(1.0, float(value)))}

    @app.post("/generate")
    def generate(req: GenerateRequest):
        return {"text": generator.generate(req.prompt, req.max_tokens)}

    return app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="crag-bridge", description=__doc__)
    parser.add_argument("--port", type=int, default=8200)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument(
        "--models",
        choices=["stub", "real"],
        default="stub",
        help="stub: deterministic lexical models; real: load checkpoints",
    )
    parser.add_argument("--evaluator-checkpoint")
    parser.add_argument("--generator-checkpoint")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-input-tokens", type=int, default=512)
    parser.add_argument("--fp16", action="store_true")
    args = parser.parse_args(argv)

    defaults = BridgeConfig()
    cfg = BridgeConfig(
        evaluator_checkpoint=args.evaluator_checkpoint or defaults.evaluator_checkpoint,
        generator_checkpoint=args.generator_checkpoint or defaults.generator_checkpoint,
        device=args.device,
        max_input_tokens=args.max_input_tokens,
        fp16=args.fp16,
    )
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    evaluator, generator = build_models(cfg, args.models)
    app = create_app(evaluator, generator)

    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
