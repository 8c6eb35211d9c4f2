"""Command-line entrypoint: run, eval, explain, wiki-fetch.

Settings merge with precedence flags > environment > config file >
defaults. Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

from . import attribution, evaluation, pipeline, wiki
from .backends import (
    BackendConfig,
    HttpEvaluator,
    HttpGenerator,
    StubEvaluator,
    StubGenerator,
)
from .types import PipelineResult, Thresholds

logger = logging.getLogger(__name__)

ENV_EVALUATOR_URL = "CRAG_EVALUATOR_URL"
ENV_GENERATOR_URL = "CRAG_GENERATOR_URL"
ENV_WIKI_ENDPOINT = "CRAG_WIKI_ENDPOINT"
ENV_CACHE_DIR = "CRAG_CACHE_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # Usage problems exit 1 (argparse's default is 2, reserved here for
    # runtime failures).
    def error(self, message: str) -> "NoReturn":  # noqa: F821
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _resolve(flag_value, env_var: Optional[str], file_cfg: dict, file_key: str, default=None):
    if flag_value is not None:
        return flag_value
    if env_var and os.environ.get(env_var):
        return os.environ[env_var]
    if file_key in file_cfg:
        return file_cfg[file_key]
    return default


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="opencrag", description="Corrective-RAG orchestration engine")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    run = sub.add_parser("run", help="run a dataset through the pipeline")
    run.add_argument("--dataset", required=True, help="JSONL dataset path")
    run.add_argument("--mode", choices=["popqa", "arc"], default="popqa")
    run.add_argument("--evaluator-url")
    run.add_argument("--generator-url")
    run.add_argument("--stub-backends", action="store_true", help="use in-process deterministic stubs")
    run.add_argument("--web-search", choices=["on", "off"], default="off")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--limit", type=int, help="process only the first N questions")
    run.add_argument("--max-docs", type=int, default=10)
    run.add_argument("--out", required=True, help="results JSONL output path")
    run.add_argument("--report", required=True, help="report JSON output path")
    run.add_argument("--report-csv", help="optional per-(qtype, action) CSV matrix")
    run.add_argument("--wiki-endpoint")
    run.add_argument("--cache-dir")
    run.add_argument("--config", help="JSON config file (lowest-precedence settings)")

    ev = sub.add_parser("eval", help="re-aggregate a results file into a report")
    ev.add_argument("--results", required=True)
    ev.add_argument("--report", required=True)
    ev.add_argument("--report-csv")

    ex = sub.add_parser("explain", help="token attribution for one evaluator decision")
    ex.add_argument("--question", required=True)
    ex.add_argument("--document", required=True)
    ex.add_argument("--method", choices=["exact", "partition"], default="exact")
    ex.add_argument("--budget", type=int)
    ex.add_argument("--evaluator-url")
    ex.add_argument("--out", help="write attribution JSON here instead of stdout")

    wf = sub.add_parser("wiki-fetch", help="resolve a question through the Wikipedia pipeline")
    wf.add_argument("question")
    wf.add_argument("--endpoint")
    wf.add_argument("--cache-dir")

    return parser


def _make_backends(args, file_cfg: dict):
    if args.stub_backends:
        return StubEvaluator(), StubGenerator()
    evaluator_url = _resolve(args.evaluator_url, ENV_EVALUATOR_URL, file_cfg, "evaluator_url")
    generator_url = _resolve(args.generator_url, ENV_GENERATOR_URL, file_cfg, "generator_url")
    if not evaluator_url or not generator_url:
        raise UsageError("need --evaluator-url and --generator-url (or --stub-backends)")
    cache_dir = _resolve(args.cache_dir, ENV_CACHE_DIR, file_cfg, "cache_dir")
    from .backends import CachingEvaluator

    evaluator = CachingEvaluator(
        HttpEvaluator(BackendConfig(endpoint=evaluator_url)),
        cache_dir=Path(cache_dir) / "scores" if cache_dir else None,
    )
    generator = HttpGenerator(BackendConfig(endpoint=generator_url))
    return evaluator, generator


def _cmd_run(args) -> int:
    file_cfg = {}
    if args.config:
        file_cfg = json.loads(Path(args.config).read_text())

    mode = pipeline.DatasetMode(args.mode)
    if mode is pipeline.DatasetMode.POPQA:
        questions = evaluation.ingest_popqa(args.dataset)
    else:
        questions = evaluation.ingest_arc(args.dataset)
    if args.limit is not None:
        questions = questions[: args.limit]

    evaluator, generator = _make_backends(args, file_cfg)
    web_search = args.web_search == "on"
    wiki_client = None
    if web_search:
        endpoint = _resolve(args.wiki_endpoint, ENV_WIKI_ENDPOINT, file_cfg, "wiki_endpoint",
                            wiki.WikiConfig().api_endpoint)
        cache_dir = _resolve(args.cache_dir, ENV_CACHE_DIR, file_cfg, "cache_dir")
        wiki_cfg = wiki.WikiConfig(
            api_endpoint=endpoint,
            cache_dir=Path(cache_dir) / "wiki" if cache_dir else None,
        )
        wiki_client = wiki.HttpWikiClient(wiki_cfg)
    else:
        wiki_cfg = wiki.WikiConfig()

    cfg = pipeline.PipelineConfig(
        thresholds=Thresholds(),
        max_docs=args.max_docs,
        dataset_mode=mode,
        enable_web_search=web_search,
        workers=args.workers,
        wiki_config=wiki_cfg,
    )

    # Chunked execution so an interrupt still leaves the completed prefix
    # on disk.
    results: list[PipelineResult] = []
    chunk = max(cfg.workers * 8, 32)
    try:
        for start in range(0, len(questions), chunk):
            batch, _ = pipeline.run_dataset(
                questions[start : start + chunk], cfg, evaluator, generator, wiki_client
            )
            results.extend(batch)
    except KeyboardInterrupt:
        logger.warning("interrupted; writing %d partial results", len(results))

    report = evaluation.aggregate(results)
    _write_outputs(results, report, args.out, args.report, args.report_csv)
    if report.errors:
        print(f"{report.errors} question(s) errored", file=sys.stderr)
        return 2
    return 0


def _write_outputs(results, report, out_path, report_path, csv_path) -> None:
    lines = [json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False) for r in results]
    _atomic_write(Path(out_path), "\n".join(lines) + ("\n" if lines else ""))
    _atomic_write(
        Path(report_path),
        json.dumps(report.to_dict(), sort_keys=True, ensure_ascii=False, indent=2) + "\n",
    )
    if csv_path:
        evaluation.write_report_csv(report, csv_path)


def _cmd_eval(args) -> int:
    results = []
    with open(args.results, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                results.append(PipelineResult.from_dict(json.loads(line)))
    report = evaluation.aggregate(results)
    _atomic_write(
        Path(args.report),
        json.dumps(report.to_dict(), sort_keys=True, ensure_ascii=False, indent=2) + "\n",
    )
    if args.report_csv:
        evaluation.write_report_csv(report, args.report_csv)
    return 0


def _cmd_explain(args) -> int:
    evaluator = (
        HttpEvaluator(BackendConfig(endpoint=args.evaluator_url))
        if args.evaluator_url
        else StubEvaluator()
    )
    attr = attribution.score_attribution(
        args.question,
        args.document,
        make_rendered_scorer(evaluator),
        method=attribution.AttributionMethod(args.method),
        budget=args.budget,
    )
    payload = json.dumps(
        {"question": args.question, "document": args.document, **attr.to_dict()},
        indent=2,
        ensure_ascii=False,
    )
    if args.out:
        _atomic_write(Path(args.out), payload + "\n")
    else:
        print(payload)
    return 0


def make_rendered_scorer(evaluator):
    """Adapt an EvaluatorBackend into a scorer over rendered masked
    strings, splitting at the separator token; inputs where either side
    masked away entirely score 0.0.
    """
    from .backends import SEP_TOKEN

    def scorer(rendered: str) -> float:
        if f" {SEP_TOKEN} " in rendered:
            question, document = rendered.split(f" {SEP_TOKEN} ", 1)
        else:
            question, document = rendered, ""
        if not question.strip() or not document.strip():
            return 0.0
        return evaluator.score(question, document).value

    return scorer


def _cmd_wiki_fetch(args) -> int:
    endpoint = _resolve(args.endpoint, ENV_WIKI_ENDPOINT, {}, "wiki_endpoint",
                        wiki.WikiConfig().api_endpoint)
    cache_dir = _resolve(args.cache_dir, ENV_CACHE_DIR, {}, "cache_dir")
    cfg = wiki.WikiConfig(
        api_endpoint=endpoint,
        cache_dir=Path(cache_dir) / "wiki" if cache_dir else None,
    )
    client = wiki.HttpWikiClient(cfg)
    entity = wiki.extract_entity(args.question)
    result = wiki.fetch(entity if entity is not None else args.question, cfg, client)
    print(json.dumps({"entity": entity, **result.to_dict()}, indent=2, ensure_ascii=False))
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "eval": _cmd_eval,
        "explain": _cmd_explain,
        "wiki-fetch": _cmd_wiki_fetch,
    }
    try:
        return handlers[args.subcommand](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, evaluation.IngestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
