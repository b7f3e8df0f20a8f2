"""Command-line entry point wiring all modules together.

Subcommands: ingest, search-eval, run, batch-run, eval, export-sft, split,
fixtures. Exit codes: 0 success; 1 operation failed on its input data;
2 usage or configuration error. ``run`` additionally encodes the outcome
for scripting: 0 finished, 3 step budget exceeded, 4 parse failure,
5 prompt overflow.

Options can come from a JSON config file (``--config``); explicit flags
win over config values. Secrets only travel via environment variables
(``FINAGENT_API_TOKEN`` for the HTTP backend).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from . import fixtures as fixture_mod
from .catalog import CatalogError, category_report, ingest_catalog
from .evaluation import (
    EvalError,
    compute_metrics,
    export_sft,
    format_report,
    load_trajectories,
    parse_score_file,
    report_csv,
    split_dataset,
)
from .llm import HttpBackend, LlmConfig, ScriptedBackend, load_templates
from .model import InterruptCause, Query, encode_trajectory
from .orchestrator import Orchestrator, OrchestratorConfig, VirtualClock
from .sandbox import SandboxLimits, parse_runtime_command
from .search import (
    HashEmbedder,
    SearchConfig,
    cosine_topk,
    index_catalog,
    rank_in_category,
    score_retrieval,
)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
RUN_EXIT_CODES = {
    InterruptCause.STEP_BUDGET_EXCEEDED: 3,
    InterruptCause.PARSE_FAILURE: 4,
    InterruptCause.PROMPT_OVERFLOW: 5,
}


class CliError(Exception):
    """Configuration or usage problem; maps to exit code 2."""


def _load_config(path: Optional[str]) -> dict[str, Any]:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path!r}: {exc}") from None


def _setting(args: argparse.Namespace, config: dict[str, Any], key: str, default=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    return config.get(key, default)


def _require_path(value: Optional[str], what: str) -> Path:
    if not value:
        raise CliError(f"{what} is required (flag or config)")
    path = Path(value)
    if not path.exists():
        raise CliError(f"{what} does not exist: {path}")
    return path


def _read_queries(path: Path) -> list[Query]:
    queries = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            record = json.loads(line)
            queries.append(
                Query(
                    id=record["id"],
                    text=record["text"],
                    metadata=record.get("metadata", {}),
                )
            )
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise CliError(f"{path}:{line_no}: bad query record: {exc}") from None
    return queries


class _Engine:
    """Catalog, index, and config loaded once; orchestrators built per run
    (the scripted backend is stateful, so each run needs a fresh one)."""

    def __init__(self, args: argparse.Namespace, config: dict[str, Any]):
        catalog_path = _require_path(_setting(args, config, "catalog"), "--catalog")
        self.catalog = ingest_catalog(catalog_path)
        self.embedder = HashEmbedder(dim=int(_setting(args, config, "dim", 64)))
        self.index = index_catalog(self.catalog, self.embedder)
        runtime = parse_runtime_command(
            _setting(args, config, "runtime", sys.executable + " {script}")
        )
        self.config = OrchestratorConfig(
            L=int(_setting(args, config, "max_steps", 10)),
            llm=LlmConfig(
                context_budget=int(_setting(args, config, "context_budget", 8192)),
                output_budget=int(_setting(args, config, "output_budget", 2048)),
            ),
            search=SearchConfig(
                M=int(_setting(args, config, "candidate_cap", 10)),
                direct_threshold=int(_setting(args, config, "direct_threshold", 64)),
            ),
            limits=SandboxLimits(
                wall_time=float(_setting(args, config, "wall_time", 30.0)),
            ),
            runtime=runtime,
            artifact_dir=_setting(args, config, "artifact_dir"),
        )
        self._args = args
        self._file_config = config

    def orchestrator(self, transcript: Optional[Path]) -> Orchestrator:
        backend_kind = _setting(self._args, self._file_config, "backend", "scripted")
        if backend_kind == "scripted":
            if transcript is None:
                raise CliError("scripted backend requires --transcript")
            backend = ScriptedBackend.from_file(transcript)
            clock = VirtualClock()
        elif backend_kind == "http":
            endpoint = _setting(self._args, self._file_config, "endpoint")
            if not endpoint:
                raise CliError("http backend requires --endpoint")
            backend = HttpBackend(
                endpoint=endpoint,
                model=_setting(self._args, self._file_config, "model", "default"),
                token=os.environ.get("FINAGENT_API_TOKEN"),
            )
            clock = None
        else:
            raise CliError(f"unknown backend {backend_kind!r} (scripted|http)")
        return Orchestrator(
            catalog=self.catalog,
            index=self.index,
            backend=backend,
            config=self.config,
            embedder=self.embedder,
            clock=clock,
        )


def cmd_ingest(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    path = _require_path(_setting(args, config, "catalog"), "--catalog")
    try:
        catalog = ingest_catalog(path)
    except CatalogError as exc:
        print(f"ingest failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    print(category_report(catalog))
    return EXIT_OK


def cmd_search_eval(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    catalog = ingest_catalog(_require_path(_setting(args, config, "catalog"), "--catalog"))
    queries_path = _require_path(args.queries, "--queries")
    embedder = HashEmbedder(dim=int(_setting(args, config, "dim", 64)))
    index = index_catalog(catalog, embedder)

    records = []
    for line_no, line in enumerate(queries_path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise CliError(f"{queries_path}:{line_no}: {exc}") from None

    gold = {r["id"]: set(r["gold"]) for r in records}
    unfiltered = {}
    filtered = {}
    for r in records:
        query_vec = embedder.embed(r["task"])
        unfiltered[r["id"]] = [name for name, _ in cosine_topk(index, query_vec, k=10)]
        filtered[r["id"]] = rank_in_category(
            catalog, index, r["category"], r["task"], embedder, k=10
        )

    methods = (("embedding", unfiltered), ("category+embedding", filtered))
    header = (
        f"{'method':<22}{'Top5 all-right':>15}{'Top5 all-wrong':>15}"
        f"{'Top10 all-right':>16}{'Top10 all-wrong':>16}"
    )
    print(header)
    for label, results in methods:
        s5 = score_retrieval(results, gold, k=5)
        s10 = score_retrieval(results, gold, k=10)
        print(
            f"{label:<22}{s5.all_right_rate:>15.2f}{s5.all_wrong_rate:>15.2f}"
            f"{s10.all_right_rate:>16.2f}{s10.all_wrong_rate:>16.2f}"
        )
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    transcript = None
    transcript_value = _setting(args, config, "transcript")
    if transcript_value:
        transcript = _require_path(transcript_value, "--transcript")
    if not args.query:
        raise CliError("--query is required")
    orchestrator = _Engine(args, config).orchestrator(transcript)
    query = Query(id=args.query_id, text=args.query)
    trajectory = orchestrator.run(query)

    log_path = Path(_setting(args, config, "log", f"{query.id}.log"))
    log_path.parent.mkdir(parents=True, exist_ok=True)
    log_path.write_bytes(encode_trajectory(trajectory))

    status = "finished" if trajectory.status.finished else trajectory.status.cause.value
    print(
        f"{query.id}: {status} steps={len(trajectory.steps)} "
        f"llm_calls={trajectory.llm_calls} tool_calls={trajectory.tool_calls} "
        f"log={log_path}"
    )
    if trajectory.status.finished:
        return EXIT_OK
    return RUN_EXIT_CODES[trajectory.status.cause]


def cmd_batch_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    queries = _read_queries(_require_path(args.queries, "--queries"))
    transcripts_dir = _require_path(args.transcripts, "--transcripts")
    log_dir = Path(args.log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    engine = _Engine(args, config)  # catalog and index shared across workers

    def one(query: Query) -> tuple[str, str]:
        transcript = transcripts_dir / f"{query.id}.jsonl"
        if not transcript.exists():
            return query.id, "missing transcript"
        trajectory = engine.orchestrator(transcript).run(query)
        (log_dir / f"{query.id}.log").write_bytes(encode_trajectory(trajectory))
        return query.id, (
            "finished" if trajectory.status.finished else trajectory.status.cause.value
        )

    failures = 0
    with concurrent.futures.ThreadPoolExecutor(max_workers=args.workers) as pool:
        for query_id, outcome in pool.map(one, queries):
            print(f"{query_id}: {outcome}")
            if outcome == "missing transcript":
                failures += 1
    return EXIT_FAILED if failures else EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    trajectories, skipped = load_trajectories(_require_path(args.logs, "--logs"))
    for line in skipped:
        print(f"skipped: {line}", file=sys.stderr)
    scores = parse_score_file(_require_path(args.scores, "--scores"))
    try:
        report = compute_metrics(trajectories, scores)
    except EvalError as exc:
        print(f"eval failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    print(format_report(report))
    if args.report:
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(report_csv(report), encoding="utf-8")
        print(f"report written to {args.report}")
    return EXIT_OK


def cmd_export_sft(args: argparse.Namespace) -> int:
    trajectories, skipped = load_trajectories(_require_path(args.logs, "--logs"))
    for line in skipped:
        print(f"skipped: {line}", file=sys.stderr)
    counts = export_sft(trajectories, load_templates(args.templates), args.out)
    for task, count in counts.items():
        print(f"{task.value}: {count}")
    return EXIT_OK


def cmd_split(args: argparse.Namespace) -> int:
    queries = _read_queries(_require_path(getattr(args, "in"), "--in"))
    try:
        result = split_dataset(queries, seed=args.seed)
    except EvalError as exc:
        print(f"split failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    print(
        f"unique={len(result.train) + len(result.eval) + len(result.test)} "
        f"duplicates_removed={result.n_duplicates}"
    )
    print(f"train={len(result.train)} eval={len(result.eval)} test={len(result.test)}")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, slice_ in (
            ("train", result.train),
            ("eval", result.eval),
            ("test", result.test),
        ):
            with (out / f"{name}.jsonl").open("w", encoding="utf-8") as handle:
                for q in slice_:
                    handle.write(
                        json.dumps(
                            {"id": q.id, "text": q.text, "metadata": dict(q.metadata)}
                        )
                        + "\n"
                    )
        print(f"splits written to {out}")
    return EXIT_OK


def cmd_fixtures(args: argparse.Namespace) -> int:
    names = fixture_mod.write_golden_fixtures(args.out)
    for name in names:
        print(f"wrote {Path(args.out) / name}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finagent",
        description="Financial tool-using agent engine: run episodes, "
        "evaluate trajectories, export SFT data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file; flags override its values")

    p = sub.add_parser("ingest", help="validate a catalog file and report per-category counts")
    add_common(p)
    p.add_argument("--catalog", help="catalog file (finagent-catalog v1)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("search-eval", help="score tool retrieval methods on a query/gold fixture")
    add_common(p)
    p.add_argument("--catalog")
    p.add_argument("--queries", help="JSONL with id/task/category/gold fields")
    p.add_argument("--dim", type=int)
    p.set_defaults(func=cmd_search_eval)

    p = sub.add_parser("run", help="run one query to a trajectory log")
    add_common(p)
    p.add_argument("--query", help="the question text")
    p.add_argument("--query-id", default="q-cli", help="run id used in the log")
    p.add_argument("--catalog")
    p.add_argument("--backend", choices=["scripted", "http"])
    p.add_argument("--transcript", help="scripted backend transcript (JSONL)")
    p.add_argument("--endpoint", help="http backend URL")
    p.add_argument("--model", help="http backend model name")
    p.add_argument("--log", help="trajectory log output path")
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--candidate-cap", dest="candidate_cap", type=int)
    p.add_argument("--context-budget", dest="context_budget", type=int)
    p.add_argument("--runtime", help='sandbox command, e.g. "python3 {script}"')
    p.add_argument("--artifact-dir", dest="artifact_dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch-run", help="run a query file, one log per query")
    add_common(p)
    p.add_argument("--queries", help="JSONL with id/text per line")
    p.add_argument("--transcripts", help="directory of per-query transcript files (<id>.jsonl)")
    p.add_argument("--log-dir", dest="log_dir", default="logs")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--catalog")
    p.add_argument("--backend", choices=["scripted"])
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--runtime")
    p.set_defaults(func=cmd_batch_run)

    p = sub.add_parser("eval", help="compute metrics from trajectory logs and a score file")
    add_common(p)
    p.add_argument("--logs", help="directory of *.log trajectory files")
    p.add_argument("--scores", help="score file: query rater score per line")
    p.add_argument("--report", help="also write a CSV report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-sft", help="export the four per-task SFT datasets")
    add_common(p)
    p.add_argument("--logs")
    p.add_argument("--out", default="sft")
    p.add_argument("--templates", help="template directory (defaults to packaged)")
    p.set_defaults(func=cmd_export_sft)

    p = sub.add_parser("split", help="deduplicate and split a query file 8:1:1")
    add_common(p)
    p.add_argument("--in", dest="in", help="JSONL query file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", dest="out_dir")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("fixtures", help="regenerate the shipped synthetic fixtures")
    add_common(p)
    p.add_argument("--out", default="fixtures")
    p.set_defaults(func=cmd_fixtures)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CatalogError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
