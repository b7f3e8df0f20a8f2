"""Run-level metrics, SFT trace export, and the dataset split.

Metrics follow the three evaluation axes: robustness (share of runs that
conclude with finish), helpfulness (0-3 expert rubric, interrupted runs
score 0 automatically), and efficiency (mean LLM / tool call frequencies).
"Best" is the share of runs whose mean rater score rounds to the ideal 3,
i.e. mean >= 2.5; that definition is isolated in one function.

SFT export re-derives each adopted LLM turn from the trajectory itself:
prompts are re-rendered through the same context helpers the orchestrator
uses (trajectories record everything the prompts need), and targets are the
canonical envelope serializations. Rejected-then-retried turns were never
recorded, so only adopted turns export.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence, Union

from . import grammar
from .llm import PromptTemplate, TaskKind
from .model import (
    ActionKind,
    DecodeError,
    InterruptCause,
    Query,
    Trajectory,
    decode_trajectory,
    splice_revision,
)
from .orchestrator import (
    MemoryState,
    action_context,
    code_context,
    grammar_render,
    meta_context,
    reflexion_context,
    step_task_kind,
    update_memory_caches,
)
from .sandbox import SandboxLimits, execute


class EvalError(Exception):
    pass


@dataclass(frozen=True)
class HelpfulnessScore:
    """One expert rating: 3 ideal, 2 correct but lower quality, 1 incorrect
    conclusions, 0 failed to conclude."""

    query_id: str
    rater_id: str
    score: int

    def __post_init__(self) -> None:
        if self.score not in (0, 1, 2, 3):
            raise EvalError(f"score must be an integer in 0..3, got {self.score}")


@dataclass(frozen=True)
class MetricsReport:
    best_rate: float
    helpful: float
    robust: float
    freq_tool: float
    freq_llm: float
    interrupt_breakdown: dict[InterruptCause, int]
    n_runs: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.best_rate <= 100.0 and 0.0 <= self.robust <= 100.0):
            raise EvalError("rates must be within [0, 100]")
        if not (0.0 <= self.helpful <= 3.0):
            raise EvalError("helpful must be within [0, 3]")


@dataclass(frozen=True)
class SftRecord:
    task: TaskKind
    prompt: str
    target: str
    run_id: str
    step_index: int  # 0 for the meta turn

    def __post_init__(self) -> None:
        if not self.target:
            raise EvalError("SFT target must be non-empty")


def _rounds_to_ideal(mean_score: float) -> bool:
    """The Best criterion: a run's mean rater score rounds to 3."""
    return mean_score >= 2.5


def parse_score_file(path: Union[str, Path]) -> list[HelpfulnessScore]:
    """Score file: one ``<query-id> <rater-id> <score>`` line per rating;
    blank lines and ``#`` comments ignored."""
    scores = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 3:
            raise EvalError(f"score line {line_no}: expected 'query rater score'")
        try:
            score = int(parts[2])
        except ValueError:
            raise EvalError(f"score line {line_no}: score must be an integer") from None
        scores.append(HelpfulnessScore(query_id=parts[0], rater_id=parts[1], score=score))
    return scores


def compute_metrics(
    trajectories: Sequence[Trajectory], scores: Sequence[HelpfulnessScore]
) -> MetricsReport:
    """Aggregate the five headline columns plus the interrupt breakdown.

    Raters only score finished runs: every finished trajectory must have at
    least one score, interrupted runs are assigned 0 by the rubric, and a
    score referencing an unknown run id is an error.
    """
    if not trajectories:
        raise EvalError("no runs to evaluate")
    by_query: dict[str, list[int]] = {}
    known = {t.query.id for t in trajectories}
    if len(known) != len(trajectories):
        raise EvalError("duplicate run ids in trajectory set")
    for s in scores:
        if s.query_id not in known:
            raise EvalError(f"orphan score for unknown run {s.query_id!r}")
        by_query.setdefault(s.query_id, []).append(s.score)

    run_scores: list[float] = []
    finished = 0
    breakdown: dict[InterruptCause, int] = {}
    for t in trajectories:
        if t.status.finished:
            finished += 1
            rated = by_query.get(t.query.id)
            if not rated:
                raise EvalError(f"finished run {t.query.id!r} has no helpfulness score")
            run_scores.append(sum(rated) / len(rated))
        else:
            assert t.status.cause is not None
            breakdown[t.status.cause] = breakdown.get(t.status.cause, 0) + 1
            run_scores.append(0.0)

    n = len(trajectories)
    return MetricsReport(
        best_rate=100.0 * sum(1 for s in run_scores if _rounds_to_ideal(s)) / n,
        helpful=sum(run_scores) / n,
        robust=100.0 * finished / n,
        freq_tool=sum(t.tool_calls for t in trajectories) / n,
        freq_llm=sum(t.llm_calls for t in trajectories) / n,
        interrupt_breakdown=breakdown,
        n_runs=n,
    )


def format_report(report: MetricsReport) -> str:
    lines = [
        f"{'runs':<12}{report.n_runs}",
        f"{'Best':<12}{report.best_rate:.2f}",
        f"{'Helpful':<12}{report.helpful:.2f}",
        f"{'Robust':<12}{report.robust:.2f}",
        f"{'Freq-Tool':<12}{report.freq_tool:.2f}",
        f"{'Freq-LLM':<12}{report.freq_llm:.2f}",
    ]
    for cause in InterruptCause:
        count = report.interrupt_breakdown.get(cause, 0)
        lines.append(f"{'  ' + cause.value:<24}{count}")
    return "\n".join(lines)


def report_csv(report: MetricsReport) -> str:
    head = "best,helpful,robust,freq_tool,freq_llm,n_runs"
    row = (
        f"{report.best_rate:.6f},{report.helpful:.6f},{report.robust:.6f},"
        f"{report.freq_tool:.6f},{report.freq_llm:.6f},{report.n_runs}"
    )
    return head + "\n" + row + "\n"


# ---------------------------------------------------------------------------
# SFT export
# ---------------------------------------------------------------------------


def iter_llm_turns(
    trajectory: Trajectory, templates: dict[TaskKind, PromptTemplate]
) -> Iterator[SftRecord]:
    """Replay a trajectory's adopted LLM turns as (prompt, target) records.

    Records route by what the turn produced: the meta turn to the plan
    task, code-exec turns to code writing (target is the code text alone),
    every other action turn to action taking, and reflexion turns to the
    summary task.
    """
    if trajectory.meta is None:
        return
    run_id = trajectory.query.id
    yield SftRecord(
        task=TaskKind.AGENT_META_GEN,
        prompt=grammar_render(templates[TaskKind.AGENT_META_GEN], meta_context(trajectory.query)),
        target=grammar.serialize_agent_meta(trajectory.meta),
        run_id=run_id,
        step_index=0,
    )
    memory = MemoryState(meta=trajectory.meta)
    for step in trajectory.steps:
        prompt_task = step_task_kind(memory, step.step_index)
        context = (
            code_context(trajectory.query, memory)
            if prompt_task == TaskKind.CODE_WRITING
            else action_context(trajectory.query, memory)
        )
        prompt = grammar_render(templates[prompt_task], context)
        if step.request.kind == ActionKind.CODE_EXEC:
            yield SftRecord(
                task=TaskKind.CODE_WRITING,
                prompt=prompt,
                target=step.request.arguments["code"],
                run_id=run_id,
                step_index=step.step_index,
            )
        else:
            yield SftRecord(
                task=TaskKind.ACTION_TAKING,
                prompt=prompt,
                target=grammar.serialize_action(step.request),
                run_id=run_id,
                step_index=step.step_index,
            )
        update_memory_caches(memory, step.request, step.observation)
        if step.reflexion is not None:
            reflexion_prompt = grammar_render(
                templates[TaskKind.SUMMARY_REFLEXION],
                reflexion_context(trajectory.query, memory, step.observation),
            )
            yield SftRecord(
                task=TaskKind.SUMMARY_REFLEXION,
                prompt=reflexion_prompt,
                target=grammar.serialize_reflexion(step.reflexion),
                run_id=run_id,
                step_index=step.step_index,
            )
            memory.summaries.append(step.reflexion.summary)
            if step.reflexion.verdict == "revise":
                assert step.reflexion.revised_plan is not None
                memory.meta = memory.meta.with_plan(
                    splice_revision(memory.meta.plan, step.step_index, step.reflexion.revised_plan)
                )


_SFT_FILES = {
    TaskKind.AGENT_META_GEN: "plan.jsonl",
    TaskKind.ACTION_TAKING: "action.jsonl",
    TaskKind.CODE_WRITING: "code.jsonl",
    TaskKind.SUMMARY_REFLEXION: "summary.jsonl",
}


def export_sft(
    trajectories: Iterable[Trajectory],
    templates: dict[TaskKind, PromptTemplate],
    out_dir: Union[str, Path],
) -> dict[TaskKind, int]:
    """Write the four per-task dataset files; returns record counts per task.

    Files carry a header line even when empty.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    handles = {}
    counts = {task: 0 for task in TaskKind}
    try:
        for task, filename in _SFT_FILES.items():
            handle = (out_dir / filename).open("w", encoding="utf-8")
            handle.write(
                json.dumps({"format": "finagent-sft", "version": 1, "task": task.value}) + "\n"
            )
            handles[task] = handle
        for trajectory in trajectories:
            for record in iter_llm_turns(trajectory, templates):
                handles[record.task].write(
                    json.dumps(
                        {
                            "task": record.task.value,
                            "prompt": record.prompt,
                            "target": record.target,
                            "run_id": record.run_id,
                            "step": record.step_index,
                        },
                        ensure_ascii=True,
                    )
                    + "\n"
                )
                counts[record.task] += 1
    finally:
        for handle in handles.values():
            handle.close()
    return counts


def load_trajectories(
    log_dir: Union[str, Path], pattern: str = "*.log"
) -> tuple[list[Trajectory], list[str]]:
    """Decode every log in *log_dir*; undecodable files are skipped and
    reported back by name."""
    trajectories = []
    skipped = []
    for path in sorted(Path(log_dir).glob(pattern)):
        try:
            trajectories.append(decode_trajectory(path.read_bytes()))
        except DecodeError as exc:
            skipped.append(f"{path.name}: {exc}")
    return trajectories, skipped


# ---------------------------------------------------------------------------
# Dataset split
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitResult:
    train: tuple[Query, ...]
    eval: tuple[Query, ...]
    test: tuple[Query, ...]
    n_duplicates: int


def split_dataset(queries: Sequence[Query], seed: int) -> SplitResult:
    """Deduplicate by exact text, then split 8:1:1.

    Sizes are floor(0.8n) / floor(0.1n) / remainder, so the test slice
    absorbs the rounding. Deterministic for a fixed seed; the three slices
    partition the deduplicated set.
    """
    seen: set[str] = set()
    unique: list[Query] = []
    for q in queries:
        if q.text in seen:
            continue
        seen.add(q.text)
        unique.append(q)
    ids = [q.id for q in unique]
    if len(set(ids)) != len(ids):
        raise EvalError("duplicate query ids after text deduplication")
    n = len(unique)
    if n < 10:
        raise EvalError(f"too few for 8:1:1 split: {n} unique queries (need >= 10)")
    order = list(unique)
    random.Random(seed).shuffle(order)
    n_train = int(0.8 * n)
    n_eval = int(0.1 * n)
    return SplitResult(
        train=tuple(order[:n_train]),
        eval=tuple(order[n_train : n_train + n_eval]),
        test=tuple(order[n_train + n_eval :]),
        n_duplicates=len(queries) - n,
    )


# ---------------------------------------------------------------------------
# Task-level accuracy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LabeledOutput:
    """A model output judged correct/incorrect by a human or an oracle."""

    task: TaskKind
    correct: Optional[bool]


def score_task_accuracy(labeled: Sequence[LabeledOutput]) -> dict[TaskKind, float]:
    """Per-task accuracy percentages over labeled outputs."""
    totals: dict[TaskKind, int] = {}
    hits: dict[TaskKind, int] = {}
    for record in labeled:
        if record.correct is None:
            raise EvalError(f"unlabeled record for task {record.task.value}")
        totals[record.task] = totals.get(record.task, 0) + 1
        hits[record.task] = hits.get(record.task, 0) + (1 if record.correct else 0)
    return {task: 100.0 * hits[task] / totals[task] for task in totals}


@dataclass(frozen=True)
class CodeSample:
    code: str
    expected_stdout: Optional[str] = None


def code_pass_rate(
    samples: Sequence[CodeSample],
    runtime: Sequence[str],
    limits: Optional[SandboxLimits] = None,
) -> float:
    """Sandbox passing rate for generated code: exit_ok, and when an oracle
    output is supplied, stdout must match it (whitespace-stripped)."""
    if not samples:
        raise EvalError("no code samples")
    limits = limits or SandboxLimits()
    passed = 0
    for sample in samples:
        result = execute(sample.code, runtime, limits)
        ok = result.exit_ok
        if ok and sample.expected_stdout is not None:
            ok = result.stdout.strip() == sample.expected_stdout.strip()
        passed += 1 if ok else 0
    return 100.0 * passed / len(samples)
