"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines; a failed assertion surfaces as the criterion's FAIL.
"""

import importlib.util
import json
import math
import random
import time
from pathlib import Path

import numpy as np
import pytest

from finagent import fixtures, grammar
from finagent.cli import main
from finagent.evaluation import (
    HelpfulnessScore,
    compute_metrics,
    export_sft,
    split_dataset,
)
from finagent.grammar import ParseFailure, parse_action, parse_agent_meta, parse_reflexion
from finagent.llm import LlmConfig, ScriptedBackend, TaskKind
from finagent.model import (
    ActionKind,
    InterruptCause,
    OverallPlan,
    PlanStep,
    Query,
    ReflexionOutcome,
    build_action,
    decode_trajectory,
    encode_trajectory,
)
from finagent.orchestrator import Orchestrator, OrchestratorConfig, VirtualClock
from finagent.sandbox import SandboxLimits, TRUNCATION_SENTINEL, execute
from finagent.search import VectorIndex, cosine_topk, rank_in_category, score_retrieval

import helpers

FIXTURES = Path(__file__).parent.parent / "fixtures"

import sys


def _announce(name):
    print(f"\nACCEPTANCE {name}: PASS")


# ---------------------------------------------------------------------------
# Determinism
# ---------------------------------------------------------------------------


def test_determinism_of_the_shipped_golden_run(tmp_path):
    args = [
        "run",
        "--query",
        "How did NVDA shares move over the first three trading days of 2024?",
        "--query-id",
        "golden-nvda",
        "--catalog",
        str(FIXTURES / "catalog.jsonl"),
        "--backend",
        "scripted",
        "--transcript",
        str(FIXTURES / "golden_transcript.jsonl"),
    ]
    started = time.perf_counter()
    assert main(args + ["--log", str(tmp_path / "a.log")]) == 0
    assert main(args + ["--log", str(tmp_path / "b.log")]) == 0
    elapsed = time.perf_counter() - started
    first = (tmp_path / "a.log").read_bytes()
    second = (tmp_path / "b.log").read_bytes()
    assert first == second, "two consecutive invocations differ"
    frozen = (FIXTURES / "golden_trajectory.log").read_bytes()
    assert first == frozen, "run diverged from the frozen cross-platform log"
    assert elapsed < 5.0, f"golden runs took {elapsed:.2f}s (budget 5s)"
    _announce("determinism: byte-identical golden log in <5s")


# ---------------------------------------------------------------------------
# Interrupt taxonomy
# ---------------------------------------------------------------------------


def _scripted_orchestrator(catalog, index, embedder, turns, **config_overrides):
    config = OrchestratorConfig(
        runtime=(sys.executable, "{script}"), **config_overrides
    )
    return Orchestrator(
        catalog=catalog,
        index=index,
        backend=ScriptedBackend([{"response": t} for t in turns]),
        config=config,
        embedder=embedder,
        clock=VirtualClock(),
    )


def _meta_turn():
    return grammar.serialize_agent_meta(fixtures._golden_meta())


def _action(kind, **arguments):
    return grammar.serialize_action(build_action(kind, **arguments))


def _proceed(summary="noted"):
    return grammar.serialize_reflexion(ReflexionOutcome(summary=summary, verdict="proceed"))


def _fault_injection_cases():
    """32 constructed runs: (name, turns, config overrides, expected cause)."""
    cases = []
    # 12 step-budget runs: actions forever, varying the action kind mix
    for i in range(12):
        turns = [_meta_turn()]
        for j in range(14):
            if (i + j) % 2:
                turns.append(_action(ActionKind.WEB_SEARCH, query=f"w{i}-{j}"))
            else:
                turns.append(_action(ActionKind.API_DETAILS, tool="stock_hist_000"))
            turns.append(_proceed(f"s{i}-{j}"))
        cases.append((f"budget-{i}", turns, {}, InterruptCause.STEP_BUDGET_EXCEEDED))
    # 12 parse-failure runs: the bad turn (and its retry) at varying points
    bad = ["{nope", "also broken"]
    for i in range(12):
        turns = [_meta_turn()]
        for j in range(i // 2):
            turns.append(_action(ActionKind.WEB_SEARCH, query=f"w{j}"))
            turns.append(_proceed(f"s{j}"))
        if i % 2 == 0:
            turns += bad  # malformed action turn
        else:
            turns.append(_action(ActionKind.WEB_SEARCH, query="wx"))
            turns += bad  # malformed reflexion turn
        cases.append((f"parse-{i}", turns, {}, InterruptCause.PARSE_FAILURE))
    # 2 parse-failure runs at the meta turn itself
    cases.append(("parse-meta-0", ["junk", "more junk"], {}, InterruptCause.PARSE_FAILURE))
    cases.append(("parse-meta-1", ["<html>", "{"], {}, InterruptCause.PARSE_FAILURE))
    # 6 prompt-overflow runs: context budgets that the prompt growth crosses
    for i, budget in enumerate((24, 48, 96, 320, 340, 360)):
        turns = [_meta_turn()]
        for j in range(10):
            turns.append(_action(ActionKind.WEB_SEARCH, query=f"padding {j} " * 6))
            turns.append(_proceed("summary " + "pad " * 30))
        cases.append(
            (f"overflow-{i}", turns, {"llm": LlmConfig(context_budget=budget)},
             InterruptCause.PROMPT_OVERFLOW)
        )
    return cases


def test_interrupt_taxonomy_is_exact(catalog, index, embedder):
    cases = _fault_injection_cases()
    assert len(cases) >= 30
    query = Query(id="fault", text="trigger the constructed failure")
    for name, turns, overrides, expected in cases:
        orchestrator = _scripted_orchestrator(catalog, index, embedder, turns, **overrides)
        trajectory = orchestrator.run(query)
        assert not trajectory.status.finished, name
        assert trajectory.status.cause == expected, (
            f"{name}: expected {expected.value}, got {trajectory.status.cause.value}"
        )
        assert len(trajectory.steps) <= 10, name
        if expected == InterruptCause.STEP_BUDGET_EXCEEDED:
            assert len(trajectory.steps) == 10, name
    _announce(f"interrupt taxonomy: {len(cases)} constructed runs, exact causes, steps <= 10")


# ---------------------------------------------------------------------------
# Retrieval exactness
# ---------------------------------------------------------------------------


def test_retrieval_exactness_against_brute_force():
    rng = np.random.default_rng(20240102)
    n, dim = 1000, 64
    vectors = rng.normal(size=(n, dim))
    names = tuple(f"vec{i:04d}" for i in range(n))
    index = VectorIndex(names=names, vectors=vectors, dim=dim)
    vector_lists = vectors.tolist()
    norms = [math.sqrt(sum(x * x for x in v)) for v in vector_lists]

    def oracle(query, k):
        qn = math.sqrt(sum(x * x for x in query))
        scored = []
        for name, vec, vn in zip(names, vector_lists, norms):
            if qn == 0.0 or vn == 0.0:
                sim = 0.0
            else:
                sim = sum(a * b for a, b in zip(vec, query)) / (vn * qn)
            scored.append((name, sim))
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return scored[:k]

    queries = [rng.normal(size=dim).tolist() for _ in range(20)]
    queries.append(vectors[123].tolist())  # exact copy of an entry
    queries.append([0.0] * dim)  # zero vector: all ties, lexicographic

    started = time.perf_counter()
    for query in queries:
        for k in (5, 10):
            got = cosine_topk(index, np.array(query), k=k)
            want = oracle(query, k)
            assert [name for name, _ in got] == [name for name, _ in want]
            assert all(abs(a[1] - b[1]) < 1e-9 for a, b in zip(got, want))
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0, f"exactness check took {elapsed:.2f}s (budget 1s)"
    _announce(f"retrieval exactness: 1000 vectors, k in (5, 10), {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# Hybrid dominance
# ---------------------------------------------------------------------------


def test_hybrid_dominance_reproduces_monotone_directions(catalog, index, embedder):
    queries = fixtures.build_retrieval_queries()
    gold = {q["id"]: set(q["gold"]) for q in queries}
    unfiltered = {
        q["id"]: [name for name, _ in cosine_topk(index, embedder.embed(q["task"]), k=10)]
        for q in queries
    }
    filtered = {
        q["id"]: rank_in_category(catalog, index, q["category"], q["task"], embedder, k=10)
        for q in queries
    }
    s5_unfiltered = score_retrieval(unfiltered, gold, k=5)
    s5_filtered = score_retrieval(filtered, gold, k=5)
    assert s5_filtered.all_right_rate > s5_unfiltered.all_right_rate, (
        f"filtered {s5_filtered.all_right_rate} must beat "
        f"unfiltered {s5_unfiltered.all_right_rate} at Top-5"
    )
    for label, results in (("embedding", unfiltered), ("category+embedding", filtered)):
        s5 = score_retrieval(results, gold, k=5)
        s10 = score_retrieval(results, gold, k=10)
        assert s10.all_right_rate >= s5.all_right_rate, label
        assert s10.all_wrong_rate <= s5.all_wrong_rate, label
    _announce(
        "hybrid dominance: filtered "
        f"{s5_filtered.all_right_rate:.1f} > unfiltered {s5_unfiltered.all_right_rate:.1f} "
        "at Top-5, monotone at Top-10"
    )


# ---------------------------------------------------------------------------
# Metric arithmetic
# ---------------------------------------------------------------------------


def test_metric_arithmetic_matches_recount_oracle():
    from tests_metric_fixture import build_200_run_fixture  # local helper below

    runs, scores = build_200_run_fixture()
    report = compute_metrics(runs, scores)

    per_query = {}
    for s in scores:
        per_query.setdefault(s.query_id, []).append(s.score)
    oracle_scores = []
    finished = 0
    for t in runs:
        if t.status.finished:
            finished += 1
            values = per_query[t.query.id]
            oracle_scores.append(sum(values) / len(values))
        else:
            oracle_scores.append(0.0)
    n = len(runs)
    assert n == 200
    assert abs(report.robust - 100.0 * finished / n) < 1e-9
    assert abs(report.helpful - sum(oracle_scores) / n) < 1e-9
    assert abs(report.best_rate - 100.0 * sum(1 for v in oracle_scores if v >= 2.5) / n) < 1e-9
    assert abs(report.freq_tool - sum(t.tool_calls for t in runs) / n) < 1e-9
    assert abs(report.freq_llm - sum(t.llm_calls for t in runs) / n) < 1e-9

    # rubric endpoints are exact, not approximate
    ideal = [t for t in runs if t.status.finished][:5]
    endpoint = compute_metrics(
        ideal, [HelpfulnessScore(t.query.id, "r", 3) for t in ideal]
    )
    assert endpoint.helpful == 3.0
    broken = [t for t in runs if not t.status.finished][:5]
    assert compute_metrics(broken, []).helpful == 0.0
    _announce("metric arithmetic: 200-run fixture matches recount to 1e-9; endpoints exact")


# ---------------------------------------------------------------------------
# Parser totality
# ---------------------------------------------------------------------------


def test_parser_totality_under_fuzzing():
    rng = random.Random(777)
    generators = (
        (helpers.random_meta_envelope, parse_agent_meta),
        (helpers.random_action_envelope, parse_action),
        (helpers.random_reflexion_envelope, parse_reflexion),
    )
    conformant = 0
    for _ in range(334):
        for generate, parse in generators:
            parse(generate(rng))  # any ParseFailure here fails the criterion
            conformant += 1
    assert conformant >= 1000

    mutations = 0
    rejected = 0
    for _ in range(334):
        for generate, parse in generators:
            original = generate(rng)
            reference = parse(original)
            corrupted = helpers.mutate_envelope(rng, original)
            try:
                value = parse(corrupted)
            except ParseFailure:
                rejected += 1
            else:
                assert value == reference, f"non-equivalent parse: {corrupted!r}"
            mutations += 1
    assert mutations >= 1000
    _announce(
        f"parser totality: {conformant} conformant parses, "
        f"{mutations} mutations ({rejected} rejected), 0 crashes"
    )


# ---------------------------------------------------------------------------
# SFT export and split
# ---------------------------------------------------------------------------


def test_sft_export_counts_and_split_sizes(templates, tmp_path):
    trajectory = decode_trajectory((FIXTURES / "golden_trajectory.log").read_bytes())
    counts = export_sft([trajectory], templates, tmp_path)
    assert counts == {
        TaskKind.AGENT_META_GEN: 1,
        TaskKind.ACTION_TAKING: 3,
        TaskKind.CODE_WRITING: 1,
        TaskKind.SUMMARY_REFLEXION: 3,
    }, "golden fixture hand-count mismatch"

    queries = [Query(id=f"q{i:05d}", text=f"synthetic question {i}") for i in range(14107)]
    result = split_dataset(queries, seed=11)
    sizes = (len(result.train), len(result.eval), len(result.test))
    assert sizes == (11285, 1410, 1412), sizes
    _announce("sft export: golden counts {1,3,1,3}; split 14107 -> 11285/1410/1412")


# ---------------------------------------------------------------------------
# Sandbox budgets
# ---------------------------------------------------------------------------


def test_sandbox_budget_enforcement():
    runtime = (sys.executable, "{script}")
    limits = SandboxLimits(wall_time=1.0)
    started = time.monotonic()
    result = execute("while True:\n    pass\n", runtime, limits)
    elapsed = time.monotonic() - started
    assert result.timed_out and not result.exit_ok
    assert elapsed < limits.wall_time + 2.0, f"kill took {elapsed:.2f}s"

    big = execute(
        "import sys\nsys.stdout.write('y' * (10 * 1024 * 1024))\n",
        runtime,
        SandboxLimits(),
    )
    sentinel = TRUNCATION_SENTINEL.format(limit=SandboxLimits().max_output)
    assert sentinel in big.stdout
    assert len(big.stdout.encode()) <= SandboxLimits().max_output + len(sentinel) + 2
    _announce("sandbox budgets: wall-time kill within grace; 10MB stdout truncated with sentinel")


# ---------------------------------------------------------------------------
# [SECONDARY] hermetic end-to-end with the mock SDK
# ---------------------------------------------------------------------------

HAVE_FINMOCK = importlib.util.find_spec("finmock") is not None


@pytest.mark.skipif(not HAVE_FINMOCK, reason="secondary mock SDK not installed")
def test_secondary_hermetic_end_to_end(tmp_path):
    args = [
        "run",
        "--query",
        "How did NVDA shares move over the first three trading days of 2024?",
        "--query-id",
        "golden-nvda",
        "--catalog",
        str(FIXTURES / "catalog.jsonl"),
        "--backend",
        "scripted",
        "--transcript",
        str(FIXTURES / "sdk_transcript.jsonl"),
        "--log",
        str(tmp_path / "sdk.log"),
    ]
    assert main(args) == 0
    log = (tmp_path / "sdk.log").read_bytes()
    frozen = (FIXTURES / "sdk_trajectory.log").read_bytes()
    assert log == frozen, "SDK golden log diverged from the frozen bytes"

    trajectory = decode_trajectory(log)
    code_step = trajectory.steps[2]
    payload = code_step.observation.payload
    for line in _recompute_golden_rows():
        assert line in payload, f"missing generator row: {line}"
    svg = [a for a in code_step.observation.artifacts if a.name.endswith(".svg")]
    assert svg and svg[0].byte_size > 0
    assert svg[0].media_kind.value == "image"
    _announce("secondary hermetic e2e: generator OHLC values, non-empty plot, frozen log")


def _recompute_golden_rows():
    """Independent re-implementation of the documented mock-data generator:
    keyed 64-bit hashes scaled in integer cents, then OHLC-reconciled."""
    import hashlib

    def h(symbol, date, field):
        payload = f"{symbol}|{date}|{field}".encode()
        digest = hashlib.blake2b(payload, digest_size=8, key=b"finmock-v1").digest()
        return int.from_bytes(digest, "big")

    symbol = "NVDA"
    base = 2500 + h(symbol, "", "base") % 47501
    lines = []
    for date in ("2024-01-02", "2024-01-03", "2024-01-04"):
        open_c = base + h(symbol, date, "open") % 2001 - 1000
        close_c = base + h(symbol, date, "close") % 2001 - 1000
        high_c = max(open_c, close_c) + h(symbol, date, "spread") % 200 + 1
        low_c = min(open_c, close_c) - (h(symbol, date, "dip") % 200 + 1)
        volume = 10_000 + h(symbol, date, "volume") % 1_000_000
        lines.append(
            f"{date},{open_c / 100:.2f},{high_c / 100:.2f},"
            f"{low_c / 100:.2f},{close_c / 100:.2f},{volume}"
        )
    return lines
