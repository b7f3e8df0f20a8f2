"""Evaluation harness: metrics over a batch of runs, SFT export, the split.

Builds a small batch of scripted runs (some finishing, some failing),
scores them, and shows the report the `finagent eval` subcommand prints,
then exports the four per-subtask SFT datasets and splits a query corpus.

Run from the repo root:  python demos/04_eval_and_sft_export.py
"""

import sys
import tempfile
from pathlib import Path

from finagent.evaluation import (
    HelpfulnessScore,
    compute_metrics,
    export_sft,
    format_report,
    split_dataset,
)
from finagent.fixtures import build_catalog, golden_transcript_records
from finagent.llm import ScriptedBackend, load_templates
from finagent.model import Query
from finagent.orchestrator import Orchestrator, OrchestratorConfig, VirtualClock
from finagent.search import HashEmbedder, index_catalog

catalog = build_catalog()
embedder = HashEmbedder(dim=64)
index = index_catalog(catalog, embedder)
config = OrchestratorConfig(runtime=(sys.executable, "{script}"))


def run_with(turns, qid):
    orchestrator = Orchestrator(
        catalog=catalog,
        index=index,
        backend=ScriptedBackend(turns),
        config=config,
        embedder=embedder,
        clock=VirtualClock(),
    )
    return orchestrator.run(Query(id=qid, text=f"demo question {qid}"))


good = golden_transcript_records()
trajectories = [run_with(list(good), f"demo-{i}") for i in range(4)]
trajectories.append(run_with([{"response": "junk"}, {"response": "junk"}], "demo-broken"))

scores = [
    HelpfulnessScore("demo-0", "expert-1", 3),
    HelpfulnessScore("demo-0", "expert-2", 3),
    HelpfulnessScore("demo-1", "expert-1", 2),
    HelpfulnessScore("demo-2", "expert-1", 3),
    HelpfulnessScore("demo-3", "expert-1", 1),
]

print("== metrics over 5 runs (4 finished, 1 parse failure) ==")
print(format_report(compute_metrics(trajectories, scores)))

print("\n== SFT export: one record per adopted LLM turn ==")
with tempfile.TemporaryDirectory() as out_dir:
    counts = export_sft(trajectories, load_templates(), out_dir)
    for task, count in counts.items():
        print(f"  {task.value:<20}{count}")
    sample = (Path(out_dir) / "code.jsonl").read_text().splitlines()
    print(f"  code.jsonl: header + {len(sample) - 1} records")

print("\n== 8:1:1 split with exact-text dedup ==")
corpus = [Query(id=f"q{i}", text=f"question {i % 900}") for i in range(1000)]
result = split_dataset(corpus, seed=7)
print(
    f"  1000 raw -> {result.n_duplicates} duplicates removed -> "
    f"train {len(result.train)} / eval {len(result.eval)} / test {len(result.test)}"
)
