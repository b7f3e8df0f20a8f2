"""One full agent episode against the scripted backend.

The scripted backend replays a recorded transcript, which makes the run a
pure function of (query, catalog, transcript): the trajectory log below is
byte-identical on every machine. This is the same run `finagent run`
executes from the shipped fixtures.

Run from the repo root:  python demos/02_scripted_run.py
"""

import sys

from finagent.fixtures import build_catalog, golden_query, golden_transcript_records
from finagent.llm import ScriptedBackend
from finagent.model import encode_trajectory
from finagent.orchestrator import Orchestrator, OrchestratorConfig, VirtualClock
from finagent.search import HashEmbedder, index_catalog

catalog = build_catalog()
embedder = HashEmbedder(dim=64)
orchestrator = Orchestrator(
    catalog=catalog,
    index=index_catalog(catalog, embedder),
    backend=ScriptedBackend(golden_transcript_records()),
    config=OrchestratorConfig(runtime=(sys.executable, "{script}")),
    embedder=embedder,
    clock=VirtualClock(),
)

trajectory = orchestrator.run(golden_query())

print(f"query: {trajectory.query.text}")
print(f"profile: {trajectory.meta.profile.role_name}")
print(f"status: {'finished' if trajectory.status.finished else trajectory.status.cause.value}")
print(f"llm calls: {trajectory.llm_calls}   tool calls: {trajectory.tool_calls}\n")

for step in trajectory.steps:
    print(f"step {step.step_index}: {step.request.kind.value}")
    print(f"  observation ok={step.observation.ok}, payload {len(step.observation.payload)} chars")
    if step.reflexion is not None:
        print(f"  summary: {step.reflexion.summary}")
final = trajectory.steps[-1]
print(f"\nfinal answer: {final.request.arguments['answer']}")

log = encode_trajectory(trajectory)
print(f"\ntrajectory log: {len(log)} bytes, first line:")
print(log.decode().splitlines()[0][:120] + " ...")
