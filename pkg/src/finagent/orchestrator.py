"""The agent control loop.

One run: generate agent meta (profile + overall plan), then loop up to L
action steps. Each step renders a prompt from profile, current plan, and
the per-step summaries (never raw observation history), asks the backend
for one action envelope, dispatches it against the catalog / sandbox / web
provider, and runs a summary&reflexion turn that condenses the observation
into short-term memory and may amend the plan. A finish action concludes
the run; everything else that can go wrong folds into one of three
interrupt causes (step budget, parse failure, prompt overflow); no
exception escapes ``run`` for in-protocol failures.

Prompt context construction lives in module-level helpers so that the SFT
exporter can replay the exact prompts a trajectory saw.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from . import grammar
from .catalog import Catalog, NotFoundError, format_tool_spec, get_details
from .llm import (
    LlmBackend,
    LlmConfig,
    PromptTemplate,
    TaskKind,
    complete,
    estimate_tokens,
    load_templates,
    render_prompt,
)
from .model import (
    ActionKind,
    ActionRequest,
    AgentMeta,
    InterruptCause,
    Observation,
    OverallPlan,
    Profile,
    Query,
    ReflexionOutcome,
    StepRecord,
    TerminationStatus,
    Trajectory,
    splice_revision,
)
from .sandbox import SandboxLimits, execute, step_artifact_dir
from .search import Embedder, SearchConfig, VectorIndex, select_candidates
from .websearch import CannedWebSearch, WebSearchProvider, format_hits

RETRY_SUFFIX = (
    "\n\nYour previous reply could not be parsed: {reason}\n"
    "Follow the reply grammar exactly and reply again."
)

EMPTY_SLOT = "(none yet)"

_CANDIDATE_DESC_CHARS = 160


@dataclass(frozen=True)
class OrchestratorConfig:
    """Run-level knobs: step budget L, token budgets, search and sandbox
    limits, and the sandbox runtime command template."""

    L: int = 10
    llm: LlmConfig = field(default_factory=LlmConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    limits: SandboxLimits = field(default_factory=SandboxLimits)
    runtime: tuple[str, ...] = ("python3", "{script}")
    reflexion_enabled: bool = True
    artifact_dir: Optional[str] = None

    def __post_init__(self) -> None:
        if self.L < 1:
            raise ValueError("L must be >= 1")


@dataclass
class MemoryState:
    """What the agent remembers: the long-lived meta plus short-term
    per-step summaries and the last tool-search / tool-details results."""

    meta: AgentMeta
    summaries: list[str] = field(default_factory=list)
    selected_candidates: Optional[str] = None
    last_tool_spec: Optional[str] = None


@dataclass
class RunState:
    """Mutable per-run bookkeeping; one run is strictly sequential."""

    query: Query
    memory: Optional[MemoryState] = None
    step_index: int = 0  # completed steps
    llm_calls: int = 0
    tool_calls: int = 0


class VirtualClock:
    """Deterministic stand-in for a monotonic clock: each sample advances a
    fixed tick, so scripted runs log identical wall times everywhere."""

    def __init__(self, tick: float = 0.001):
        self._now = 0.0
        self._tick = tick

    def __call__(self) -> float:
        now = self._now
        self._now += self._tick
        return now


class _Interrupt(Exception):
    def __init__(self, cause: InterruptCause):
        self.cause = cause
        super().__init__(cause.value)


# ---------------------------------------------------------------------------
# Prompt context helpers (shared with the SFT exporter)
# ---------------------------------------------------------------------------


def profile_text(profile: Profile) -> str:
    abilities = "; ".join(profile.abilities)
    return f"{profile.role_name}. {profile.description} Abilities: {abilities}."


def plan_text(plan: OverallPlan) -> str:
    return "\n".join(
        f"{s.index}. [{s.action_kind.value if isinstance(s.action_kind, ActionKind) else s.action_kind}] {s.goal}"
        for s in plan.steps
    )


def summaries_text(summaries: list[str]) -> str:
    if not summaries:
        return EMPTY_SLOT
    return "\n".join(f"{i}. {s}" for i, s in enumerate(summaries, start=1))


def observation_text(observation: Observation) -> str:
    if observation.ok:
        return observation.payload
    return f"{observation.payload}\n[action failed: {observation.error_detail}]"


def meta_context(query: Query) -> dict[str, str]:
    return {"query": query.text, "grammar": grammar.META_GRAMMAR}


def action_context(query: Query, memory: MemoryState) -> dict[str, str]:
    plan = memory.meta.plan
    return {
        "query": query.text,
        "profile": profile_text(memory.meta.profile),
        "plan": plan_text(plan),
        "plan_revision": str(plan.revision),
        "summaries": summaries_text(memory.summaries),
        "candidates": memory.selected_candidates or EMPTY_SLOT,
        "tool_spec": memory.last_tool_spec or EMPTY_SLOT,
        "grammar": grammar.ACTION_GRAMMAR,
    }


def code_context(query: Query, memory: MemoryState) -> dict[str, str]:
    context = action_context(query, memory)
    del context["candidates"]
    return context


def reflexion_context(
    query: Query, memory: MemoryState, observation: Observation
) -> dict[str, str]:
    plan = memory.meta.plan
    return {
        "query": query.text,
        "profile": profile_text(memory.meta.profile),
        "plan": plan_text(plan),
        "plan_revision": str(plan.revision),
        "summaries": summaries_text(memory.summaries),
        "observation": observation_text(observation),
        "grammar": grammar.REFLEXION_GRAMMAR,
    }


def step_task_kind(memory: MemoryState, next_step_index: int) -> TaskKind:
    """Pick the template for the next action turn: the code-writing template
    when the current plan position calls for code execution."""
    plan_steps = memory.meta.plan.steps
    position = next_step_index - 1
    if position < len(plan_steps) and plan_steps[position].action_kind == ActionKind.CODE_EXEC:
        return TaskKind.CODE_WRITING
    return TaskKind.ACTION_TAKING


def update_memory_caches(
    memory: MemoryState, request: ActionRequest, observation: Observation
) -> None:
    """Cache successful api-select / api-details payloads in memory.

    Shared with trajectory replay so re-rendered prompts match the run.
    """
    if not observation.ok:
        return
    if request.kind == ActionKind.API_SELECT:
        memory.selected_candidates = observation.payload
    elif request.kind == ActionKind.API_DETAILS:
        memory.last_tool_spec = observation.payload


def format_execution_payload(
    exit_ok: bool, timed_out: bool, stdout: str, stderr: str, artifacts
) -> str:
    lines = [
        f"exit_ok={exit_ok} timed_out={timed_out}",
        "--- stdout ---",
        stdout.rstrip("\n"),
        "--- stderr ---",
        stderr.rstrip("\n"),
        "--- artifacts ---",
    ]
    if artifacts:
        lines.extend(
            f"{a.name} ({a.media_kind.value}, {a.byte_size} bytes)" for a in artifacts
        )
    else:
        lines.append("(none)")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# The orchestrator
# ---------------------------------------------------------------------------


class Orchestrator:
    """Wires catalog, index, backend, sandbox and web search into runs.

    Shared structures (catalog, index, templates) are read-only, so one
    orchestrator may serve many concurrent runs; per-run state lives in
    :class:`RunState`. A stateful backend (the scripted one) must be
    per-run.
    """

    def __init__(
        self,
        catalog: Catalog,
        index: VectorIndex,
        backend: LlmBackend,
        config: OrchestratorConfig,
        embedder: Embedder,
        templates: Optional[dict[TaskKind, PromptTemplate]] = None,
        web_provider: Optional[WebSearchProvider] = None,
        clock: Optional[Callable[[], float]] = None,
    ):
        self.catalog = catalog
        self.index = index
        self.backend = backend
        self.config = config
        self.embedder = embedder
        self.templates = templates if templates is not None else load_templates()
        self.web_provider = web_provider if web_provider is not None else CannedWebSearch()
        self.clock = clock if clock is not None else time.monotonic

    # -- budget checks ------------------------------------------------------

    def check_budgets(self, state: RunState, next_prompt: str) -> Optional[InterruptCause]:
        """Step budget first, then prompt budget; None when both hold.

        Parse failures are raised by the parsers, not detected here.
        """
        if state.step_index + 1 > self.config.L:
            return InterruptCause.STEP_BUDGET_EXCEEDED
        if estimate_tokens(next_prompt) > self.config.llm.context_budget:
            return InterruptCause.PROMPT_OVERFLOW
        return None

    # -- LLM turns ----------------------------------------------------------

    def _completed_turn(self, state: RunState, prompt_text: str) -> str:
        state.llm_calls += 1
        return complete(self.backend, self.config.llm, prompt_text)

    def _parse_with_retry(self, state: RunState, prompt_text: str, parser):
        """One grammar repair retry: on a parse failure, re-prompt once with
        the error appended; a second failure interrupts the run."""
        raw = self._completed_turn(state, prompt_text)
        try:
            return parser(raw)
        except grammar.ParseFailure as first:
            retry_prompt = prompt_text + RETRY_SUFFIX.format(reason=first.reason)
            if estimate_tokens(retry_prompt) > self.config.llm.context_budget:
                raise _Interrupt(InterruptCause.PROMPT_OVERFLOW) from None
            raw = self._completed_turn(state, retry_prompt)
            try:
                return parser(raw)
            except grammar.ParseFailure:
                raise _Interrupt(InterruptCause.PARSE_FAILURE) from None

    def init_meta(self, state: RunState) -> AgentMeta:
        """Generate and validate the agent meta (step 0; outside the L budget)."""
        template = self.templates[TaskKind.AGENT_META_GEN]
        prompt = grammar_render(template, meta_context(state.query))
        cause = self.check_budgets(state, prompt)
        if cause is not None:
            raise _Interrupt(cause)
        meta = self._parse_with_retry(state, prompt, grammar.parse_agent_meta)
        return meta

    # -- dispatch -----------------------------------------------------------

    def dispatch(self, request: ActionRequest, state: RunState) -> Observation:
        """Execute one action against the environment.

        Tool-level failures become ok=false observations for reflexion to
        judge; they never crash the engine. Every kind except finish counts
        as a tool call.
        """
        kind = request.kind
        if kind != ActionKind.FINISH:
            state.tool_calls += 1
        if kind == ActionKind.API_SELECT:
            return self._dispatch_api_select(request)
        if kind == ActionKind.API_DETAILS:
            return self._dispatch_api_details(request)
        if kind == ActionKind.CODE_EXEC:
            return self._dispatch_code_exec(request, state)
        if kind == ActionKind.WEB_SEARCH:
            return self._dispatch_web_search(request)
        return Observation(kind=kind, payload=request.arguments["answer"], ok=True)

    def _dispatch_api_select(self, request: ActionRequest) -> Observation:
        category = request.arguments["category"]
        task = request.arguments["task"]
        try:
            names = select_candidates(
                self.catalog, self.index, self.config.search, category, task, self.embedder
            )
        except NotFoundError as exc:
            return Observation(
                kind=request.kind, payload="", ok=False, error_detail=str(exc)
            )
        lines = []
        for name in names:
            desc = self.catalog.specs[name].description
            if len(desc) > _CANDIDATE_DESC_CHARS:
                desc = desc[: _CANDIDATE_DESC_CHARS - 3] + "..."
            lines.append(f"{name}: {desc}")
        return Observation(kind=request.kind, payload="\n".join(lines), ok=True)

    def _dispatch_api_details(self, request: ActionRequest) -> Observation:
        name = request.arguments["tool"]
        try:
            spec = get_details(self.catalog, name)
        except NotFoundError:
            return Observation(
                kind=request.kind, payload="", ok=False, error_detail=f"not found: {name}"
            )
        return Observation(kind=request.kind, payload=format_tool_spec(spec), ok=True)

    def _dispatch_code_exec(self, request: ActionRequest, state: RunState) -> Observation:
        artifact_dir = None
        if self.config.artifact_dir is not None:
            artifact_dir = step_artifact_dir(
                self.config.artifact_dir, state.query.id, state.step_index + 1
            )
        result = execute(
            request.arguments["code"],
            self.config.runtime,
            self.config.limits,
            artifact_dir=artifact_dir,
        )
        payload = format_execution_payload(
            result.exit_ok, result.timed_out, result.stdout, result.stderr, result.artifacts
        )
        if result.exit_ok:
            return Observation(
                kind=request.kind, payload=payload, artifacts=result.artifacts, ok=True
            )
        detail = (
            f"timed out after {self.config.limits.wall_time}s"
            if result.timed_out
            else "execution failed"
        )
        return Observation(
            kind=request.kind,
            payload=payload,
            artifacts=result.artifacts,
            ok=False,
            error_detail=detail,
        )

    def _dispatch_web_search(self, request: ActionRequest) -> Observation:
        try:
            hits = self.web_provider.search(request.arguments["query"])
        except Exception as exc:
            return Observation(
                kind=request.kind, payload="", ok=False, error_detail=f"search failed: {exc}"
            )
        return Observation(kind=request.kind, payload=format_hits(hits), ok=True)

    # -- reflexion ----------------------------------------------------------

    def reflect(self, state: RunState, observation: Observation) -> ReflexionOutcome:
        """Summary&reflexion over one observation: one LLM call producing
        both the memory summary and the proceed/revise verdict.

        On revise, the executed plan prefix is frozen and the emitted plan
        replaces the remaining steps (revision + 1).
        """
        memory = state.memory
        assert memory is not None
        template = self.templates[TaskKind.SUMMARY_REFLEXION]
        prompt = grammar_render(template, reflexion_context(state.query, memory, observation))
        cause = self.check_budgets(state, prompt)
        if cause is not None and cause == InterruptCause.PROMPT_OVERFLOW:
            raise _Interrupt(cause)
        outcome = self._parse_with_retry(state, prompt, grammar.parse_reflexion)
        memory.summaries.append(outcome.summary)
        if outcome.verdict == "revise":
            assert outcome.revised_plan is not None
            new_plan = splice_revision(
                memory.meta.plan, state.step_index + 1, outcome.revised_plan
            )
            memory.meta = memory.meta.with_plan(new_plan)
        return outcome

    # -- the loop -----------------------------------------------------------

    def run(self, query: Query) -> Trajectory:
        """Run one episode to a Trajectory; in-protocol failures terminate
        the run with an interrupt cause instead of raising."""
        state = RunState(query=query)
        started = self.clock()
        steps: list[StepRecord] = []
        meta: Optional[AgentMeta] = None
        status: Optional[TerminationStatus] = None

        try:
            meta = self.init_meta(state)
            state.memory = MemoryState(meta=meta)
            while True:
                task = step_task_kind(state.memory, state.step_index + 1)
                template = self.templates[task]
                context = (
                    code_context(query, state.memory)
                    if task == TaskKind.CODE_WRITING
                    else action_context(query, state.memory)
                )
                prompt = grammar_render(template, context)
                cause = self.check_budgets(state, prompt)
                if cause is not None:
                    raise _Interrupt(cause)

                calls_before = state.llm_calls
                request = self._parse_with_retry(state, prompt, grammar.parse_action)
                observation = self.dispatch(request, state)
                update_memory_caches(state.memory, request, observation)

                if request.kind == ActionKind.FINISH:
                    steps.append(
                        StepRecord(
                            step_index=state.step_index + 1,
                            request=request,
                            observation=observation,
                            reflexion=None,
                            llm_calls=state.llm_calls - calls_before,
                            tool_calls=0,
                        )
                    )
                    state.step_index += 1
                    status = TerminationStatus.finish()
                    break

                reflexion = None
                if self.config.reflexion_enabled:
                    reflexion = self.reflect(state, observation)
                steps.append(
                    StepRecord(
                        step_index=state.step_index + 1,
                        request=request,
                        observation=observation,
                        reflexion=reflexion,
                        llm_calls=state.llm_calls - calls_before,
                        tool_calls=1,
                    )
                )
                state.step_index += 1
        except _Interrupt as stop:
            status = TerminationStatus.interrupt(stop.cause)

        assert status is not None
        return Trajectory(
            query=query,
            meta=meta,
            steps=tuple(steps),
            status=status,
            wall_time=self.clock() - started,
            llm_calls=state.llm_calls,
            tool_calls=state.tool_calls,
        )


def grammar_render(template: PromptTemplate, context: dict[str, str]) -> str:
    """Render and return just the prompt text; callers append retry suffixes
    and re-estimate budgets themselves."""
    return render_prompt(template, context).text


def write_trajectory_log(trajectory: Trajectory, path) -> None:
    from .model import encode_trajectory

    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(encode_trajectory(trajectory))
