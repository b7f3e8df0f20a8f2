"""Core domain types shared by every module, plus trajectory log serialization.

All types are immutable values after construction and are safe to share
across threads. The trajectory log format (v1) is line-delimited: one
``HDR`` record, one ``STEP`` record per completed step, one ``END`` record.
Each line is the record tag, a single space, and a compact JSON object with
a fixed, documented field order, so logs are both greppable and canonical
(the same trajectory always encodes to the same bytes).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Optional


class ActionKind(str, Enum):
    """The closed set of agent actions."""

    API_SELECT = "api-select"
    API_DETAILS = "api-details"
    CODE_EXEC = "code-exec"
    WEB_SEARCH = "web-search"
    FINISH = "finish"


#: Required argument keys per action kind. The parser and ActionRequest
#: validation both defer to this table.
ACTION_ARGUMENT_KEYS: dict[ActionKind, tuple[str, ...]] = {
    ActionKind.API_SELECT: ("category", "task"),
    ActionKind.API_DETAILS: ("tool",),
    ActionKind.CODE_EXEC: ("code",),
    ActionKind.WEB_SEARCH: ("query",),
    ActionKind.FINISH: ("answer",),
}


class InterruptCause(str, Enum):
    """Why a run was cut short instead of concluding with ``finish``."""

    STEP_BUDGET_EXCEEDED = "step-budget-exceeded"
    PARSE_FAILURE = "parse-failure"
    PROMPT_OVERFLOW = "prompt-overflow"


class MediaKind(str, Enum):
    IMAGE = "image"
    TABLE = "table"
    TEXT = "text"
    OTHER = "other"


class ModelError(ValueError):
    """A domain value violated its invariants at construction time."""


class DecodeError(ValueError):
    """A trajectory log stream could not be decoded."""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ModelError(message)


@dataclass(frozen=True)
class Query:
    """A natural-language question submitted to the engine.

    ``metadata`` carries free-form string tags such as the source corpus or
    the dataset split the query belongs to.
    """

    id: str
    text: str
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        _require(bool(self.id), "query id must be non-empty")
        _require(bool(self.text), "query text must be non-empty")
        object.__setattr__(self, "metadata", dict(self.metadata))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Query):
            return NotImplemented
        return (self.id, self.text, dict(self.metadata)) == (
            other.id,
            other.text,
            dict(other.metadata),
        )

    def __hash__(self) -> int:
        return hash((self.id, self.text, tuple(sorted(self.metadata.items()))))


@dataclass(frozen=True)
class Profile:
    """The role the agent adopts for a run: a name, a character description,
    and the abilities it claims."""

    role_name: str
    description: str
    abilities: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "abilities", tuple(self.abilities))
        _require(bool(self.role_name), "profile role_name must be non-empty")
        _require(len(self.abilities) > 0, "profile abilities must be non-empty")


@dataclass(frozen=True)
class PlanStep:
    """One intended action in an overall plan.

    ``action_kind`` is normally an :class:`ActionKind`; an unrecognized raw
    string is kept as-is so :func:`validate_plan` can report it instead of
    crashing the caller.
    """

    index: int
    action_kind: ActionKind | str
    goal: str

    def __post_init__(self) -> None:
        kind = self.action_kind
        if not isinstance(kind, ActionKind):
            try:
                object.__setattr__(self, "action_kind", ActionKind(kind))
            except ValueError:
                pass  # left raw; flagged by validate_plan


@dataclass(frozen=True)
class OverallPlan:
    """An ordered, finish-terminated sequence of plan steps.

    ``revision`` counts amendments: 0 for the plan generated at run start,
    incremented by exactly 1 each time reflexion replaces the remaining
    steps.
    """

    steps: tuple[PlanStep, ...]
    revision: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        _require(self.revision >= 0, "plan revision must be non-negative")


def validate_plan(plan: OverallPlan) -> list[str]:
    """Return every invariant violation of *plan*; an empty list means valid.

    Violations are data, not failures: callers decide whether to raise,
    retry, or surface them to reflexion.
    """
    violations: list[str] = []
    if not plan.steps:
        violations.append("plan has no steps")
        return violations
    for position, step in enumerate(plan.steps, start=1):
        if not isinstance(step.action_kind, ActionKind):
            violations.append(
                f"step {position}: unknown action kind {step.action_kind!r}"
            )
        if step.index != position:
            violations.append(
                f"non-contiguous indices: step at position {position} "
                f"has index {step.index}"
            )
    last = plan.steps[-1]
    if last.action_kind != ActionKind.FINISH:
        violations.append("missing terminal finish step")
    for step in plan.steps[:-1]:
        if step.action_kind == ActionKind.FINISH:
            violations.append(f"finish at non-terminal step {step.index}")
    return violations


@dataclass(frozen=True)
class AgentMeta:
    """Profile plus overall plan, generated once at run start.

    The profile is frozen for the whole run; only the plan may be replaced
    (via reflexion), which produces a new AgentMeta value.
    """

    profile: Profile
    plan: OverallPlan

    def with_plan(self, plan: OverallPlan) -> "AgentMeta":
        return AgentMeta(profile=self.profile, plan=plan)


@dataclass(frozen=True)
class ActionRequest:
    """What the model asked the environment to do in one step."""

    kind: ActionKind
    arguments: Mapping[str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "arguments", dict(self.arguments))
        expected = ACTION_ARGUMENT_KEYS[ActionKind(self.kind)]
        got = set(self.arguments)
        _require(
            got == set(expected),
            f"{self.kind.value} arguments must be exactly {sorted(expected)}, "
            f"got {sorted(got)}",
        )
        for key, value in self.arguments.items():
            _require(
                isinstance(value, str),
                f"argument {key!r} must be a string",
            )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ActionRequest):
            return NotImplemented
        return self.kind == other.kind and dict(self.arguments) == dict(
            other.arguments
        )

    def __hash__(self) -> int:
        return hash((self.kind, tuple(sorted(self.arguments.items()))))


@dataclass(frozen=True)
class ArtifactRef:
    """A file produced by a tool invocation (plot, table, report)."""

    name: str
    media_kind: MediaKind
    byte_size: int

    def __post_init__(self) -> None:
        _require(bool(self.name), "artifact name must be non-empty")
        _require(self.byte_size >= 0, "artifact byte_size must be non-negative")
        object.__setattr__(self, "media_kind", MediaKind(self.media_kind))


@dataclass(frozen=True)
class Observation:
    """What the environment returned for one action."""

    kind: ActionKind
    payload: str
    artifacts: tuple[ArtifactRef, ...] = ()
    ok: bool = True
    error_detail: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "artifacts", tuple(self.artifacts))
        if not self.ok:
            _require(
                bool(self.error_detail),
                "failed observation requires error_detail",
            )
        names = [a.name for a in self.artifacts]
        _require(
            len(names) == len(set(names)),
            "artifact names must be unique within an observation",
        )


@dataclass(frozen=True)
class ReflexionOutcome:
    """The summary/reflexion pass over one observation.

    ``revised_plan`` holds the plan *as the model emitted it*: a standalone
    plan for the remaining work (1-based, finish-terminated, revision 0).
    The orchestrator splices it after the frozen, already-executed prefix of
    the current plan.
    """

    summary: str
    verdict: str  # "proceed" | "revise"
    revised_plan: Optional[OverallPlan] = None

    def __post_init__(self) -> None:
        _require(self.verdict in ("proceed", "revise"), "verdict must be proceed|revise")
        _require(
            (self.verdict == "revise") == (self.revised_plan is not None),
            "revised_plan present iff verdict is revise",
        )


@dataclass(frozen=True)
class StepRecord:
    """One completed loop iteration: request, observation, reflexion, and
    the LLM/tool call counts spent on it.

    ``reflexion`` is None for the terminal finish step (no reflexion runs
    after finish) and when reflexion is disabled by configuration.
    """

    step_index: int
    request: ActionRequest
    observation: Observation
    reflexion: Optional[ReflexionOutcome]
    llm_calls: int
    tool_calls: int

    def __post_init__(self) -> None:
        _require(self.step_index >= 1, "step_index is 1-based")
        _require(self.llm_calls >= 1, "a completed step costs at least one LLM call")
        if self.reflexion is not None:
            _require(
                self.llm_calls >= 2,
                "a step with reflexion costs at least two LLM calls",
            )
        _require(self.tool_calls >= 0, "tool_calls must be non-negative")


@dataclass(frozen=True)
class TerminationStatus:
    """Exactly one of: finished, or interrupted with a cause."""

    finished: bool
    cause: Optional[InterruptCause] = None

    def __post_init__(self) -> None:
        _require(
            self.finished == (self.cause is None),
            "finished runs carry no cause; interrupted runs carry exactly one",
        )

    @classmethod
    def finish(cls) -> "TerminationStatus":
        return cls(finished=True)

    @classmethod
    def interrupt(cls, cause: InterruptCause) -> "TerminationStatus":
        return cls(finished=False, cause=InterruptCause(cause))


@dataclass(frozen=True)
class Trajectory:
    """A full episode record: the unit of evaluation and SFT export.

    ``meta`` is the agent meta as initially generated (plan revision 0);
    later revisions are recoverable from the step records. It is None only
    when the run was interrupted before meta generation succeeded.
    ``llm_calls``/``tool_calls`` are run totals and also count calls spent
    on meta generation and on turns aborted by an interrupt, which no step
    record captures.
    """

    query: Query
    meta: Optional[AgentMeta]
    steps: tuple[StepRecord, ...]
    status: TerminationStatus
    wall_time: float
    llm_calls: int
    tool_calls: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        _require(self.wall_time >= 0.0, "wall_time must be non-negative")
        ends_with_finish = bool(self.steps) and (
            self.steps[-1].request.kind == ActionKind.FINISH
        )
        _require(
            self.status.finished == ends_with_finish,
            "finished iff the last request kind is finish",
        )
        step_llm = sum(s.llm_calls for s in self.steps)
        step_tool = sum(s.tool_calls for s in self.steps)
        _require(self.llm_calls >= step_llm, "llm_calls total below per-step sum")
        _require(self.tool_calls >= step_tool, "tool_calls total below per-step sum")
        expected_indices = list(range(1, len(self.steps) + 1))
        _require(
            [s.step_index for s in self.steps] == expected_indices,
            "step indices must be contiguous from 1",
        )


# ---------------------------------------------------------------------------
# Trajectory log format v1
# ---------------------------------------------------------------------------

LOG_VERSION = "v1"


def _plan_to_fields(plan: OverallPlan) -> dict[str, Any]:
    return {
        "revision": plan.revision,
        "steps": [
            {
                "index": s.index,
                "action": s.action_kind.value
                if isinstance(s.action_kind, ActionKind)
                else s.action_kind,
                "goal": s.goal,
            }
            for s in plan.steps
        ],
    }


def _plan_from_fields(data: Any) -> OverallPlan:
    steps = tuple(
        PlanStep(index=s["index"], action_kind=_decode_kind(s["action"]), goal=s["goal"])
        for s in data["steps"]
    )
    return OverallPlan(steps=steps, revision=data["revision"])


def _meta_to_fields(meta: AgentMeta) -> dict[str, Any]:
    return {
        "profile": {
            "role": meta.profile.role_name,
            "description": meta.profile.description,
            "abilities": list(meta.profile.abilities),
        },
        "plan": _plan_to_fields(meta.plan),
    }


def _meta_from_fields(data: Any) -> AgentMeta:
    profile = Profile(
        role_name=data["profile"]["role"],
        description=data["profile"]["description"],
        abilities=tuple(data["profile"]["abilities"]),
    )
    return AgentMeta(profile=profile, plan=_plan_from_fields(data["plan"]))


def _decode_kind(value: Any) -> ActionKind:
    try:
        return ActionKind(value)
    except ValueError:
        raise DecodeError(f"unknown action kind {value!r}") from None


def _step_to_fields(step: StepRecord) -> dict[str, Any]:
    reflexion: Optional[dict[str, Any]] = None
    if step.reflexion is not None:
        reflexion = {
            "summary": step.reflexion.summary,
            "verdict": step.reflexion.verdict,
            "plan": _plan_to_fields(step.reflexion.revised_plan)
            if step.reflexion.revised_plan is not None
            else None,
        }
    return {
        "index": step.step_index,
        "request": {
            "kind": step.request.kind.value,
            "arguments": {k: step.request.arguments[k] for k in sorted(step.request.arguments)},
        },
        "observation": {
            "kind": step.observation.kind.value,
            "payload": step.observation.payload,
            "artifacts": [
                {"name": a.name, "media": a.media_kind.value, "bytes": a.byte_size}
                for a in step.observation.artifacts
            ],
            "ok": step.observation.ok,
            "error": step.observation.error_detail,
        },
        "reflexion": reflexion,
        "llm_calls": step.llm_calls,
        "tool_calls": step.tool_calls,
    }


def _step_from_fields(data: Any) -> StepRecord:
    request = ActionRequest(
        kind=_decode_kind(data["request"]["kind"]),
        arguments=data["request"]["arguments"],
    )
    obs = data["observation"]
    observation = Observation(
        kind=_decode_kind(obs["kind"]),
        payload=obs["payload"],
        artifacts=tuple(
            ArtifactRef(name=a["name"], media_kind=MediaKind(a["media"]), byte_size=a["bytes"])
            for a in obs["artifacts"]
        ),
        ok=obs["ok"],
        error_detail=obs["error"],
    )
    reflexion = None
    if data["reflexion"] is not None:
        r = data["reflexion"]
        reflexion = ReflexionOutcome(
            summary=r["summary"],
            verdict=r["verdict"],
            revised_plan=_plan_from_fields(r["plan"]) if r["plan"] is not None else None,
        )
    return StepRecord(
        step_index=data["index"],
        request=request,
        observation=observation,
        reflexion=reflexion,
        llm_calls=data["llm_calls"],
        tool_calls=data["tool_calls"],
    )


def _dump(record: dict[str, Any]) -> str:
    # Insertion order is the documented field order; ensure_ascii keeps the
    # byte stream identical regardless of platform locale.
    return json.dumps(record, ensure_ascii=True, separators=(",", ":"))


def encode_trajectory(trajectory: Trajectory) -> bytes:
    """Encode *trajectory* into the canonical v1 log byte stream."""
    lines = []
    header = {
        "v": LOG_VERSION,
        "query": {
            "id": trajectory.query.id,
            "text": trajectory.query.text,
            "metadata": {
                k: trajectory.query.metadata[k] for k in sorted(trajectory.query.metadata)
            },
        },
        "meta": _meta_to_fields(trajectory.meta) if trajectory.meta is not None else None,
    }
    lines.append("HDR " + _dump(header))
    for step in trajectory.steps:
        lines.append("STEP " + _dump(_step_to_fields(step)))
    footer = {
        "status": "finished" if trajectory.status.finished else "interrupted",
        "cause": trajectory.status.cause.value if trajectory.status.cause else None,
        "wall_time": trajectory.wall_time,
        "llm_calls": trajectory.llm_calls,
        "tool_calls": trajectory.tool_calls,
    }
    lines.append("END " + _dump(footer))
    return ("\n".join(lines) + "\n").encode("utf-8")


def decode_trajectory(stream: bytes) -> Trajectory:
    """Decode a v1 log byte stream back into a :class:`Trajectory`.

    Raises :class:`DecodeError` on truncated streams, malformed records,
    unknown record tags, and unknown action kinds.
    """
    try:
        text = stream.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DecodeError(f"log is not valid UTF-8: {exc}") from None
    lines = [line for line in text.split("\n") if line]
    if not lines:
        raise DecodeError("unexpected end: empty log")

    def parse_line(line_no: int, line: str, expected_tag: str) -> Any:
        tag, _, body = line.partition(" ")
        if tag != expected_tag:
            raise DecodeError(f"line {line_no}: expected {expected_tag} record, got {tag!r}")
        try:
            return json.loads(body)
        except json.JSONDecodeError as exc:
            raise DecodeError(f"line {line_no}: malformed {tag} record: {exc}") from None

    header = parse_line(1, lines[0], "HDR")
    if not lines[-1].startswith("END "):
        raise DecodeError("unexpected end: missing END record")
    footer = parse_line(len(lines), lines[-1], "END")

    try:
        if header["v"] != LOG_VERSION:
            raise DecodeError(f"unsupported log version {header['v']!r}")
        query = Query(
            id=header["query"]["id"],
            text=header["query"]["text"],
            metadata=header["query"]["metadata"],
        )
        meta = _meta_from_fields(header["meta"]) if header["meta"] is not None else None
        steps = tuple(
            _step_from_fields(parse_line(i + 2, line, "STEP"))
            for i, line in enumerate(lines[1:-1])
        )
        if footer["status"] == "finished":
            status = TerminationStatus.finish()
        elif footer["status"] == "interrupted":
            try:
                status = TerminationStatus.interrupt(InterruptCause(footer["cause"]))
            except ValueError:
                raise DecodeError(f"unknown interrupt cause {footer['cause']!r}") from None
        else:
            raise DecodeError(f"unknown status {footer['status']!r}")
        trajectory = Trajectory(
            query=query,
            meta=meta,
            steps=steps,
            status=status,
            wall_time=footer["wall_time"],
            llm_calls=footer["llm_calls"],
            tool_calls=footer["tool_calls"],
        )
    except DecodeError:
        raise
    except (KeyError, TypeError, ModelError, ValueError) as exc:
        raise DecodeError(f"malformed record: {exc}") from None
    return trajectory


def current_plan(trajectory: Trajectory) -> Optional[OverallPlan]:
    """Reconstruct the plan in force at the end of *trajectory*.

    Replays the revision rule over the step records: a revise outcome after
    step k freezes the first k plan positions (never the terminal finish)
    and splices the emitted remaining-work plan after them.
    """
    if trajectory.meta is None:
        return None
    plan = trajectory.meta.plan
    for step in trajectory.steps:
        if step.reflexion is not None and step.reflexion.verdict == "revise":
            assert step.reflexion.revised_plan is not None
            plan = splice_revision(plan, step.step_index, step.reflexion.revised_plan)
    return plan


def splice_revision(plan: OverallPlan, completed: int, revised: OverallPlan) -> OverallPlan:
    """Apply a revision after *completed* steps: executed plan positions are
    frozen history, the revised plan replaces everything after them."""
    frozen = plan.steps[: min(completed, len(plan.steps) - 1)]
    tail = tuple(
        PlanStep(index=len(frozen) + i, action_kind=s.action_kind, goal=s.goal)
        for i, s in enumerate(revised.steps, start=1)
    )
    return OverallPlan(steps=frozen + tail, revision=plan.revision + 1)


def build_action(kind: ActionKind | str, **arguments: str) -> ActionRequest:
    """Build a validated :class:`ActionRequest` from keyword arguments."""
    return ActionRequest(kind=ActionKind(kind), arguments=arguments)
