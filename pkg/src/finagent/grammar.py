"""The output envelope grammar: strict parsing of model turns into typed values.

Every model turn must be a single JSON object (optionally wrapped in one
markdown code fence, which is tolerated and stripped). Three envelope
shapes exist:

* agent meta   ``{"profile": {"role", "description", "abilities"}, "plan": [{"action", "goal"}, ...]}``
* action       ``{"action": <kind>, ...kind-specific arguments}``
* reflexion    ``{"summary": ..., "verdict": "proceed"}`` or
               ``{"summary": ..., "verdict": "revise", "plan": [...]}``

Parsers are total: any input string yields either a typed value or a
:class:`ParseFailure` carrying a reason and, when known, a character
position. They never raise anything else. Each parser has a matching
serializer and ``parse(serialize(x)) == x`` holds for every typed value.
"""

from __future__ import annotations

import json
import re
from typing import Any

from .model import (
    ACTION_ARGUMENT_KEYS,
    ActionKind,
    ActionRequest,
    AgentMeta,
    OverallPlan,
    PlanStep,
    Profile,
    ReflexionOutcome,
    validate_plan,
)


class ParseFailure(Exception):
    """A model turn violated the envelope grammar."""

    def __init__(self, reason: str, position: int | None = None):
        self.reason = reason
        self.position = position
        suffix = f" (at position {position})" if position is not None else ""
        super().__init__(f"{reason}{suffix}")


_FENCE_RE = re.compile(r"\A\s*```[a-zA-Z0-9_-]*\s*\n(.*?)\n?\s*```\s*\Z", re.DOTALL)


def _load_object(raw: str) -> dict[str, Any]:
    if not isinstance(raw, str):
        raise ParseFailure(f"envelope must be text, got {type(raw).__name__}")
    text = raw
    fenced = _FENCE_RE.match(text)
    if fenced:
        text = fenced.group(1)
    if not text.strip():
        raise ParseFailure("empty envelope", position=0)
    try:
        value = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseFailure(f"not a JSON envelope: {exc.msg}", position=exc.pos) from None
    if not isinstance(value, dict):
        raise ParseFailure(f"envelope must be a JSON object, got {type(value).__name__}")
    return value


def _expect_keys(obj: dict[str, Any], required: tuple[str, ...], context: str,
                 optional: tuple[str, ...] = ()) -> None:
    got = set(obj)
    missing = [k for k in required if k not in got]
    if missing:
        raise ParseFailure(f"{context}: missing key {missing[0]!r}")
    extra = sorted(got - set(required) - set(optional))
    if extra:
        raise ParseFailure(f"{context}: unexpected key {extra[0]!r}")


def _expect_str(obj: dict[str, Any], key: str, context: str) -> str:
    value = obj[key]
    if not isinstance(value, str):
        raise ParseFailure(f"{context}: {key!r} must be a string")
    return value


def _parse_plan(data: Any, context: str) -> OverallPlan:
    if not isinstance(data, list) or not data:
        raise ParseFailure(f"{context}: plan must be a non-empty list of steps")
    steps = []
    for i, raw_step in enumerate(data, start=1):
        if not isinstance(raw_step, dict):
            raise ParseFailure(f"{context}: plan step {i} must be an object")
        _expect_keys(raw_step, ("action", "goal"), f"{context}: plan step {i}")
        action = _expect_str(raw_step, "action", f"{context}: plan step {i}")
        goal = _expect_str(raw_step, "goal", f"{context}: plan step {i}")
        steps.append(PlanStep(index=i, action_kind=action, goal=goal))
    plan = OverallPlan(steps=tuple(steps), revision=0)
    violations = validate_plan(plan)
    if violations:
        raise ParseFailure(f"{context}: invalid plan: {violations[0]}")
    return plan


def parse_agent_meta(raw: str) -> AgentMeta:
    """Parse a profile + overall-plan envelope.

    A plan without a terminal finish step is rejected here rather than
    silently repaired; the caller's retry prompt surfaces the reason so the
    model can fix its own output.
    """
    obj = _load_object(raw)
    _expect_keys(obj, ("profile", "plan"), "agent meta")
    raw_profile = obj["profile"]
    if not isinstance(raw_profile, dict):
        raise ParseFailure("agent meta: 'profile' must be an object")
    _expect_keys(raw_profile, ("role", "description", "abilities"), "profile")
    role = _expect_str(raw_profile, "role", "profile")
    description = _expect_str(raw_profile, "description", "profile")
    abilities = raw_profile["abilities"]
    if (
        not isinstance(abilities, list)
        or not abilities
        or not all(isinstance(a, str) for a in abilities)
    ):
        raise ParseFailure("profile: 'abilities' must be a non-empty list of strings")
    if not role:
        raise ParseFailure("profile: 'role' must be non-empty")
    plan = _parse_plan(obj["plan"], "agent meta")
    return AgentMeta(
        profile=Profile(role_name=role, description=description, abilities=tuple(abilities)),
        plan=plan,
    )


def parse_action(raw: str) -> ActionRequest:
    """Parse an action envelope into a typed request.

    code-exec payloads pass through verbatim; the code itself is not
    validated here (the sandbox reports execution failures).
    """
    obj = _load_object(raw)
    if "action" not in obj:
        raise ParseFailure("action: missing key 'action'")
    kind_raw = _expect_str(obj, "action", "action")
    try:
        kind = ActionKind(kind_raw)
    except ValueError:
        raise ParseFailure(f"action: unknown action kind {kind_raw!r}") from None
    arg_keys = ACTION_ARGUMENT_KEYS[kind]
    _expect_keys(obj, ("action",) + arg_keys, f"action {kind.value}")
    arguments = {key: _expect_str(obj, key, f"action {kind.value}") for key in arg_keys}
    return ActionRequest(kind=kind, arguments=arguments)


def parse_reflexion(raw: str) -> ReflexionOutcome:
    """Parse a summary/reflexion envelope.

    A revise verdict must embed a plan that passes plan validation; the
    embedded plan describes the remaining work as a standalone plan.
    """
    obj = _load_object(raw)
    _expect_keys(obj, ("summary", "verdict"), "reflexion", optional=("plan",))
    summary = _expect_str(obj, "summary", "reflexion")
    verdict = _expect_str(obj, "verdict", "reflexion")
    if verdict not in ("proceed", "revise"):
        raise ParseFailure(f"reflexion: verdict must be proceed|revise, got {verdict!r}")
    if verdict == "proceed":
        if "plan" in obj:
            raise ParseFailure("reflexion: proceed verdict must not carry a plan")
        return ReflexionOutcome(summary=summary, verdict="proceed")
    if "plan" not in obj:
        raise ParseFailure("reflexion: revise verdict requires a plan")
    plan = _parse_plan(obj["plan"], "reflexion")
    return ReflexionOutcome(summary=summary, verdict="revise", revised_plan=plan)


# ---------------------------------------------------------------------------
# Serialization (the inverse direction, used for transcripts and SFT targets)
# ---------------------------------------------------------------------------


def _dump(obj: dict[str, Any]) -> str:
    return json.dumps(obj, ensure_ascii=True, separators=(", ", ": "))


def _plan_to_obj(plan: OverallPlan) -> list[dict[str, str]]:
    return [
        {
            "action": s.action_kind.value
            if isinstance(s.action_kind, ActionKind)
            else str(s.action_kind),
            "goal": s.goal,
        }
        for s in plan.steps
    ]


def serialize_agent_meta(meta: AgentMeta) -> str:
    return _dump(
        {
            "profile": {
                "role": meta.profile.role_name,
                "description": meta.profile.description,
                "abilities": list(meta.profile.abilities),
            },
            "plan": _plan_to_obj(meta.plan),
        }
    )


def serialize_action(request: ActionRequest) -> str:
    obj: dict[str, Any] = {"action": request.kind.value}
    for key in ACTION_ARGUMENT_KEYS[request.kind]:
        obj[key] = request.arguments[key]
    return _dump(obj)


def serialize_reflexion(outcome: ReflexionOutcome) -> str:
    obj: dict[str, Any] = {"summary": outcome.summary, "verdict": outcome.verdict}
    if outcome.revised_plan is not None:
        obj["plan"] = _plan_to_obj(outcome.revised_plan)
    return _dump(obj)


# ---------------------------------------------------------------------------
# Grammar descriptions bound into prompts
# ---------------------------------------------------------------------------

META_GRAMMAR = """Reply with exactly one JSON object and nothing else:
{"profile": {"role": "<role name>", "description": "<one paragraph>", "abilities": ["<ability>", ...]},
 "plan": [{"action": "<api-select|api-details|code-exec|web-search|finish>", "goal": "<what this step achieves>"}, ...]}
The plan must contain at least one step and its last step must be the finish action."""

ACTION_GRAMMAR = """Reply with exactly one JSON object and nothing else. One of:
{"action": "api-select", "category": "<tool category>", "task": "<what you need>"}
{"action": "api-details", "tool": "<tool name>"}
{"action": "code-exec", "code": "<python source>"}
{"action": "web-search", "query": "<search query>"}
{"action": "finish", "answer": "<final answer text>"}"""

REFLEXION_GRAMMAR = """Reply with exactly one JSON object and nothing else. Either:
{"summary": "<condensed insight from the observation>", "verdict": "proceed"}
or, when the plan must change:
{"summary": "<condensed insight>", "verdict": "revise",
 "plan": [{"action": "<kind>", "goal": "<goal>"}, ...]}
A revised plan lists the remaining steps only and must end with the finish action."""
