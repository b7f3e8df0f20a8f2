"""Seeded-random builders shared across the test modules.

Everything takes an explicit ``random.Random`` so tests stay reproducible.
"""

from __future__ import annotations

import json
import random
import string

from finagent.model import (
    ActionKind,
    ActionRequest,
    AgentMeta,
    ArtifactRef,
    InterruptCause,
    MediaKind,
    Observation,
    OverallPlan,
    PlanStep,
    Profile,
    Query,
    ReflexionOutcome,
    StepRecord,
    TerminationStatus,
    Trajectory,
    build_action,
)

_WORDS = (
    "alpha bravo delta echo fetch gamma index kappa lima macro omega price "
    "quote rho series sigma table theta volume zeta"
).split()


def random_text(rng: random.Random, n_words: int = 6) -> str:
    return " ".join(rng.choice(_WORDS) for _ in range(n_words))


def random_plan(rng: random.Random, max_steps: int = 5) -> OverallPlan:
    n = rng.randint(1, max_steps)
    kinds = [
        rng.choice(
            [ActionKind.API_SELECT, ActionKind.API_DETAILS, ActionKind.CODE_EXEC, ActionKind.WEB_SEARCH]
        )
        for _ in range(n - 1)
    ] + [ActionKind.FINISH]
    steps = tuple(
        PlanStep(index=i + 1, action_kind=kind, goal=random_text(rng, 4))
        for i, kind in enumerate(kinds)
    )
    return OverallPlan(steps=steps, revision=0)


def random_profile(rng: random.Random) -> Profile:
    return Profile(
        role_name=random_text(rng, 2),
        description=random_text(rng, 10),
        abilities=tuple(random_text(rng, 2) for _ in range(rng.randint(1, 4))),
    )


def random_meta(rng: random.Random) -> AgentMeta:
    return AgentMeta(profile=random_profile(rng), plan=random_plan(rng))


def random_request(rng: random.Random, kind: ActionKind | None = None) -> ActionRequest:
    kind = kind or rng.choice(list(ActionKind))
    if kind == ActionKind.API_SELECT:
        return build_action(kind, category=random_text(rng, 1), task=random_text(rng))
    if kind == ActionKind.API_DETAILS:
        return build_action(kind, tool=random_text(rng, 1))
    if kind == ActionKind.CODE_EXEC:
        return build_action(kind, code=f"print({rng.randint(0, 99)})\n")
    if kind == ActionKind.WEB_SEARCH:
        return build_action(kind, query=random_text(rng))
    return build_action(kind, answer=random_text(rng, 8))


def random_observation(rng: random.Random, kind: ActionKind) -> Observation:
    ok = rng.random() > 0.2
    artifacts = ()
    if kind == ActionKind.CODE_EXEC and rng.random() > 0.5:
        artifacts = (
            ArtifactRef(name="out.csv", media_kind=MediaKind.TABLE, byte_size=rng.randint(0, 999)),
            ArtifactRef(name="plot.svg", media_kind=MediaKind.IMAGE, byte_size=rng.randint(1, 9999)),
        )
    return Observation(
        kind=kind,
        payload=random_text(rng, 12),
        artifacts=artifacts,
        ok=ok,
        error_detail=None if ok else random_text(rng, 3),
    )


def random_reflexion(rng: random.Random) -> ReflexionOutcome:
    if rng.random() > 0.3:
        return ReflexionOutcome(summary=random_text(rng), verdict="proceed")
    return ReflexionOutcome(
        summary=random_text(rng), verdict="revise", revised_plan=random_plan(rng)
    )


def random_trajectory(rng: random.Random, max_steps: int = 6) -> Trajectory:
    finished = rng.random() > 0.3
    n_steps = rng.randint(1, max_steps) if finished else rng.randint(0, max_steps)
    steps = []
    for i in range(1, n_steps + 1):
        last = finished and i == n_steps
        kind = (
            ActionKind.FINISH
            if last
            else rng.choice(
                [ActionKind.API_SELECT, ActionKind.API_DETAILS, ActionKind.CODE_EXEC, ActionKind.WEB_SEARCH]
            )
        )
        request = random_request(rng, kind)
        reflexion = None if last else random_reflexion(rng)
        steps.append(
            StepRecord(
                step_index=i,
                request=request,
                observation=random_observation(rng, kind),
                reflexion=reflexion,
                llm_calls=1 if reflexion is None else rng.randint(2, 4),
                tool_calls=0 if last else 1,
            )
        )
    if finished:
        status = TerminationStatus.finish()
    else:
        status = TerminationStatus.interrupt(rng.choice(list(InterruptCause)))
    meta = None if (not finished and n_steps == 0 and rng.random() < 0.5) else random_meta(rng)
    step_llm = sum(s.llm_calls for s in steps)
    step_tool = sum(s.tool_calls for s in steps)
    return Trajectory(
        query=Query(id=f"q-{rng.randrange(10**9)}", text=random_text(rng), metadata={"split": "test"}),
        meta=meta,
        steps=tuple(steps),
        status=status,
        wall_time=round(rng.random() * 10, 6),
        llm_calls=step_llm + rng.randint(1, 3),
        tool_calls=step_tool,
    )


# ---------------------------------------------------------------------------
# Envelope generators and structural mutations for the fuzz harness
# ---------------------------------------------------------------------------


def random_meta_envelope(rng: random.Random) -> str:
    meta = random_meta(rng)
    return json.dumps(
        {
            "profile": {
                "role": meta.profile.role_name,
                "description": meta.profile.description,
                "abilities": list(meta.profile.abilities),
            },
            "plan": [
                {"action": s.action_kind.value, "goal": s.goal} for s in meta.plan.steps
            ],
        }
    )


def random_action_envelope(rng: random.Random) -> str:
    request = random_request(rng)
    obj = {"action": request.kind.value}
    obj.update(request.arguments)
    return json.dumps(obj)


def random_reflexion_envelope(rng: random.Random) -> str:
    outcome = random_reflexion(rng)
    obj = {"summary": outcome.summary, "verdict": outcome.verdict}
    if outcome.revised_plan is not None:
        obj["plan"] = [
            {"action": s.action_kind.value, "goal": s.goal}
            for s in outcome.revised_plan.steps
        ]
    return json.dumps(obj)


_STRUCTURAL = "{}[],:\""


def mutate_envelope(rng: random.Random, text: str) -> str:
    """One structural mutation: the result is either invalid or parses to a
    semantically identical value (e.g. whitespace tweaks); mutations inside
    free-string content are deliberately excluded."""
    choice = rng.randrange(6)
    if choice == 0:  # truncate
        cut = rng.randrange(1, len(text))
        return text[:cut]
    if choice == 1:  # delete a structural character
        positions = [i for i, c in enumerate(text) if c in _STRUCTURAL]
        i = rng.choice(positions)
        return text[:i] + text[i + 1 :]
    if choice == 2:  # duplicate a structural character
        positions = [i for i, c in enumerate(text) if c in _STRUCTURAL]
        i = rng.choice(positions)
        return text[: i + 1] + text[i] + text[i + 1 :]
    if choice == 3:  # corrupt a key name
        for key in ("action", "goal", "plan", "profile", "summary", "verdict", "role"):
            quoted = f'"{key}"'
            if quoted in text:
                return text.replace(quoted, f'"{key}x"', 1)
        return text + "}"
    if choice == 4:  # unknown action kind
        for kind in ActionKind:
            quoted = f'"{kind.value}"'
            if quoted in text:
                return text.replace(quoted, '"api-call"', 1)
        return "[" + text
    # insert garbage token at a structural boundary
    positions = [i for i, c in enumerate(text) if c in "{[,"]
    i = rng.choice(positions)
    return text[: i + 1] + "@@" + text[i + 1 :]
