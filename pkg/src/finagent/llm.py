"""Backend-agnostic LLM access: prompt rendering, token budgeting, backends.

Backends are interchangeable behind one ``complete(prompt) -> text``
interface. The scripted backend replays a recorded transcript keyed by call
ordinal, which makes the whole engine a pure function of (query, catalog,
transcript) and is what every deterministic test runs against. The HTTP
backend speaks a minimal JSON POST protocol for real deployments.

Transcript file format: JSON Lines, one record per expected call, fields
``{"response": "<raw model text>", "prompt_sha256": "<hex>"}`` where the
hash is optional and only enforced in strict mode.
"""

from __future__ import annotations

import hashlib
import json
import re
import string
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Optional, Protocol, Union

try:
    from importlib.resources import files as _resource_files
except ImportError:  # pragma: no cover
    _resource_files = None


class BackendError(Exception):
    """Non-retriable backend failure (bad config, exhausted transcript)."""


class TransportError(BackendError):
    """Transient transport failure; bounded retries apply."""


class RenderError(Exception):
    """A required template slot was left unbound."""


class TaskKind(str, Enum):
    """The four model sub-tasks the engine prompts for."""

    AGENT_META_GEN = "agent-meta-gen"
    ACTION_TAKING = "action-taking"
    CODE_WRITING = "code-writing"
    SUMMARY_REFLEXION = "summary-reflexion"


@dataclass(frozen=True)
class LlmConfig:
    """Token budgets plus opaque decoding settings passed through to backends."""

    context_budget: int = 8192
    output_budget: int = 2048
    settings: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.context_budget <= 0 or self.output_budget <= 0:
            raise ValueError("token budgets must be positive")
        object.__setattr__(self, "settings", dict(self.settings))


def estimate_tokens(text: str) -> int:
    """Heuristic token count: ceil(utf8-bytes / 4).

    Used to detect prompt overflow before any call is made, without needing
    a specific model's tokenizer. It is monotone in text length and
    subadditive up to one token. Backends with an exact tokenizer can
    supply it via ``count_tokens``.
    """
    n = len(text.encode("utf-8"))
    return (n + 3) // 4


class LlmBackend(Protocol):
    """A completion backend; must be safe for concurrent calls or wrapped."""

    @property
    def name(self) -> str: ...

    def complete(self, prompt: str, config: LlmConfig) -> str: ...


class ScriptedBackend:
    """Replays a fixed transcript, one response per call, in order.

    Stateful (call ordinal), so each run needs its own instance. In strict
    mode, records carrying a prompt hash reject prompts that do not match,
    which pins a transcript to the exact prompt sequence it was recorded
    against.
    """

    def __init__(self, responses: list[dict[str, Any]], strict: bool = False):
        self._records = responses
        self._strict = strict
        self._cursor = 0

    @classmethod
    def from_file(cls, path: Union[str, Path], strict: bool = False) -> "ScriptedBackend":
        records = []
        for line_no, line in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1
        ):
            if not line.strip() or line.startswith("#"):
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BackendError(f"transcript line {line_no}: not valid JSON: {exc}") from None
            if "response" not in record:
                raise BackendError(f"transcript line {line_no}: missing 'response'")
            records.append(record)
        return cls(records, strict=strict)

    @property
    def name(self) -> str:
        return "scripted"

    @property
    def calls_made(self) -> int:
        return self._cursor

    def complete(self, prompt: str, config: LlmConfig) -> str:
        if self._cursor >= len(self._records):
            raise BackendError(
                f"transcript exhausted after {len(self._records)} calls"
            )
        record = self._records[self._cursor]
        if self._strict and record.get("prompt_sha256"):
            got = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
            if got != record["prompt_sha256"]:
                raise BackendError(
                    f"call {self._cursor + 1}: prompt hash {got[:12]} does not match "
                    f"recorded {record['prompt_sha256'][:12]}"
                )
        self._cursor += 1
        return record["response"]


class HttpBackend:
    """Minimal JSON-over-HTTP backend.

    POSTs ``{"model", "prompt", "max_tokens", ...settings}`` and expects
    ``{"text": "..."}`` back. Auth token, when set, goes in the
    Authorization header. Connection-level failures raise
    :class:`TransportError` so :func:`complete` can retry them.
    """

    def __init__(
        self,
        endpoint: str,
        model: str = "default",
        token: Optional[str] = None,
        timeout: float = 60.0,
    ):
        self.endpoint = endpoint
        self.model = model
        self.token = token
        self.timeout = timeout

    @property
    def name(self) -> str:
        return f"http:{self.model}"

    def complete(self, prompt: str, config: LlmConfig) -> str:
        body = {
            "model": self.model,
            "prompt": prompt,
            "max_tokens": config.output_budget,
        }
        body.update(config.settings)
        request = urllib.request.Request(
            self.endpoint,
            data=json.dumps(body).encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        if self.token:
            request.add_header("Authorization", f"Bearer {self.token}")
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            raise BackendError(f"backend returned HTTP {exc.code}") from exc
        except (urllib.error.URLError, TimeoutError, ConnectionError, OSError) as exc:
            raise TransportError(f"transport failure: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise BackendError(f"backend returned invalid JSON: {exc}") from exc
        if "text" not in payload:
            raise BackendError("backend response missing 'text'")
        return payload["text"]


def complete(
    backend: LlmBackend,
    config: LlmConfig,
    prompt: str,
    max_transport_retries: int = 2,
    retry_sleep: float = 0.0,
) -> str:
    """One accounted LLM call with bounded retries on transport failures.

    Prompt-budget enforcement is the caller's job (overflow must surface as
    a run-level interrupt, not an exception from here).
    """
    attempts = 0
    while True:
        try:
            return backend.complete(prompt, config)
        except TransportError:
            attempts += 1
            if attempts > max_transport_retries:
                raise
            if retry_sleep:
                time.sleep(retry_sleep)


# ---------------------------------------------------------------------------
# Prompt templates
# ---------------------------------------------------------------------------

_IDENT_RE = re.compile(r"\$(?:\{([_a-z][_a-z0-9]*)\}|([_a-z][_a-z0-9]*))", re.IGNORECASE)


@dataclass(frozen=True)
class PromptTemplate:
    """An editable text asset with ``${slot}`` placeholders.

    Every placeholder that appears in the body is required; rendering with
    an unbound slot fails (never ships a prompt with residual markers).
    Slot values are substituted once and never re-scanned, so payloads
    containing ``$`` are safe.
    """

    task: TaskKind
    body: str

    @property
    def slots(self) -> tuple[str, ...]:
        seen: list[str] = []
        for match in _IDENT_RE.finditer(self.body):
            name = match.group(1) or match.group(2)
            if name not in seen:
                seen.append(name)
        return tuple(seen)


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    token_estimate: int


def render_prompt(template: PromptTemplate, context: Mapping[str, str]) -> RenderedPrompt:
    """Substitute slot bindings into the template body.

    Deterministic: identical context yields byte-identical prompts. Raises
    :class:`RenderError` naming the first unbound slot.
    """
    missing = [slot for slot in template.slots if slot not in context]
    if missing:
        raise RenderError(f"slot {missing[0]!r} unbound for {template.task.value} template")
    try:
        text = string.Template(template.body).substitute(context)
    except (KeyError, ValueError) as exc:
        raise RenderError(f"template substitution failed: {exc}") from None
    return RenderedPrompt(text=text, token_estimate=estimate_tokens(text))


_TEMPLATE_FILES = {
    TaskKind.AGENT_META_GEN: "agent_meta.txt",
    TaskKind.ACTION_TAKING: "action.txt",
    TaskKind.CODE_WRITING: "code_writing.txt",
    TaskKind.SUMMARY_REFLEXION: "reflexion.txt",
}


def load_templates(directory: Optional[Union[str, Path]] = None) -> dict[TaskKind, PromptTemplate]:
    """Load the four task templates, from *directory* or the packaged defaults."""
    templates: dict[TaskKind, PromptTemplate] = {}
    for task, filename in _TEMPLATE_FILES.items():
        if directory is not None:
            body = (Path(directory) / filename).read_text(encoding="utf-8")
        else:
            body = (_resource_files("finagent") / "templates" / filename).read_text(
                encoding="utf-8"
            )
        templates[task] = PromptTemplate(task=task, body=body)
    return templates
