"""Categorized tool catalog: the backing store for api-select and api-details.

Catalog file format (v1): UTF-8 JSON Lines. The first non-comment line is a
header object ``{"format": "finagent-catalog", "version": 1}``; every
following line is one tool record with fields in this order::

    name | category | kind | description | input_params | output_params | usage_example

where ``kind`` is ``general`` or ``specific``, ``input_params`` is a list of
``{name, type, required, description}`` objects and ``output_params`` a list
of ``{name, type, description}`` objects. JSON Lines (rather than a
pipe-delimited table) is used because usage examples are multi-line code
snippets. Lines starting with ``#`` and blank lines are ignored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

CATALOG_FORMAT = "finagent-catalog"
CATALOG_VERSION = 1

GENERAL = "general"
SPECIFIC = "specific"

#: Tool families every catalog's general kind is built from.
GENERAL_FAMILIES = ("Web Search", "Code Interpreter", "Finish")


class CatalogError(Exception):
    """Base class for catalog failures."""


class IngestError(CatalogError):
    """The catalog source was malformed; the message names the line."""


class DuplicateToolError(CatalogError):
    """Two records share a tool name."""


class NotFoundError(CatalogError):
    """An unknown tool or category name was requested."""


@dataclass(frozen=True)
class Category:
    name: str
    kind: str  # general | specific

    def __post_init__(self) -> None:
        if self.kind not in (GENERAL, SPECIFIC):
            raise CatalogError(f"category kind must be general|specific, got {self.kind!r}")


@dataclass(frozen=True)
class ToolParam:
    name: str
    type_label: str
    required: bool
    description: str


@dataclass(frozen=True)
class ToolOutput:
    name: str
    type_label: str
    description: str


@dataclass(frozen=True)
class ToolSpec:
    """One catalog entry: the tool's full documentation.

    The description feeds embedding retrieval; the whole spec, formatted by
    :func:`format_tool_spec`, is what api-details returns for code writing.
    """

    name: str
    category: str
    description: str
    input_params: tuple[ToolParam, ...] = ()
    output_params: tuple[ToolOutput, ...] = ()
    usage_example: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "input_params", tuple(self.input_params))
        object.__setattr__(self, "output_params", tuple(self.output_params))
        if not self.name:
            raise CatalogError("tool name must be non-empty")
        if not self.description:
            raise CatalogError(f"tool {self.name}: description must be non-empty")


@dataclass
class Catalog:
    """Read-only after construction; concurrent readers need no locks."""

    specs: dict[str, ToolSpec] = field(default_factory=dict)
    categories: dict[str, Category] = field(default_factory=dict)

    @property
    def counts(self) -> dict[str, int]:
        """Tool count per category name."""
        out = {name: 0 for name in self.categories}
        for spec in self.specs.values():
            out[spec.category] += 1
        return out

    def specific_total(self) -> int:
        return sum(
            1
            for spec in self.specs.values()
            if self.categories[spec.category].kind == SPECIFIC
        )

    def specific_specs(self) -> list[ToolSpec]:
        """Specific-category specs in lexicographic name order."""
        return sorted(
            (
                s
                for s in self.specs.values()
                if self.categories[s.category].kind == SPECIFIC
            ),
            key=lambda s: s.name,
        )


def _param_from_record(data: object, line_no: int) -> ToolParam:
    if not isinstance(data, dict):
        raise IngestError(f"line {line_no}: input param must be an object")
    try:
        return ToolParam(
            name=data["name"],
            type_label=data["type"],
            required=bool(data["required"]),
            description=data.get("description", ""),
        )
    except KeyError as exc:
        raise IngestError(f"line {line_no}: input param missing field {exc}") from None


def _output_from_record(data: object, line_no: int) -> ToolOutput:
    if not isinstance(data, dict):
        raise IngestError(f"line {line_no}: output param must be an object")
    try:
        return ToolOutput(
            name=data["name"],
            type_label=data["type"],
            description=data.get("description", ""),
        )
    except KeyError as exc:
        raise IngestError(f"line {line_no}: output param missing field {exc}") from None


def ingest_catalog(source: Union[str, Path, Iterable[str]]) -> Catalog:
    """Parse a catalog file (path or iterable of lines) into a :class:`Catalog`.

    Rejects malformed records (naming the line) and duplicate tool names.
    An empty file yields an empty catalog.
    """
    if isinstance(source, (str, Path)):
        lines = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = [line.rstrip("\n") for line in source]

    catalog = Catalog()
    saw_header = False
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            record = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise IngestError(f"line {line_no}: not valid JSON: {exc}") from None
        if not isinstance(record, dict):
            raise IngestError(f"line {line_no}: record must be a JSON object")

        if not saw_header:
            if record.get("format") != CATALOG_FORMAT:
                raise IngestError(
                    f"line {line_no}: missing catalog header "
                    f'{{"format": "{CATALOG_FORMAT}", "version": {CATALOG_VERSION}}}'
                )
            if record.get("version") != CATALOG_VERSION:
                raise IngestError(
                    f"line {line_no}: unsupported catalog version {record.get('version')!r}"
                )
            saw_header = True
            continue

        try:
            name = record["name"]
            category_name = record["category"]
            kind = record["kind"]
            description = record["description"]
        except KeyError as exc:
            raise IngestError(f"line {line_no}: record missing field {exc}") from None
        if kind not in (GENERAL, SPECIFIC):
            raise IngestError(f"line {line_no}: kind must be general|specific, got {kind!r}")
        if name in catalog.specs:
            raise DuplicateToolError(f"line {line_no}: duplicate tool name {name!r}")

        existing = catalog.categories.get(category_name)
        if existing is None:
            catalog.categories[category_name] = Category(name=category_name, kind=kind)
        elif existing.kind != kind:
            raise IngestError(
                f"line {line_no}: category {category_name!r} kind conflicts with "
                f"earlier records ({existing.kind} vs {kind})"
            )

        spec = ToolSpec(
            name=name,
            category=category_name,
            description=description,
            input_params=tuple(
                _param_from_record(p, line_no) for p in record.get("input_params", [])
            ),
            output_params=tuple(
                _output_from_record(p, line_no) for p in record.get("output_params", [])
            ),
            usage_example=record.get("usage_example", ""),
        )
        if kind == SPECIFIC and not spec.usage_example:
            raise IngestError(f"line {line_no}: specific tool {name!r} needs a usage example")
        catalog.specs[name] = spec

    if lines and not saw_header and any(l.strip() and not l.strip().startswith("#") for l in lines):
        raise IngestError("line 1: missing catalog header")
    return catalog


def write_catalog(catalog: Catalog, path: Union[str, Path]) -> None:
    """Serialize *catalog* back to the v1 file format (deterministic order)."""
    out = [json.dumps({"format": CATALOG_FORMAT, "version": CATALOG_VERSION})]
    for name in sorted(catalog.specs):
        spec = catalog.specs[name]
        out.append(
            json.dumps(
                {
                    "name": spec.name,
                    "category": spec.category,
                    "kind": catalog.categories[spec.category].kind,
                    "description": spec.description,
                    "input_params": [
                        {
                            "name": p.name,
                            "type": p.type_label,
                            "required": p.required,
                            "description": p.description,
                        }
                        for p in spec.input_params
                    ],
                    "output_params": [
                        {"name": p.name, "type": p.type_label, "description": p.description}
                        for p in spec.output_params
                    ],
                    "usage_example": spec.usage_example,
                },
                ensure_ascii=True,
            )
        )
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def get_details(catalog: Catalog, name: str) -> ToolSpec:
    """Full spec for one tool; raises :class:`NotFoundError` for unknown names.

    The orchestrator catches the not-found case and turns it into a failed
    observation for reflexion to handle; it is not a crash.
    """
    try:
        return catalog.specs[name]
    except KeyError:
        raise NotFoundError(f"unknown tool: {name}") from None


def list_category(catalog: Catalog, category: str) -> list[str]:
    """Tool names in *category*, lexicographically ordered (stable across
    runs and platforms)."""
    if category not in catalog.categories:
        raise NotFoundError(f"unknown category: {category}")
    return sorted(
        name for name, spec in catalog.specs.items() if spec.category == category
    )


def format_tool_spec(spec: ToolSpec) -> str:
    """Render a spec as the documentation block handed to the model verbatim."""
    lines = [
        f"Tool: {spec.name}",
        f"Category: {spec.category}",
        f"Description: {spec.description}",
        "Input parameters:",
    ]
    if spec.input_params:
        for p in spec.input_params:
            req = "required" if p.required else "optional"
            lines.append(f"  - {p.name} ({p.type_label}, {req}): {p.description}")
    else:
        lines.append("  (none)")
    lines.append("Output parameters:")
    if spec.output_params:
        for p in spec.output_params:
            lines.append(f"  - {p.name} ({p.type_label}): {p.description}")
    else:
        lines.append("  (none)")
    if spec.usage_example:
        lines.append("Usage example:")
        lines.append(spec.usage_example)
    return "\n".join(lines)


def category_report(catalog: Catalog) -> str:
    """Per-category count table, general families first, then specific."""
    counts = catalog.counts
    rows = []
    general = sorted(
        (n for n, c in catalog.categories.items() if c.kind == GENERAL),
        key=lambda n: (GENERAL_FAMILIES.index(n) if n in GENERAL_FAMILIES else 99, n),
    )
    specific = sorted(n for n, c in catalog.categories.items() if c.kind == SPECIFIC)
    rows.append(f"{'Categories':<12}{'Name':<22}{'Diversity':>9}")
    for i, name in enumerate(general):
        label = "General" if i == 0 else ""
        rows.append(f"{label:<12}{name:<22}{counts[name]:>9}")
    for i, name in enumerate(specific):
        label = "Specific" if i == 0 else ""
        rows.append(f"{label:<12}{name:<22}{counts[name]:>9}")
    rows.append(f"{'':<12}{'Total specific':<22}{catalog.specific_total():>9}")
    return "\n".join(rows)
