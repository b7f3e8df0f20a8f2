"""Deterministic synthetic fixtures: catalog, retrieval queries, transcripts.

The shipped catalog mirrors the production inventory shape (ten specific
categories totalling 642 tools plus the general web-search / code-interpreter
/ finish families) with descriptions generated purely from (category, index).
Each description carries two designed hooks for retrieval tests:

* a cross-category token (the zero-padded index, e.g. ``042``) shared by the
  same-index tool of every category, which creates near-tie distractors for
  unfiltered embedding recall, and
* a globally unique dataset code (e.g. ``stock042``) that pins exact planted
  lookups.

Everything here is a pure function of its inputs; fixtures regenerate
byte-identically on any platform.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

from . import grammar
from .catalog import (
    Catalog,
    Category,
    GENERAL,
    SPECIFIC,
    ToolOutput,
    ToolParam,
    ToolSpec,
    write_catalog,
)
from .model import (
    ActionKind,
    AgentMeta,
    OverallPlan,
    PlanStep,
    Profile,
    Query,
    ReflexionOutcome,
    build_action,
)

#: (category name, tool-name slug, tool count): the specific inventory shape.
SPECIFIC_CATEGORIES: tuple[tuple[str, str, int], ...] = (
    ("Stock", "stock", 243),
    ("Fund", "fund", 46),
    ("Futures", "futures", 35),
    ("Foreign exchange", "fx", 6),
    ("Index", "index", 59),
    ("Interest Rate", "rate", 9),
    ("Currency", "currency", 3),
    ("Macroeconomics", "macro", 186),
    ("Option", "option", 32),
    ("Bond", "bond", 23),
)

TOPICS: tuple[str, ...] = (
    "hist",
    "quote",
    "rank",
    "flow",
    "news",
    "holder",
    "margin",
    "valuation",
    "forecast",
    "calendar",
)

TOPIC_PHRASES: dict[str, str] = {
    "hist": "daily open, high, low, close and volume history",
    "quote": "the latest quote snapshot with bid and ask",
    "rank": "ranking table by turnover and momentum",
    "flow": "money flow in and out by session",
    "news": "headline feed with timestamps",
    "holder": "holder structure and concentration",
    "margin": "margin balance and short interest",
    "valuation": "valuation multiples over time",
    "forecast": "consensus forecast revisions",
    "calendar": "event calendar with ex-dates",
}

GOLDEN_QUERY_ID = "golden-nvda"
GOLDEN_TOOL = "stock_hist_000"


def tool_name(slug: str, i: int) -> str:
    return f"{slug}_{TOPICS[i % len(TOPICS)]}_{i:03d}"


def tool_description(category: str, slug: str, i: int) -> str:
    phrase = TOPIC_PHRASES[TOPICS[i % len(TOPICS)]]
    return (
        f"Fetch {phrase} for one {category} series. "
        f"Returns tabular rows indexed {i:03d} with date-aligned fields. "
        f"Dataset code {slug}{i:03d}."
    )


def _params_for_topic(topic: str) -> tuple[ToolParam, ...]:
    symbol = ToolParam("symbol", "string", True, "instrument symbol, e.g. NVDA")
    if topic == "hist":
        return (
            symbol,
            ToolParam("start", "string", True, "first date, YYYY-MM-DD, inclusive"),
            ToolParam("end", "string", True, "last date, YYYY-MM-DD, inclusive"),
        )
    if topic == "quote":
        return (symbol,)
    return (symbol, ToolParam("window", "integer", False, "lookback window in rows"))


def _outputs_for_topic(topic: str) -> tuple[ToolOutput, ...]:
    if topic == "hist":
        return tuple(
            ToolOutput(f, "number" if f != "date" else "string", f"{f} per row")
            for f in ("date", "open", "high", "low", "close", "volume")
        )
    return (
        ToolOutput("date", "string", "row date"),
        ToolOutput("value", "number", "row value"),
    )


def _usage_for(name: str, topic: str) -> str:
    if topic == "hist":
        return (
            "import finmock\n"
            f'table = finmock.sdk_call("{name}", symbol="NVDA", '
            'start="2024-01-02", end="2024-01-04")\n'
            "print(table.to_csv())"
        )
    return f'import finmock\ntable = finmock.sdk_call("{name}", symbol="NVDA")\nprint(table.to_csv())'


def build_catalog() -> Catalog:
    """The full synthetic catalog: 642 specific tools + 5 general tools."""
    catalog = Catalog()
    for family, names in (
        ("Web Search", ("web_search_general", "web_search_news", "web_search_finance")),
        ("Code Interpreter", ("code_interpreter",)),
        ("Finish", ("finish",)),
    ):
        catalog.categories[family] = Category(name=family, kind=GENERAL)
        for name in names:
            scope = name.rsplit("_", 1)[-1] if family == "Web Search" else family.lower()
            catalog.specs[name] = ToolSpec(
                name=name,
                category=family,
                description=f"General {scope} capability provided by the runtime.",
                input_params=(ToolParam("input", "string", True, "free-form input"),),
                output_params=(ToolOutput("result", "string", "raw result text"),),
            )
    for category, slug, count in SPECIFIC_CATEGORIES:
        catalog.categories[category] = Category(name=category, kind=SPECIFIC)
        for i in range(count):
            topic = TOPICS[i % len(TOPICS)]
            name = tool_name(slug, i)
            catalog.specs[name] = ToolSpec(
                name=name,
                category=category,
                description=tool_description(category, slug, i),
                input_params=_params_for_topic(topic),
                output_params=_outputs_for_topic(topic),
                usage_example=_usage_for(name, topic),
            )
    return catalog


def write_catalog_fixture(path: Union[str, Path]) -> None:
    write_catalog(build_catalog(), path)


# ---------------------------------------------------------------------------
# Retrieval query fixture (planted gold, cross-category distractors)
# ---------------------------------------------------------------------------


def build_retrieval_queries() -> list[dict]:
    """Queries whose gold tool is planted per (category, index).

    The text reuses the shared topic/index tokens but never a category word,
    so every category's same-index tool is a near-tie distractor for
    unfiltered recall while the category-filtered ranking pins the gold.
    """
    queries = []
    for index in (0, 1, 2):
        for category, slug, _count in SPECIFIC_CATEGORIES:
            topic = TOPICS[index % len(TOPICS)]
            queries.append(
                {
                    "id": f"q-{slug}-{index:03d}",
                    "task": (
                        f"need {TOPIC_PHRASES[topic]} rows indexed {index:03d} as a table"
                    ),
                    "category": category,
                    "gold": [tool_name(slug, index)],
                }
            )
    # Two deeper-index queries exercise the recall cap on large categories.
    for category, slug, index in (("Stock", "stock", 141), ("Macroeconomics", "macro", 52)):
        topic = TOPICS[index % len(TOPICS)]
        queries.append(
            {
                "id": f"q-{slug}-{index:03d}",
                "task": f"need {TOPIC_PHRASES[topic]} rows indexed {index:03d} as a table",
                "category": category,
                "gold": [tool_name(slug, index)],
            }
        )
    return queries


def write_retrieval_queries(path: Union[str, Path]) -> None:
    lines = [json.dumps(q, ensure_ascii=True) for q in build_retrieval_queries()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Golden run fixture
# ---------------------------------------------------------------------------


def golden_query() -> Query:
    return Query(
        id=GOLDEN_QUERY_ID,
        text="How did NVDA shares move over the first three trading days of 2024?",
        metadata={"source": "fixture"},
    )


def _golden_meta() -> AgentMeta:
    return AgentMeta(
        profile=Profile(
            role_name="Equity data analyst",
            description=(
                "Answers price-history questions by finding the right market "
                "data tool and verifying numbers with code."
            ),
            abilities=("tool search", "python analysis", "concise reporting"),
        ),
        plan=OverallPlan(
            steps=(
                PlanStep(1, ActionKind.API_SELECT, "find a daily stock history tool"),
                PlanStep(2, ActionKind.API_DETAILS, "pull the chosen tool's documentation"),
                PlanStep(3, ActionKind.CODE_EXEC, "fetch NVDA prices and compute the move"),
                PlanStep(4, ActionKind.FINISH, "report the three-day move"),
            ),
            revision=0,
        ),
    )


PRIMARY_GOLDEN_CODE = (
    "rows = [\n"
    '    ("2024-01-02", 48.17),\n'
    '    ("2024-01-03", 47.56),\n'
    '    ("2024-01-04", 47.99),\n'
    "]\n"
    "first, last = rows[0][1], rows[-1][1]\n"
    "change = (last - first) / first * 100\n"
    "for date, close in rows:\n"
    '    print(f"{date} close={close:.2f}")\n'
    'print(f"move={change:+.2f}%")\n'
)

SDK_GOLDEN_CODE = (
    "import finmock\n"
    'table = finmock.sdk_call("stock_hist_000", symbol="NVDA",\n'
    '                         start="2024-01-02", end="2024-01-04")\n'
    "print(table.to_csv())\n"
    'finmock.save_plot(table, "close_trend.svg")\n'
    "closes = table.column(\"close\")\n"
    'print(f"move={(closes[-1] - closes[0]) / closes[0] * 100:+.2f}%")\n'
)


def golden_transcript_records(sdk: bool = False) -> list[dict]:
    """The eight-turn scripted transcript behind the golden run.

    Turn order: meta, then (action, reflexion) pairs for api-select,
    api-details and code-exec, then the finish action. With ``sdk=True``
    the code turn calls the mock market-data SDK and saves a plot;
    otherwise it is plain self-contained Python.
    """
    code = SDK_GOLDEN_CODE if sdk else PRIMARY_GOLDEN_CODE
    if sdk:
        answer = (
            "NVDA closed at 68.06, 83.79 and 67.96 over 2024-01-02 to "
            "2024-01-04, a -0.15% move with a sharp mid-week spike; see "
            "close_trend.svg."
        )
    else:
        answer = (
            "NVDA opened 2024 with a small dip and partial recovery: closes "
            "were 48.17, 47.56 and 47.99 over 2024-01-02 to 2024-01-04, a "
            "-0.37% move."
        )
    turns = [
        grammar.serialize_agent_meta(_golden_meta()),
        grammar.serialize_action(
            build_action(
                ActionKind.API_SELECT,
                category="Stock",
                task="daily open high low close volume history rows indexed 000",
            )
        ),
        grammar.serialize_reflexion(
            ReflexionOutcome(
                summary=(
                    "Candidates include stock_hist_000, which serves daily "
                    "open/high/low/close/volume history."
                ),
                verdict="proceed",
            )
        ),
        grammar.serialize_action(build_action(ActionKind.API_DETAILS, tool=GOLDEN_TOOL)),
        grammar.serialize_reflexion(
            ReflexionOutcome(
                summary=(
                    "stock_hist_000 takes symbol, start and end and returns "
                    "date/open/high/low/close/volume rows."
                ),
                verdict="proceed",
            )
        ),
        grammar.serialize_action(build_action(ActionKind.CODE_EXEC, code=code)),
        grammar.serialize_reflexion(
            ReflexionOutcome(
                summary="Computed the three-day move from the printed closes.",
                verdict="proceed",
            )
        ),
        grammar.serialize_action(build_action(ActionKind.FINISH, answer=answer)),
    ]
    return [{"response": text} for text in turns]


def write_transcript(records: list[dict], path: Union[str, Path]) -> None:
    lines = [json.dumps(r, ensure_ascii=True) for r in records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_golden_fixtures(directory: Union[str, Path]) -> list[str]:
    """Write every shipped fixture file into *directory*; returns filenames."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_catalog_fixture(directory / "catalog.jsonl")
    write_retrieval_queries(directory / "retrieval_queries.jsonl")
    write_transcript(golden_transcript_records(sdk=False), directory / "golden_transcript.jsonl")
    write_transcript(golden_transcript_records(sdk=True), directory / "sdk_transcript.jsonl")
    query = golden_query()
    (directory / "golden_query.jsonl").write_text(
        json.dumps({"id": query.id, "text": query.text, "metadata": dict(query.metadata)})
        + "\n",
        encoding="utf-8",
    )
    return [
        "catalog.jsonl",
        "retrieval_queries.jsonl",
        "golden_transcript.jsonl",
        "sdk_transcript.jsonl",
        "golden_query.jsonl",
    ]
