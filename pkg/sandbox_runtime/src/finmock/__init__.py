"""Mock financial-data SDK for sandboxed agent code.

Mirrors a subset of the engine's tool catalog so model-written scripts run
hermetically: ``sdk_call(tool_name, **params)`` returns a deterministic
:class:`MockTable` whose values come from a documented keyed-hash generator
(see :mod:`finmock.data`), and :func:`save_plot` renders a chart without
touching the network or any data files.

The implemented tools are the daily-history families the shipped
end-to-end fixtures call::

    stock_hist_000 .. stock_hist_130   (step 10)
    index_hist_000 .. index_hist_050   (step 10)

all taking ``symbol`` (str), ``start`` and ``end`` (YYYY-MM-DD, inclusive;
``end < start`` yields an empty table). Unknown tools raise
``finmock.UnknownToolError: unknown tool: <name>`` and bad parameters raise
``finmock.BadParamError`` naming the parameter, so host-side stderr checks
can match on those exact prefixes.
"""

from __future__ import annotations

from .data import series_rows
from .errors import BadParamError, EmptyTableError, FinmockError, UnknownToolError
from .plot import render_close_svg, save_plot
from .table import MockTable

__version__ = "0.1.0"

SUPPORTED_TOOLS: tuple[str, ...] = tuple(
    f"stock_hist_{i:03d}" for i in range(0, 140, 10)
) + tuple(f"index_hist_{i:03d}" for i in range(0, 60, 10))

_HIST_PARAMS = ("symbol", "start", "end")


def sdk_call(tool_name: str, **params) -> MockTable:
    """Invoke one mock tool; same (tool_name, params) always yields the same
    table, byte-identical when serialized."""
    if tool_name not in SUPPORTED_TOOLS:
        raise UnknownToolError(f"unknown tool: {tool_name}")
    unexpected = sorted(set(params) - set(_HIST_PARAMS))
    if unexpected:
        raise BadParamError(f"bad param {unexpected[0]}: not accepted by {tool_name}")
    missing = [name for name in _HIST_PARAMS if name not in params]
    if missing:
        raise BadParamError(f"bad param {missing[0]}: required by {tool_name}")
    symbol = params["symbol"]
    if not isinstance(symbol, str) or not symbol:
        raise BadParamError("bad param symbol: expected a non-empty string")
    return MockTable(series_rows(symbol, params["start"], params["end"]))


__all__ = [
    "BadParamError",
    "EmptyTableError",
    "FinmockError",
    "MockTable",
    "SUPPORTED_TOOLS",
    "UnknownToolError",
    "render_close_svg",
    "save_plot",
    "sdk_call",
]
