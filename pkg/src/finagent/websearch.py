"""Pluggable web-search providers for the web-search action.

Live providers are deployment configuration; the canned provider returns
deterministic results so tests and scripted runs never touch the network.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence


@dataclass(frozen=True)
class SearchHit:
    title: str
    snippet: str
    url: str


class WebSearchProvider(Protocol):
    def search(self, query: str) -> Sequence[SearchHit]: ...


class CannedWebSearch:
    """Returns pre-registered hits per query, or a deterministic echo hit
    for anything unregistered."""

    def __init__(self, canned: Mapping[str, Sequence[SearchHit]] | None = None):
        self._canned = dict(canned or {})

    def search(self, query: str) -> Sequence[SearchHit]:
        if query in self._canned:
            return list(self._canned[query])
        return [
            SearchHit(
                title=f"Results for: {query}",
                snippet="No live providers are configured; this is a canned result.",
                url="about:canned",
            )
        ]


def format_hits(hits: Sequence[SearchHit]) -> str:
    return "\n".join(f"{h.title}\n  {h.snippet}\n  {h.url}" for h in hits)
