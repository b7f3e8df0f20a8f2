"""The deterministic market-data generator.

Every value is a pure function of (symbol, date, field) through a keyed
64-bit blake2b hash, computed entirely in integer cents and only converted
to two-decimal ``Decimal`` at the edge, so generated series are identical
on every machine:

    h(s, d, f)  = uint64_be(blake2b(f"{s}|{d}|{f}", digest_size=8, key=b"finmock-v1"))
    base        = 2500 + h(s, "", "base") % 47501          # cents, per symbol
    open        = base + h(s, d, "open") % 2001 - 1000
    close       = base + h(s, d, "close") % 2001 - 1000
    high        = max(open, close) + h(s, d, "spread") % 200 + 1
    low         = min(open, close) - (h(s, d, "dip") % 200 + 1)
    volume      = 10000 + h(s, d, "volume") % 1000000

The base range keeps every price positive and the high/low adjustments
guarantee high >= max(open, close) and low <= min(open, close) by
construction.
"""

from __future__ import annotations

import hashlib
from datetime import date as _date
from datetime import timedelta
from decimal import Decimal

from .errors import BadParamError

_KEY = b"finmock-v1"


def _h(symbol: str, day: str, field: str) -> int:
    payload = f"{symbol}|{day}|{field}".encode("utf-8")
    digest = hashlib.blake2b(payload, digest_size=8, key=_KEY).digest()
    return int.from_bytes(digest, "big")


def _cents(value: int) -> Decimal:
    return Decimal(value).scaleb(-2)


def base_cents(symbol: str) -> int:
    return 2500 + _h(symbol, "", "base") % 47501


def ohlcv_cents(symbol: str, day: str) -> tuple[int, int, int, int, int]:
    base = base_cents(symbol)
    open_c = base + _h(symbol, day, "open") % 2001 - 1000
    close_c = base + _h(symbol, day, "close") % 2001 - 1000
    high_c = max(open_c, close_c) + _h(symbol, day, "spread") % 200 + 1
    low_c = min(open_c, close_c) - (_h(symbol, day, "dip") % 200 + 1)
    volume = 10_000 + _h(symbol, day, "volume") % 1_000_000
    return open_c, high_c, low_c, close_c, volume


def parse_day(value: str, param: str) -> _date:
    if not isinstance(value, str):
        raise BadParamError(f"bad param {param}: expected YYYY-MM-DD string")
    try:
        return _date.fromisoformat(value)
    except ValueError:
        raise BadParamError(f"bad param {param}: {value!r} is not YYYY-MM-DD") from None


def series_rows(symbol: str, start: str, end: str) -> list[tuple]:
    """Inclusive calendar-day rows from start to end; empty when end < start."""
    first = parse_day(start, "start")
    last = parse_day(end, "end")
    rows = []
    day = first
    while day <= last:
        iso = day.isoformat()
        open_c, high_c, low_c, close_c, volume = ohlcv_cents(symbol, iso)
        rows.append(
            (iso, _cents(open_c), _cents(high_c), _cents(low_c), _cents(close_c), volume)
        )
        day += timedelta(days=1)
    return rows
