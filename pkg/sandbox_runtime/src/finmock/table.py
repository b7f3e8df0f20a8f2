"""A minimal immutable table: fixed columns, deterministic CSV."""

from __future__ import annotations

from decimal import Decimal

from .errors import BadParamError


class MockTable:
    """Rows of (date, open, high, low, close, volume).

    Prices are two-decimal ``Decimal`` values and volume is an int, so the
    CSV serialization is byte-identical on every platform.
    """

    COLUMNS = ("date", "open", "high", "low", "close", "volume")

    def __init__(self, rows: list[tuple]):
        self._rows = [tuple(row) for row in rows]
        for row in self._rows:
            if len(row) != len(self.COLUMNS):
                raise BadParamError(f"row width {len(row)} != {len(self.COLUMNS)}")

    @property
    def rows(self) -> list[tuple]:
        return list(self._rows)

    def __len__(self) -> int:
        return len(self._rows)

    def __eq__(self, other) -> bool:
        return isinstance(other, MockTable) and self._rows == other._rows

    def column(self, name: str) -> list:
        """One column as a list; prices come back as Decimal."""
        if name not in self.COLUMNS:
            raise BadParamError(f"unknown column: {name}")
        position = self.COLUMNS.index(name)
        return [row[position] for row in self._rows]

    @staticmethod
    def _cell(value) -> str:
        if isinstance(value, Decimal):
            return f"{value:.2f}"
        return str(value)

    def to_csv(self) -> str:
        lines = [",".join(self.COLUMNS)]
        lines.extend(",".join(self._cell(v) for v in row) for row in self._rows)
        return "\n".join(lines)
