"""The sandbox-side mock market-data SDK (the separate finmock package).

This is what model-written code imports inside the sandbox: deterministic
OHLCV series from a keyed hash, CSV serialization, and a dependency-free
SVG chart. Install it first:  pip install -e sandbox_runtime

Run from the repo root:  python demos/05_mock_sdk.py
"""

import sys
import tempfile
from pathlib import Path

try:
    import finmock
except ImportError:
    sys.exit("finmock is not installed; run: pip install -e sandbox_runtime")

print(f"== {len(finmock.SUPPORTED_TOOLS)} tools mirrored from the engine catalog ==")
print("  " + ", ".join(finmock.SUPPORTED_TOOLS[:4]) + ", ...")

table = finmock.sdk_call(
    "stock_hist_000", symbol="NVDA", start="2024-01-02", end="2024-01-08"
)
print(f"\n== NVDA, 7 calendar days, identical bytes on every machine ==")
print(table.to_csv())

closes = table.column("close")
move = (closes[-1] - closes[0]) / closes[0] * 100
print(f"\nweek move: {move:+.2f}%")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "close_trend.svg"
    finmock.save_plot(table, str(path))
    print(f"chart written: {path.name}, {path.stat().st_size} bytes of deterministic SVG")

print("\n== structured errors are machine-checkable from stderr ==")
try:
    finmock.sdk_call("stock_nope_999", symbol="NVDA", start="2024-01-02", end="2024-01-03")
except finmock.UnknownToolError as exc:
    print(f"  {type(exc).__module__}.{type(exc).__name__}: {exc}")
try:
    finmock.sdk_call("stock_hist_000", symbol="NVDA", start="not-a-date", end="2024-01-03")
except finmock.BadParamError as exc:
    print(f"  {type(exc).__module__}.{type(exc).__name__}: {exc}")
