"""The code-interpreter host side: limits, truncation, artifact capture.

Run from the repo root:  python demos/03_sandbox.py
"""

import sys

from finagent.sandbox import SandboxLimits, execute

runtime = (sys.executable, "{script}")

print("== a normal script ==")
result = execute("total = sum(range(10))\nprint('sum =', total)\n", runtime, SandboxLimits())
print(f"exit_ok={result.exit_ok}  stdout={result.stdout!r}")

print("\n== runaway output is truncated with an explicit sentinel ==")
result = execute(
    "import sys\nsys.stdout.write('data' * 1_000_000)\n",
    runtime,
    SandboxLimits(max_output=2048),
)
print(f"captured {len(result.stdout)} chars, tail: ...{result.stdout[-60:]!r}")

print("\n== an infinite loop is killed at the wall-time budget ==")
result = execute("while True:\n    pass\n", runtime, SandboxLimits(wall_time=1.0))
print(f"timed_out={result.timed_out}  duration={result.duration:.2f}s")

print("\n== files the code writes come back as classified artifacts ==")
result = execute(
    "open('series.csv', 'w').write('date,close\\n2024-01-02,48.17\\n')\n"
    "open('notes.txt', 'w').write('hello')\n",
    runtime,
    SandboxLimits(),
)
for artifact in result.artifacts:
    print(f"  {artifact.name}: {artifact.media_kind.value}, {artifact.byte_size} bytes")

print("\n== network access is blocked by default ==")
result = execute(
    "import urllib.request\n"
    "try:\n"
    "    urllib.request.urlopen('http://example.com', timeout=2)\n"
    "except OSError as exc:\n"
    "    print('blocked ->', exc)\n",
    runtime,
    SandboxLimits(),
)
print(result.stdout.strip())
