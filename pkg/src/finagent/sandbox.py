"""Isolated execution of model-written code with resource limits.

Isolation is a subprocess in its own process group with a fresh scratch
directory, RLIMIT-based memory/file caps, a scrubbed environment, and a
best-effort network guard (a ``sitecustomize`` that disables socket
creation for Python runtimes). Container-based isolation can be layered on
by pointing the runtime command at a container invocation; nothing here
requires a daemon.

Layout per call::

    <call dir>/
        script.py      the code under execution
        _guard/        sitecustomize network guard (on PYTHONPATH)
        work/          the process working directory; artifacts are
                       collected from here

Each call owns its directory exclusively; concurrent executions never
share state.
"""

from __future__ import annotations

import os
import shlex
import shutil
import signal
import subprocess
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

from .model import ArtifactRef, MediaKind

TRUNCATION_SENTINEL = "[output truncated at {limit} bytes]"

_MEDIA_BY_EXTENSION = {
    ".png": MediaKind.IMAGE,
    ".jpg": MediaKind.IMAGE,
    ".jpeg": MediaKind.IMAGE,
    ".gif": MediaKind.IMAGE,
    ".svg": MediaKind.IMAGE,
    ".bmp": MediaKind.IMAGE,
    ".csv": MediaKind.TABLE,
    ".tsv": MediaKind.TABLE,
    ".parquet": MediaKind.TABLE,
    ".txt": MediaKind.TEXT,
    ".md": MediaKind.TEXT,
    ".json": MediaKind.TEXT,
    ".log": MediaKind.TEXT,
}

_GUARD_SOURCE = """\
import socket

class _BlockedSocket(socket.socket):
    # must stay a socket subclass: ssl and friends subclass socket.socket
    def __init__(self, *args, **kwargs):
        raise OSError("network access is disabled in this sandbox")

def _blocked(*args, **kwargs):
    raise OSError("network access is disabled in this sandbox")

socket.socket = _BlockedSocket
socket.create_connection = _blocked
socket.socketpair = _blocked
"""


class SandboxConfigError(Exception):
    """The runtime command is missing or unusable; an engine-level fault,
    not an observation."""


@dataclass(frozen=True)
class SandboxLimits:
    wall_time: float = 30.0
    memory: int = 512 * 1024 * 1024
    max_output: int = 256 * 1024
    workdir_quota: int = 64 * 1024 * 1024
    allow_network: bool = False

    def __post_init__(self) -> None:
        if min(self.wall_time, self.memory, self.max_output, self.workdir_quota) <= 0:
            raise ValueError("sandbox limits must all be positive")


#: Extra seconds allowed past wall_time for process-tree teardown.
KILL_GRACE = 2.0


@dataclass(frozen=True)
class ExecutionResult:
    exit_ok: bool
    stdout: str
    stderr: str
    duration: float
    artifacts: tuple[ArtifactRef, ...]
    timed_out: bool

    def __post_init__(self) -> None:
        if self.timed_out and self.exit_ok:
            raise ValueError("a timed-out execution cannot be exit_ok")


def _truncate(data: bytes, limit: int) -> str:
    text = data.decode("utf-8", errors="replace")
    if len(data) <= limit:
        return text
    head = data[:limit].decode("utf-8", errors="replace")
    return head + "\n" + TRUNCATION_SENTINEL.format(limit=limit) + "\n"


def classify_media(name: str) -> MediaKind:
    return _MEDIA_BY_EXTENSION.get(Path(name).suffix.lower(), MediaKind.OTHER)


def collect_artifacts(workdir: Union[str, Path]) -> tuple[list[ArtifactRef], list[str]]:
    """Regular files under *workdir* as artifact refs, lexicographic by
    relative path. Unreadable entries are skipped; a warning line per skip
    is returned for the caller's stderr channel."""
    root = Path(workdir)
    refs: list[ArtifactRef] = []
    warnings: list[str] = []
    names = []
    for path in root.rglob("*"):
        rel = path.relative_to(root).as_posix()
        try:
            if not path.is_file() or path.is_symlink():
                continue
            size = path.stat().st_size
        except OSError as exc:
            warnings.append(f"[artifact skipped: {rel}: {exc}]")
            continue
        names.append((rel, size))
    for rel, size in sorted(names):
        refs.append(ArtifactRef(name=rel, media_kind=classify_media(rel), byte_size=size))
    return refs, warnings


def _make_limit_setter(limits: SandboxLimits):
    import resource

    def apply() -> None:
        os.setsid()  # own process group so the whole tree can be killed
        mem = (limits.memory, limits.memory)
        resource.setrlimit(resource.RLIMIT_AS, mem)
        try:
            resource.setrlimit(resource.RLIMIT_DATA, mem)
        except (ValueError, OSError):
            pass
        quota = (limits.workdir_quota, limits.workdir_quota)
        try:
            resource.setrlimit(resource.RLIMIT_FSIZE, quota)
        except (ValueError, OSError):
            pass

    return apply


def _kill_tree(pid: int) -> None:
    try:
        os.killpg(os.getpgid(pid), signal.SIGKILL)
    except (ProcessLookupError, PermissionError, OSError):
        try:
            os.kill(pid, signal.SIGKILL)
        except (ProcessLookupError, PermissionError, OSError):
            pass


def execute(
    code: str,
    runtime: Sequence[str],
    limits: SandboxLimits,
    workdir_root: Optional[Union[str, Path]] = None,
    artifact_dir: Optional[Union[str, Path]] = None,
) -> ExecutionResult:
    """Run *code* under the runtime command template and collect everything.

    *runtime* is the interpreter command with a ``{script}`` placeholder,
    e.g. ``("python3", "{script}")``. The code gets a fresh working
    directory; the process tree is killed at wall_time; stdout/stderr are
    truncated to max_output with an explicit sentinel so the model-facing
    payload states that truncation happened. Files the code wrote are
    copied to *artifact_dir* (when given) before the scratch directory is
    destroyed. Any interpreter exit maps to a well-formed result; only a
    missing runtime raises.
    """
    if not runtime or not any("{script}" in part for part in runtime):
        raise SandboxConfigError(
            f"runtime command {list(runtime)!r} must include a {{script}} placeholder"
        )
    interpreter = shutil.which(runtime[0])
    if interpreter is None:
        raise SandboxConfigError(f"runtime interpreter not found: {runtime[0]!r}")

    call_dir = Path(tempfile.mkdtemp(prefix="finagent-exec-", dir=workdir_root))
    try:
        script = call_dir / "script.py"
        script.write_text(code, encoding="utf-8")
        work = call_dir / "work"
        work.mkdir()
        guard_dir = call_dir / "_guard"
        guard_dir.mkdir()
        if not limits.allow_network:
            (guard_dir / "sitecustomize.py").write_text(_GUARD_SOURCE, encoding="utf-8")

        command = [
            part.replace("{script}", str(script)) for part in (interpreter, *runtime[1:])
        ]
        env = {
            "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
            "HOME": str(work),
            "LANG": "C.UTF-8",
            "PYTHONPATH": str(guard_dir),
            "PYTHONHASHSEED": "0",
            "PYTHONDONTWRITEBYTECODE": "1",
            "MPLCONFIGDIR": str(call_dir / "_mpl"),
        }

        start = time.monotonic()
        timed_out = False
        try:
            proc = subprocess.Popen(
                command,
                cwd=str(work),
                env=env,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                preexec_fn=_make_limit_setter(limits),
            )
        except OSError as exc:
            raise SandboxConfigError(f"could not start runtime {command[0]!r}: {exc}") from exc
        try:
            out, err = proc.communicate(timeout=limits.wall_time)
            returncode = proc.returncode
        except subprocess.TimeoutExpired:
            timed_out = True
            _kill_tree(proc.pid)
            try:
                out, err = proc.communicate(timeout=KILL_GRACE)
            except subprocess.TimeoutExpired:
                out, err = b"", b""
            returncode = proc.returncode if proc.returncode is not None else -9
        duration = time.monotonic() - start

        artifacts, warnings = collect_artifacts(work)
        if artifact_dir is not None:
            _copy_tree_files(work, Path(artifact_dir))
        stderr_text = _truncate(err, limits.max_output)
        if timed_out:
            warnings.append(f"[killed after exceeding wall_time={limits.wall_time}s]")
        if warnings:
            stderr_text = (stderr_text + "\n" if stderr_text else "") + "\n".join(warnings)
        return ExecutionResult(
            exit_ok=(returncode == 0) and not timed_out,
            stdout=_truncate(out, limits.max_output),
            stderr=stderr_text,
            duration=duration,
            artifacts=tuple(artifacts),
            timed_out=timed_out,
        )
    finally:
        shutil.rmtree(call_dir, ignore_errors=True)


def _copy_tree_files(src: Path, dest: Path) -> None:
    for path in sorted(src.rglob("*")):
        if path.is_file() and not path.is_symlink():
            target = dest / path.relative_to(src)
            target.parent.mkdir(parents=True, exist_ok=True)
            try:
                shutil.copyfile(path, target)
            except OSError:
                pass  # export is best-effort; the artifact ref still records it


def step_artifact_dir(root: Union[str, Path], run_id: str, step_index: int) -> Path:
    """The documented layout for exported artifacts: <root>/<run-id>/<step>/."""
    return Path(root) / run_id / str(step_index)


def parse_runtime_command(spec: str) -> tuple[str, ...]:
    """Split a runtime command string from config into argv parts."""
    parts = tuple(shlex.split(spec))
    if not parts:
        raise SandboxConfigError("empty runtime command")
    return parts
