"""Client side of the code-execution sandbox protocol.

The sandbox runs as a child process and speaks newline-delimited JSON over
stdin/stdout, one request per line, exactly one response per request. This
module holds the request/response types, the process client, and scripted
stubs so the orchestrator's tests never need a real child.

Wire schema (UTF-8, one JSON object per line):

request::

    {"id": str, "op": "exec"|"exec_session"|"analyze"|"check"|"reset",
     "code": str, "workdir": str, "timeout_s": float,
     "session_id": str|null, "candidate_output": str|null}

response::

    {"id": str, "status": "ok"|"error"|"timeout",
     "stdout": str, "stderr": str, "final_value": str,
     "duration_s": float,
     "counts": {"functions": int, "variables": int,
                "conditions": int, "loops": int} | null}
"""

from __future__ import annotations

import json
import re
import subprocess
import sys
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

OPS = ("exec", "exec_session", "analyze", "check", "reset")


class SandboxError(Exception):
    """Protocol-level failure (the child died or answered garbage)."""


@dataclass(frozen=True, slots=True)
class SandboxRequest:
    op: str
    code: str = ""
    workdir: str = "."
    timeout_s: float = 30.0
    session_id: str | None = None
    candidate_output: str | None = None

    def __post_init__(self) -> None:
        if self.op not in OPS:
            raise ValueError(f"unknown sandbox op {self.op!r}")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")


@dataclass(frozen=True, slots=True)
class SandboxResponse:
    status: str
    stdout: str = ""
    stderr: str = ""
    final_value: str = ""
    duration_s: float = 0.0
    counts: dict[str, int] | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


class SandboxHandle(Protocol):
    def request(self, request: SandboxRequest) -> SandboxResponse: ...

    def close(self) -> None: ...


class ProcessSandboxClient:
    """Supervises one sandbox child and serializes requests to it."""

    def __init__(self, argv: list[str] | None = None, workdir: str | Path = ".") -> None:
        self.argv = list(argv) if argv else [sys.executable, "-m", "codebox", str(workdir)]
        self.workdir = str(workdir)
        self._proc: subprocess.Popen | None = None

    def _ensure_started(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                encoding="utf-8",
            )
        return self._proc

    def request(self, request: SandboxRequest) -> SandboxResponse:
        proc = self._ensure_started()
        request_id = uuid.uuid4().hex
        line = json.dumps(
            {
                "id": request_id,
                "op": request.op,
                "code": request.code,
                "workdir": request.workdir or self.workdir,
                "timeout_s": request.timeout_s,
                "session_id": request.session_id,
                "candidate_output": request.candidate_output,
            }
        )
        assert proc.stdin is not None and proc.stdout is not None
        try:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
            reply = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise SandboxError(f"sandbox child died: {exc}") from None
        if not reply:
            raise SandboxError("sandbox child closed its output stream")
        try:
            payload = json.loads(reply)
        except json.JSONDecodeError as exc:
            raise SandboxError(f"malformed sandbox response: {exc}") from None
        if payload.get("id") != request_id:
            raise SandboxError("sandbox response id does not match request id")
        return SandboxResponse(
            status=payload["status"],
            stdout=payload.get("stdout", ""),
            stderr=payload.get("stderr", ""),
            final_value=payload.get("final_value", ""),
            duration_s=float(payload.get("duration_s", 0.0)),
            counts=payload.get("counts"),
        )

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._proc.stdin.close()  # type: ignore[union-attr]
                self._proc.wait(timeout=5)
            except Exception:
                self._proc.kill()
        self._proc = None

    def __enter__(self) -> "ProcessSandboxClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


# ---------------------------------------------------------------------------
# Stubs for offline runs and tests

_PRINT_RE = re.compile(r"""print\(\s*(?:"([^"]*)"|'([^']*)'|(.+?))\s*\)""")


@dataclass
class StubSandbox:
    """Fully scripted sandbox: responses come from a callable.

    The default script answers ``exec``/``exec_session`` by echoing the
    literal inside the code's last ``print(...)`` call (enough for
    deterministic fixtures built from ``print`` one-liners), ``analyze``
    from a frozen ``analyze_counts`` table keyed by code text, and
    ``check`` with PASS.
    """

    script: Callable[[SandboxRequest], SandboxResponse] | None = None
    analyze_counts: dict[str, dict[str, int]] = field(default_factory=dict)
    requests_seen: list[SandboxRequest] = field(default_factory=list)

    def request(self, request: SandboxRequest) -> SandboxResponse:
        self.requests_seen.append(request)
        if self.script is not None:
            return self.script(request)
        if request.op in ("exec", "exec_session"):
            matches = _PRINT_RE.findall(request.code)
            if not matches:
                return SandboxResponse(status="ok", stdout="", final_value="")
            groups = matches[-1]
            value = next((g for g in groups if g), "")
            return SandboxResponse(status="ok", stdout=value + "\n", final_value=value)
        if request.op == "analyze":
            counts = self.analyze_counts.get(request.code)
            if counts is None:
                return SandboxResponse(status="error", stderr="no scripted counts for code")
            return SandboxResponse(status="ok", counts=dict(counts))
        if request.op == "check":
            return SandboxResponse(status="ok", final_value="PASS")
        return SandboxResponse(status="ok")

    def close(self) -> None:
        pass
