"""Shared test doubles: in-process sandbox and fixed-vector embedder."""

from __future__ import annotations

import ast
import io
import re
from contextlib import redirect_stderr, redirect_stdout

from dsagent.gateway import EmbeddingVector
from dsagent.sandbox import SandboxRequest, SandboxResponse


class FixedEmbedder:
    """Returns pre-registered vectors by exact query text."""

    def __init__(self, vectors: dict[str, tuple[float, ...]], model_id: str = "fixed"):
        self.vectors = dict(vectors)
        self.model_id = model_id
        self.call_count = 0

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValueError("cannot embed empty text")
        self.call_count += 1
        return EmbeddingVector(values=tuple(self.vectors[text]), model_id=self.model_id)


class InProcessSandbox:
    """Real Python execution in this process, namespaced per session.

    Trusted fixture code only. Implements the same op surface as the
    protocol client so runner-level tests exercise multi-turn seeding
    without a child process.
    """

    def __init__(self) -> None:
        self.sessions: dict[str, dict] = {}
        self.requests_seen: list[SandboxRequest] = []

    def _run(self, code: str, namespace: dict) -> SandboxResponse:
        stdout_io, stderr_io = io.StringIO(), io.StringIO()
        status = "ok"
        with redirect_stdout(stdout_io), redirect_stderr(stderr_io):
            try:
                exec(compile(code, "<test-sandbox>", "exec"), namespace)
            except BaseException as exc:
                status = "error"
                stderr_io.write(f"{type(exc).__name__}: {exc}")
        stdout = stdout_io.getvalue()
        lines = [line for line in stdout.splitlines() if line.strip()]
        return SandboxResponse(
            status=status,
            stdout=stdout,
            stderr=stderr_io.getvalue(),
            final_value=lines[-1].strip() if lines else "",
        )

    def request(self, request: SandboxRequest) -> SandboxResponse:
        self.requests_seen.append(request)
        if request.op == "exec":
            return self._run(request.code, {"__name__": "__main__"})
        if request.op == "exec_session":
            namespace = self.sessions.setdefault(request.session_id, {"__name__": "__main__"})
            return self._run(request.code, namespace)
        if request.op == "reset":
            self.sessions.pop(request.session_id, None)
            return SandboxResponse(status="ok")
        if request.op == "analyze":
            try:
                ast.parse(request.code)
            except SyntaxError as exc:
                return SandboxResponse(status="error", stderr=str(exc))
            return SandboxResponse(status="ok", counts={"functions": 0, "variables": 0,
                                                        "conditions": 0, "loops": 0})
        if request.op == "check":
            return SandboxResponse(status="ok", final_value="PASS")
        raise AssertionError(request.op)

    def close(self) -> None:
        self.sessions.clear()


CHAIN_LENGTH = 10


def chain_description(j: int) -> str:
    return f"alpha{j} alpha{j + 1}"


def chain_token(j: int) -> str:
    return f"#SOLUTION_TOKEN_{j}#"


_CHAIN_PROBLEM_RE = re.compile(r"Problem to solve now:\nalpha(\d+) ")


def chain_student_response(request) -> str:
    """Scripted solver for the prerequisite chain.

    Task 0 is always solvable; task j > 0 only when task j-1's solution
    token was retrieved into the prompt.
    """
    text = request.messages[0][1]
    match = _CHAIN_PROBLEM_RE.search(text)
    assert match, text
    j = int(match.group(1))
    if j == 0 or chain_token(j - 1) in text:
        return f"```python\n# {chain_token(j)}\nprint('answer{j}')\n```"
    return "```python\nprint('wrong')\n```"


def chain_mentor_response(request) -> str:
    text = request.messages[0][1]
    match = re.search(r"alpha(\d+) ", text)
    assert match, text
    return f"Difficulty: {int(match.group(1)) + 1} - position in the chain"


def chain_corpus_sets() -> list[dict]:
    from .conftest import single_turn_set

    return [
        single_turn_set(
            f"c{j}", chain_description(j), {"kind": "value_literal", "expected": f"answer{j}"}
        )
        for j in range(CHAIN_LENGTH)
    ]
