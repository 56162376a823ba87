"""Worker processes that actually run untrusted code.

Each worker is a forked child in its own session (process group), so a
timeout kill takes down anything the code spawned. Worker fd 1 is pointed
at /dev/null the moment it starts: the inherited stdout is the protocol
stream and nothing the executed code does may write to it.
"""

from __future__ import annotations

import ast
import io
import os
import resource
import sys
import traceback
from contextlib import redirect_stderr, redirect_stdout


def _render(value) -> str:
    return str(value)


def last_nonempty_line(text: str) -> str:
    for line in reversed(text.splitlines()):
        if line.strip():
            return line.strip()
    return ""


def run_code(code: str, namespace: dict) -> dict:
    """Execute ``code`` in ``namespace``; never raises.

    The final value is the last top-level expression's value when there is
    one (and it is not None), otherwise the last non-empty printed line.
    """
    stdout_io = io.StringIO()
    stderr_io = io.StringIO()
    status = "ok"
    final_value = ""
    try:
        tree = ast.parse(code)
    except SyntaxError:
        return {
            "status": "error",
            "stdout": "",
            "stderr": traceback.format_exc(limit=0),
            "final_value": "",
        }
    body = tree.body
    last_expr = None
    if body and isinstance(body[-1], ast.Expr):
        last_expr = ast.Expression(body[-1].value)
        body = body[:-1]
    with redirect_stdout(stdout_io), redirect_stderr(stderr_io):
        try:
            exec(compile(ast.Module(body=body, type_ignores=[]), "<sandbox>", "exec"), namespace)
            if last_expr is not None:
                value = eval(compile(last_expr, "<sandbox>", "eval"), namespace)
                if value is not None:
                    final_value = _render(value)
        except BaseException:
            status = "error"
            traceback.print_exc(file=stderr_io)
    stdout = stdout_io.getvalue()
    if not final_value:
        final_value = last_nonempty_line(stdout)
    return {
        "status": status,
        "stdout": stdout,
        "stderr": stderr_io.getvalue(),
        "final_value": final_value,
    }


def worker_main(conn, workdir: str, memory_limit_mb: int | None = None) -> None:
    """Loop: receive {"code": ...} requests, execute, reply. Exits on EOF."""
    os.setsid()  # own process group; the supervisor kills the whole group
    devnull = os.open(os.devnull, os.O_WRONLY)
    os.dup2(devnull, 1)  # protect the protocol stream from raw fd writes
    sys.stdout = sys.__stdout__ = os.fdopen(1, "w")
    if memory_limit_mb is not None:
        limit = memory_limit_mb * 1024 * 1024
        resource.setrlimit(resource.RLIMIT_AS, (limit, limit))
    os.chdir(workdir)
    namespace: dict = {"__name__": "__main__"}
    while True:
        try:
            message = conn.recv()
        except (EOFError, OSError):
            break
        if message.get("op") == "stop":
            break
        extra = message.get("inject") or {}
        namespace.update(extra)
        result = run_code(message["code"], namespace)
        conn.send(result)
    conn.close()
