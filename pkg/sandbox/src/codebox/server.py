"""Request dispatch: one JSON line in, one JSON line out.

Wire schema (UTF-8, one object per line):

request::

    {"id": str, "op": "exec"|"exec_session"|"analyze"|"check"|"reset",
     "code": str, "workdir": str, "timeout_s": float,
     "session_id": str|null, "candidate_output": str|null}

response::

    {"id": str, "status": "ok"|"error"|"timeout",
     "stdout": str, "stderr": str, "final_value": str,
     "duration_s": float,
     "counts": {"functions", "variables", "conditions", "loops"} | null}

``analyze`` parses in-process (parsing is safe); everything else executes
in a worker process. Protocol errors never escape: every request line
produces exactly one response line.
"""

from __future__ import annotations

import json
import multiprocessing
import os
import signal
import sys
import time

from .analyze import count_structures
from .worker import worker_main

DEFAULT_TIMEOUT_S = 30.0


class _Worker:
    def __init__(self, workdir: str, memory_limit_mb: int | None) -> None:
        ctx = multiprocessing.get_context("fork")
        self.conn, child_conn = ctx.Pipe()
        self.process = ctx.Process(
            target=worker_main, args=(child_conn, workdir, memory_limit_mb), daemon=True
        )
        self.process.start()
        child_conn.close()

    def run(self, code: str, timeout_s: float, inject: dict | None = None) -> dict:
        started = time.monotonic()
        try:
            self.conn.send({"code": code, "inject": inject})
        except (BrokenPipeError, OSError):
            return {"status": "error", "stderr": "worker is gone", "duration_s": 0.0}
        if not self.conn.poll(timeout_s):
            self.kill()
            duration = time.monotonic() - started
            return {
                "status": "timeout",
                "stdout": "",
                "stderr": f"killed after {timeout_s}s",
                "final_value": "",
                "duration_s": max(duration, timeout_s),
            }
        try:
            result = self.conn.recv()
        except (EOFError, OSError):
            return {
                "status": "error",
                "stderr": "worker died mid-request",
                "duration_s": time.monotonic() - started,
            }
        result["duration_s"] = time.monotonic() - started
        return result

    @property
    def alive(self) -> bool:
        return self.process.is_alive()

    def kill(self) -> None:
        if self.process.pid is not None and self.process.is_alive():
            try:
                os.killpg(self.process.pid, signal.SIGKILL)
            except (ProcessLookupError, PermissionError):
                self.process.kill()
        self.process.join(timeout=5)
        self.conn.close()


class Server:
    def __init__(self, workdir: str = ".", memory_limit_mb: int | None = None) -> None:
        self.default_workdir = workdir
        self.memory_limit_mb = memory_limit_mb
        self.sessions: dict[str, _Worker] = {}

    # -- op handlers -------------------------------------------------------

    def _op_exec(self, request: dict) -> dict:
        worker = _Worker(request["workdir"], self.memory_limit_mb)
        try:
            return worker.run(request["code"], request["timeout_s"])
        finally:
            worker.kill()

    def _op_exec_session(self, request: dict) -> dict:
        session_id = request.get("session_id")
        if not session_id:
            return {"status": "error", "stderr": "exec_session requires session_id"}
        worker = self.sessions.get(session_id)
        if worker is None or not worker.alive:
            worker = _Worker(request["workdir"], self.memory_limit_mb)
            self.sessions[session_id] = worker
        result = worker.run(request["code"], request["timeout_s"])
        if result["status"] == "timeout":
            # The worker was killed with its namespace; drop the session.
            self.sessions.pop(session_id, None)
        return result

    def _op_reset(self, request: dict) -> dict:
        session_id = request.get("session_id")
        if session_id and session_id in self.sessions:
            self.sessions.pop(session_id).kill()
        return {"status": "ok"}

    def _op_analyze(self, request: dict) -> dict:
        try:
            counts = count_structures(request["code"])
        except SyntaxError as exc:
            return {
                "status": "error",
                "stderr": f"parse failure at line {exc.lineno}: {exc.msg}",
            }
        return {"status": "ok", "counts": counts}

    def _op_check(self, request: dict) -> dict:
        checker_rel = request["code"]
        checker_path = os.path.join(request["workdir"], checker_rel)
        if not os.path.isfile(checker_path):
            return {"status": "error", "stderr": f"checker {checker_rel!r} not found"}
        with open(checker_path, encoding="utf-8") as fh:
            checker_code = fh.read()
        candidate_output = request.get("candidate_output") or ""
        worker = _Worker(request["workdir"], self.memory_limit_mb)
        try:
            result = worker.run(
                checker_code,
                request["timeout_s"],
                inject={"candidate_output": candidate_output},
            )
        finally:
            worker.kill()
        if result["status"] == "ok" and result.get("final_value") not in ("PASS", "FAIL"):
            result["status"] = "error"
            result["stderr"] = (
                result.get("stderr", "")
                + f"\nchecker must end with PASS or FAIL, got {result.get('final_value')!r}"
            )
        return result

    # -- dispatch ----------------------------------------------------------

    def handle(self, request: dict) -> dict:
        base = {
            "id": request.get("id"),
            "status": "error",
            "stdout": "",
            "stderr": "",
            "final_value": "",
            "duration_s": 0.0,
            "counts": None,
        }
        op = request.get("op")
        handlers = {
            "exec": self._op_exec,
            "exec_session": self._op_exec_session,
            "analyze": self._op_analyze,
            "check": self._op_check,
            "reset": self._op_reset,
        }
        if op not in handlers:
            base["stderr"] = f"unknown op {op!r}"
            return base
        request.setdefault("code", "")
        request["workdir"] = request.get("workdir") or self.default_workdir
        try:
            timeout_s = float(request.get("timeout_s") or DEFAULT_TIMEOUT_S)
        except (TypeError, ValueError):
            timeout_s = DEFAULT_TIMEOUT_S
        if timeout_s <= 0:
            base["stderr"] = "timeout_s must be positive"
            return base
        request["timeout_s"] = timeout_s
        if not os.path.isdir(request["workdir"]):
            base["stderr"] = f"workdir {request['workdir']!r} does not exist"
            return base
        try:
            result = handlers[op](request)
        except Exception as exc:  # a handler bug must still yield a response
            base["stderr"] = f"internal sandbox error: {exc}"
            return base
        base.update(result)
        base["status"] = result.get("status", "error")
        return base

    def shutdown(self) -> None:
        for worker in self.sessions.values():
            worker.kill()
        self.sessions.clear()


def serve(workdir: str = ".", memory_limit_mb: int | None = None) -> None:
    """Blocking stdin/stdout service loop; returns on EOF."""
    server = Server(workdir, memory_limit_mb)
    stdout = sys.stdout
    try:
        for line in sys.stdin:
            line = line.strip()
            if not line:
                continue
            try:
                request = json.loads(line)
            except json.JSONDecodeError as exc:
                response = {
                    "id": None,
                    "status": "error",
                    "stdout": "",
                    "stderr": f"malformed request: {exc}",
                    "final_value": "",
                    "duration_s": 0.0,
                    "counts": None,
                }
            else:
                response = server.handle(request)
            stdout.write(json.dumps(response) + "\n")
            stdout.flush()
    finally:
        server.shutdown()
