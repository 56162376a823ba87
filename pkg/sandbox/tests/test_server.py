import os

import pytest

from codebox.server import Server
from codebox.worker import last_nonempty_line, run_code


@pytest.fixture
def server(tmp_path):
    srv = Server(workdir=str(tmp_path))
    yield srv
    srv.shutdown()


def req(op, code="", tmp_path=None, **extra):
    body = {"id": "r1", "op": op, "code": code, "timeout_s": 10.0}
    if tmp_path is not None:
        body["workdir"] = str(tmp_path)
    body.update(extra)
    return body


def test_exec_expression_value(server, tmp_path):
    response = server.handle(req("exec", "1 + 1", tmp_path))
    assert response["status"] == "ok"
    assert response["final_value"] == "2"


def test_exec_print_fallback(server, tmp_path):
    response = server.handle(req("exec", "print('hello')\nprint('world')", tmp_path))
    assert response["final_value"] == "world"
    assert response["stdout"] == "hello\nworld\n"


def test_exec_error_reports_traceback(server, tmp_path):
    response = server.handle(req("exec", "1 / 0", tmp_path))
    assert response["status"] == "error"
    assert "ZeroDivisionError" in response["stderr"]


def test_exec_runs_inside_workdir(server, tmp_path):
    response = server.handle(req("exec", "import os\nprint(os.getcwd())", tmp_path))
    assert os.path.realpath(response["final_value"]) == os.path.realpath(str(tmp_path))


def test_raw_fd_writes_cannot_reach_protocol_stream(server, tmp_path):
    response = server.handle(
        req("exec", "import os\nos.write(1, b'junk')\nprint('clean')", tmp_path)
    )
    assert response["status"] == "ok"
    assert "junk" not in response["stdout"]
    assert response["final_value"] == "clean"


def test_session_state_persists(server, tmp_path):
    server.handle(req("exec_session", "x = 5", tmp_path, session_id="s1"))
    response = server.handle(req("exec_session", "print(x)", tmp_path, session_id="s1"))
    assert response["final_value"] == "5"


def test_sessions_are_isolated(server, tmp_path):
    server.handle(req("exec_session", "x = 5", tmp_path, session_id="s1"))
    response = server.handle(req("exec_session", "print(x)", tmp_path, session_id="s2"))
    assert response["status"] == "error"
    assert "NameError" in response["stderr"]


def test_plain_exec_does_not_see_session_state(server, tmp_path):
    server.handle(req("exec_session", "x = 5", tmp_path, session_id="s1"))
    response = server.handle(req("exec", "print(x)", tmp_path))
    assert response["status"] == "error"


def test_reset_drops_session_state(server, tmp_path):
    server.handle(req("exec_session", "x = 5", tmp_path, session_id="s1"))
    assert server.handle(req("reset", tmp_path=tmp_path, session_id="s1"))["status"] == "ok"
    response = server.handle(req("exec_session", "print(x)", tmp_path, session_id="s1"))
    assert response["status"] == "error"


def test_exec_session_requires_session_id(server, tmp_path):
    response = server.handle(req("exec_session", "x = 1", tmp_path))
    assert response["status"] == "error"
    assert "session_id" in response["stderr"]


def test_timeout_drops_the_session(server, tmp_path):
    server.handle(req("exec_session", "x = 5", tmp_path, session_id="s1"))
    response = server.handle(
        req("exec_session", "while True: pass", tmp_path, session_id="s1", timeout_s=0.5)
    )
    assert response["status"] == "timeout"
    assert "s1" not in server.sessions
    # a fresh worker replaces the killed one; the old state is gone
    response = server.handle(req("exec_session", "print(x)", tmp_path, session_id="s1"))
    assert response["status"] == "error"


def test_analyze(server, tmp_path):
    response = server.handle(req("analyze", "def f():\n    pass", tmp_path))
    assert response["status"] == "ok"
    assert response["counts"] == {"functions": 1, "variables": 0,
                                  "conditions": 0, "loops": 0}


def test_analyze_parse_failure_names_line(server, tmp_path):
    response = server.handle(req("analyze", "ok = 1\ndef broken(:", tmp_path))
    assert response["status"] == "error"
    assert "line 2" in response["stderr"]


def checker(tmp_path, body):
    (tmp_path / "check.py").write_text(body, encoding="utf-8")
    return "check.py"


def test_check_pass_and_fail(server, tmp_path):
    rel = checker(tmp_path, "'PASS' if candidate_output.strip() == '42' else 'FAIL'")
    good = server.handle(req("check", rel, tmp_path, candidate_output="42"))
    bad = server.handle(req("check", rel, tmp_path, candidate_output="41"))
    assert good["final_value"] == "PASS"
    assert bad["final_value"] == "FAIL"


def test_check_rejects_non_verdict_output(server, tmp_path):
    rel = checker(tmp_path, "'MAYBE'")
    response = server.handle(req("check", rel, tmp_path))
    assert response["status"] == "error"
    assert "PASS or FAIL" in response["stderr"]


def test_check_crash_is_error(server, tmp_path):
    rel = checker(tmp_path, "raise RuntimeError('boom')")
    response = server.handle(req("check", rel, tmp_path))
    assert response["status"] == "error"


def test_check_missing_file(server, tmp_path):
    response = server.handle(req("check", "nope.py", tmp_path))
    assert response["status"] == "error"
    assert "nope.py" in response["stderr"]


def test_unknown_op(server, tmp_path):
    response = server.handle(req("exec", "1", tmp_path) | {"op": "launch_missiles"})
    assert response["status"] == "error"
    assert "unknown op" in response["stderr"]


def test_missing_workdir(server):
    response = server.handle(
        {"id": "r1", "op": "exec", "code": "1", "workdir": "/no/such/dir",
         "timeout_s": 1.0}
    )
    assert response["status"] == "error"
    assert "workdir" in response["stderr"]


def test_nonpositive_timeout(server, tmp_path):
    response = server.handle(req("exec", "1", tmp_path, timeout_s=-1))
    assert response["status"] == "error"


def test_response_always_carries_all_fields(server, tmp_path):
    for body in (req("exec", "1", tmp_path), req("analyze", "x = 1", tmp_path),
                 {"id": "r9", "op": "bogus"}):
        response = server.handle(body)
        assert set(response) == {"id", "status", "stdout", "stderr",
                                 "final_value", "duration_s", "counts"}


def test_run_code_final_value_rules():
    namespace = {"__name__": "__main__"}
    assert run_code("2 + 3", namespace)["final_value"] == "5"
    assert run_code("print('a')\nNone", namespace)["final_value"] == "a"
    assert run_code("y = 1", namespace)["final_value"] == ""


def test_last_nonempty_line():
    assert last_nonempty_line("a\n\nb\n  \n") == "b"
    assert last_nonempty_line("") == ""
