"""Shared fixtures: a mock proof-checking server speaking the harness's
verifier schema, driven by content markers in the submitted code."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

DATA_DIR = Path(__file__).parent / "data"


def _judge(code: str) -> dict:
    """Marker-driven verdicts so tests can script any server behavior."""
    if "MOCK_MALFORMED" in code:
        return {"malformed": True}
    errors = []
    if "MOCK_UNKNOWN_TACTIC" in code:
        errors.append(
            {"severity": "error", "message": "unknown tactic 'bv_simp'", "line": 2}
        )
    if "MOCK_TYPE_MISMATCH" in code:
        errors.append(
            {
                "severity": "error",
                "message": "type mismatch\n  ih\nhas type ...",
                "line": 7,
            }
        )
    if "MOCK_UNSOLVED" in code:
        errors.append(
            {"severity": "error", "message": "unsolved goals\n⊢ ...", "line": 3}
        )
    if "MOCK_WARN" in code:
        errors.append({"severity": "warning", "message": "declaration uses sorry?no", "line": 1})
    hard = [e for e in errors if e["severity"] == "error"]
    return {"pass": not hard, "errors": errors}


class _Handler(BaseHTTPRequestHandler):
    def do_POST(self):
        if self.path != "/verify":
            self.send_error(404)
            return
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        results = [_judge(code) for code in body["codes"]]
        payload = json.dumps({"results": results}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_lines():
    """Shared sink for per-criterion verdict lines, echoed after the run."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def mock_verifier_url():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
