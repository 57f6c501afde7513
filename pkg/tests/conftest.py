import http.server
import socket
import threading
import time
import sys
from datetime import date, timedelta
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from session_split.ingest import CorporateEvent, DailyBar, PriceSeries  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def no_network(monkeypatch):
    """Fail the test on any attempt to open a socket connection."""
    calls = []

    def guard(self, *args, **kwargs):
        calls.append(args)
        raise AssertionError(f"network access attempted: {args}")

    monkeypatch.setattr(socket.socket, "connect", guard)
    monkeypatch.setattr(socket.socket, "connect_ex", guard)
    monkeypatch.setattr(socket, "create_connection", lambda *a, **k: guard(None, *a))
    return calls


def make_series(rows, events=(), instrument_id="TEST", start=date(2021, 1, 4)):
    """Build a series from ``(open, close)`` pairs on consecutive days."""
    bars = tuple(DailyBar(date=start + timedelta(days=i), open=o, close=c)
                 for i, (o, c) in enumerate(rows))
    evs = tuple(CorporateEvent(date=start + timedelta(days=i), dividend=dv, split_factor=sf)
                for i, dv, sf in events)
    return PriceSeries(instrument_id=instrument_id, bars=bars, events=evs)


STUB_DOCS = {
    "history": b"Date,Open,High,Low,Close,Adj Close,Volume\n" + b"2021-06-29,1,1,1,1,1,0\r\n",
    "div": b"Date,Dividends\n2021-06-29,0.5\n",
    "split": b"Date,Stock Splits\n",
}


class _Handler(http.server.BaseHTTPRequestHandler):
    mode = "ok"

    def do_GET(self):
        from urllib.parse import parse_qs, urlparse
        q = parse_qs(urlparse(self.path).query)
        if self.server.mode == "404":
            self.send_error(404)
            return
        if self.server.mode == "slow":
            time.sleep(1.0)
        self.server.seen.append(self.path)
        body = STUB_DOCS[q["events"][0]]
        self.send_response(200)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    server.mode = "ok"
    server.seen = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    server.server_close()


def stub_template(server):
    host, port = server.server_address
    return f"http://{host}:{port}/dl/{{symbol}}?period1={{period1}}&period2={{period2}}&events={{events}}"


# --- acceptance summary: one line per criterion in the terminal summary ---

ACCEPTANCE_LINES = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.skipped or rep.failed):
        return
    if rep.when == "teardown" and rep.passed:
        return
    status = "PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL"
    if status == "SKIP":
        detail = rep.longrepr[2] if isinstance(rep.longrepr, tuple) else str(rep.longrepr)
    else:
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    ACCEPTANCE_LINES.append((marker.args[0], item.name, status, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, status, detail in sorted(ACCEPTANCE_LINES, key=lambda r: (r[0], r[1])):
        terminalreporter.write_line(f"criterion {number} [{name}]: {status}  {detail}".rstrip())
