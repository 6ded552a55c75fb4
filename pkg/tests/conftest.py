import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
from hypothesis import HealthCheck, settings

from gasforge.chain_ingest import BlockRecord, BlockSequence

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_seq(n, start=100, t0=1_679_356_800, limit=30_000_000, fee=10**9, used=None):
    used = used or (lambda i: (i * 7_919_993) % (limit + 1))
    return BlockSequence(BlockRecord(t0 + 12 * i, start + i, limit, used(i), fee + i) for i in range(n))


def header_json(rec: BlockRecord) -> dict:
    return {"number": hex(rec.block_number), "timestamp": hex(rec.timestamp),
            "gasLimit": hex(rec.gas_limit), "gasUsed": hex(rec.gas_used),
            "baseFeePerGas": hex(rec.base_fee), "hash": "0x" + "ab" * 32}


class FakeNode:
    """In-process JSON-RPC responder over a dict of headers."""

    def __init__(self, headers: dict[int, dict], fail_first: int = 0):
        self.headers = headers
        self.fail_first = fail_first
        self.calls = 0
        self.lock = threading.Lock()

    def reply(self, req):
        n = int(req["params"][0], 16)
        return {"jsonrpc": "2.0", "id": req["id"], "result": self.headers.get(n)}

    def __call__(self, payload):
        from gasforge.chain_ingest import TransportError
        with self.lock:
            self.calls += 1
            if self.calls <= self.fail_first:
                raise TransportError("connection reset")
        if isinstance(payload, list):
            return [self.reply(r) for r in payload]
        return self.reply(payload)


@pytest.fixture
def fake_node():
    return FakeNode


@pytest.fixture
def http_node():
    """Real HTTP JSON-RPC server on localhost backed by a FakeNode."""
    servers = []

    def start(node: FakeNode) -> str:
        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = self.rfile.read(int(self.headers["Content-Length"]))
                out = json.dumps(node(json.loads(body))).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(out)))
                self.end_headers()
                self.wfile.write(out)

            def log_message(self, *a):
                pass

        srv = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        threading.Thread(target=srv.serve_forever, daemon=True).start()
        servers.append(srv)
        return f"http://127.0.0.1:{srv.server_address[1]}"

    yield start
    for s in servers:
        s.shutdown()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
