"""Shared test fixtures: random images, a fixture-corpus loader, and a tiny
configurable HTTP stub used to exercise the remote backends and the
recommender client without any real service."""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
import pytest

from advlight import Image

FIXTURES = Path(__file__).parent / "fixtures"


def make_image(rng, height=None, width=None, lo=0.0, hi=1.0):
    h = height if height is not None else int(rng.integers(4, 12))
    w = width if width is not None else int(rng.integers(4, 12))
    return Image(rng.uniform(lo, hi, size=(h, w, 3)))


@pytest.fixture(scope="session")
def caption_fixture_rows():
    rows = []
    with open(FIXTURES / "captions.jsonl") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows


class StubServer:
    """HTTP stub: routes maps (method, path) -> callable(body_dict_or_None)
    returning (status, payload_dict). Unrouted paths get a 404 JSON error."""

    def __init__(self, routes):
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _serve(self, method):
                body = None
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length) if length else b""
                if raw:
                    try:
                        body = json.loads(raw)
                    except ValueError:
                        self._send(400, {"code": "bad_json", "message": "unparseable body"})
                        return
                stub.requests.append((method, self.path, body, dict(self.headers)))
                route = stub.routes.get((method, self.path))
                if route is None:
                    self._send(404, {"code": "not_found", "message": f"no route {self.path}"})
                    return
                status, payload = route(body)
                self._send(status, payload)

            def _send(self, status, payload):
                data = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_POST(self):
                self._serve("POST")

            def do_GET(self):
                self._serve("GET")

        self.routes = routes
        self.requests = []
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def url(self):
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def close(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def stub_server():
    servers = []

    def factory(routes):
        server = StubServer(routes)
        servers.append(server)
        return server

    yield factory
    for server in servers:
        server.close()


def echo_routes():
    """The conformance-fixture behavior: relight echoes the image, the VJP
    echoes grad_out, and loss is the mean pixel with a constant gradient."""

    def relight(body):
        return 200, {"relit": body["image"]}

    def relight_vjp(body):
        return 200, {"grad_lighting": body["grad_out"], "approx": True}

    def loss_grad(body):
        from advlight.wire import decode_tensor, encode_tensor

        image = decode_tensor(body["image"])
        clean = decode_tensor(body["clean_image"])
        loss = float(image.mean())
        nat = 1.0 if np.array_equal(image, clean) else 0.0
        grad = np.full(image.shape, 1.0 / image.size)
        return 200, {
            "loss": loss,
            "match_term": loss - nat,
            "nat_term": nat,
            "grad": encode_tensor(grad),
        }

    def health(body):
        return 200, {"status": "ok", "models": {"relight": "echo", "victim": "echo"}}

    return {
        ("POST", "/relight"): relight,
        ("POST", "/relight_vjp"): relight_vjp,
        ("POST", "/loss_grad"): loss_grad,
        ("GET", "/health"): health,
    }
