import json
from pathlib import Path

import pytest

from permlab._data import PACKAGE_DATA
from permlab.matrix import load_matrix
from permlab.registry import load_registry

CORPUS = PACKAGE_DATA / "fixtures" / "corpus"
EXPECTED = PACKAGE_DATA / "fixtures" / "expected.json"
SCENARIOS = PACKAGE_DATA / "scenarios"


@pytest.fixture(scope="session")
def registry():
    return load_registry()


@pytest.fixture(scope="session")
def matrix(registry):
    return load_matrix(None, registry)


@pytest.fixture(scope="session")
def registry_doc():
    return json.loads((PACKAGE_DATA / "registry.json").read_text())


@pytest.fixture(scope="session")
def matrix_doc():
    return json.loads((PACKAGE_DATA / "matrix.json").read_text())


@pytest.fixture(scope="session")
def expected_corpus():
    return json.loads(EXPECTED.read_text())


def corpus_dirs() -> list[Path]:
    return sorted(d for d in CORPUS.iterdir() if (d / "site.json").is_file())


# -- a tiny local web server for fetch tests ------------------------------------

import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class _Handler(BaseHTTPRequestHandler):
    routes: dict = {}

    def do_GET(self):  # noqa: N802
        route = self.routes.get(self.path)
        if route is None:
            self.send_error(404)
            return
        status, headers, body, delay = route
        if delay:
            time.sleep(delay)
        self.send_response(status)
        for k, v in headers.items():
            self.send_header(k, v)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


class FixtureServer:
    def __init__(self):
        handler = type("Handler", (_Handler,), {"routes": {}})
        self.routes = handler.routes
        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), handler)
        self.httpd.daemon_threads = True
        self.base = f"http://127.0.0.1:{self.httpd.server_port}"
        threading.Thread(target=self.httpd.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True).start()

    def add(self, path, body="", status=200, headers=None, delay=0.0, content_type="text/html"):
        data = body.encode() if isinstance(body, str) else body
        h = {"Content-Type": content_type, **(headers or {})}
        self.routes[path] = (status, h, data, delay)

    def redirect(self, path, location, status=302):
        self.add(path, status=status, headers={"Location": location})

    def url(self, path):
        return self.base + path

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def server():
    srv = FixtureServer()
    yield srv
    srv.close()
