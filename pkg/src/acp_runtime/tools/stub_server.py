"""Tiny local HTTP server for exercising the HTTP adapter offline.

Routes::

    /echo            echoes the request body (POST) or query as JSON (GET)
    /status/<code>   responds with that status code
    /delay/<ms>      sleeps, then echoes
    /headers         returns the received headers as JSON
"""

from __future__ import annotations

import json
import threading
import time
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qsl, urlparse


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _reply(self, code: int, payload: bytes):
        self.send_response(code)
        self.send_header("Content-Type", "text/plain; charset=utf-8")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        try:
            self.wfile.write(payload)
        except (BrokenPipeError, ConnectionResetError):
            pass

    def _handle(self):
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        body = self._body()
        echo = body if body else json.dumps(dict(parse_qsl(url.query)), sort_keys=True).encode()
        if parts[:1] == ["status"] and len(parts) > 1:
            return self._reply(int(parts[1]), f"status {parts[1]}".encode())
        if parts[:1] == ["delay"] and len(parts) > 1:
            time.sleep(int(parts[1]) / 1000)
            return self._reply(200, echo)
        if parts[:1] == ["headers"]:
            return self._reply(200, json.dumps(dict(self.headers.items()), sort_keys=True).encode())
        if parts[:1] == ["echo"]:
            return self._reply(200, echo)
        return self._reply(404, b"not found")

    do_GET = do_POST = do_PUT = do_PATCH = do_DELETE = _handle


@contextmanager
def serve_stub(host: str = "127.0.0.1", port: int = 0):
    """Run the stub server on a background thread; yields its base url."""
    server = ThreadingHTTPServer((host, port), _Handler)
    server.daemon_threads = True
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://{host}:{server.server_address[1]}"
    finally:
        server.shutdown()
        server.server_close()
