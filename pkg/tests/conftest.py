import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest


class MockScoreService:
    """In-process HTTP score service with fault injection.

    ``behavior`` switches the response mode:
      constant     -> {"score": value}
      out-of-range -> {"score": 1.3}
      slow         -> sleeps ``delay`` seconds before answering
      malformed    -> non-JSON body
      http-error   -> status 500
    Requests received are recorded (payload dicts) for wire-format checks.
    """

    def __init__(self):
        self.behavior = "constant"
        self.value = 0.7
        self.delay = 0.0
        self.requests = []

        service = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = self.rfile.read(length)
                try:
                    service.requests.append(json.loads(body))
                except json.JSONDecodeError:
                    service.requests.append(None)
                if service.behavior == "slow":
                    time.sleep(service.delay)
                try:
                    if service.behavior == "http-error":
                        self.send_response(500)
                        self.end_headers()
                        return
                    if service.behavior == "malformed":
                        payload = b"not json"
                    elif service.behavior == "out-of-range":
                        payload = json.dumps({"score": 1.3}).encode()
                    else:
                        payload = json.dumps({"score": service.value}).encode()
                    self.send_response(200)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(payload)))
                    self.end_headers()
                    self.wfile.write(payload)
                except (BrokenPipeError, ConnectionResetError):
                    pass  # client gave up during injected latency

            def handle_one_request(self):
                try:
                    super().handle_one_request()
                except (BrokenPipeError, ConnectionResetError):
                    pass

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}/score"

    def reset(self, behavior="constant", value=0.7, delay=0.0):
        self.behavior = behavior
        self.value = value
        self.delay = delay
        self.requests.clear()

    def close(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture(scope="session")
def score_service():
    service = MockScoreService()
    yield service
    service.close()
