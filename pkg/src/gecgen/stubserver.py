"""In-process HTTP server exposing a local backend over the wire protocol.

Lets integration tests (and the real model server's conformance suite) hit
the exact protocol the pipeline speaks, with deterministic offline backends
behind it.
"""

from __future__ import annotations

import json
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .errors import ProtocolViolation
from .predictor import EchoBackend, LexiconBackend, PredictionRequest, PredictorBackend
from .textcore import MASK


def _predict_payload(backend: PredictorBackend, payload: dict) -> dict:
    items = payload.get("items")
    if not isinstance(items, list) or not items:
        raise ProtocolViolation("body must carry a non-empty 'items' list")
    requests_ = []
    for item in items:
        if item.get("mask_token") != MASK:
            raise ProtocolViolation(f"mask_token must be {MASK!r}")
        tokens = item.get("target_tokens")
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            raise ProtocolViolation("target_tokens must be a list of strings")
        requests_.append(
            PredictionRequest(
                id=str(item.get("id")),
                source_en=str(item.get("source", "")),
                target_tokens=tuple(tokens),
                top_k=int(item.get("top_k", 16)),
            )
        )
    predictions = backend.predict(requests_)
    out_items = []
    for req, preds in zip(requests_, predictions):
        out_items.append(
            {
                "id": req.id,
                "predictions": [
                    {
                        "position": p.position,
                        "candidates": [
                            {"token": tok, "logprob": math.log(prob)}
                            for tok, prob in p.candidates
                        ],
                    }
                    for p in preds
                ],
            }
        )
    return {"items": out_items}


class _Handler(BaseHTTPRequestHandler):
    backend: PredictorBackend  # set on the server class

    # Keep-alive plus TCP_NODELAY: without these, the headers/body segment
    # split stalls on Nagle + delayed-ACK under concurrent clients.
    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, code: int, body: dict) -> None:
        data = json.dumps(body).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        if self.path == "/healthz":
            self._send(200, {"status": "ok"})
        else:
            self._send(404, {"error": "not found"})

    def do_POST(self):
        if self.path != "/v1/predict":
            self._send(404, {"error": "not found"})
            return
        length = int(self.headers.get("Content-Length", 0))
        try:
            payload = json.loads(self.rfile.read(length).decode("utf-8"))
            body = _predict_payload(self.server.backend, payload)  # type: ignore[attr-defined]
        except (json.JSONDecodeError, UnicodeDecodeError):
            self._send(400, {"error": "invalid JSON body"})
            return
        except (ProtocolViolation, KeyError, TypeError, ValueError) as exc:
            self._send(400, {"error": str(exc)})
            return
        self._send(200, body)


class StubServer:
    """Threaded wire-protocol server around any in-process backend."""

    def __init__(self, backend: PredictorBackend, host: str = "127.0.0.1", port: int = 0):
        self._httpd = ThreadingHTTPServer((host, port), _Handler)
        self._httpd.backend = backend  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "StubServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def __enter__(self) -> "StubServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def build_backend(
    mode: str,
    unigram_file: str | None = None,
    oracle_file: str | None = None,
) -> PredictorBackend:
    """Backend for the stub-serve CLI: 'lexicon' or 'echo'.

    Echo oracles load from a TSV of ``id<TAB>token token ...`` giving the
    token sequence echoed back for that request id.
    """
    if mode == "lexicon":
        if not unigram_file:
            raise ProtocolViolation("lexicon mode needs --unigrams")
        return LexiconBackend.from_unigram_file(unigram_file)
    if mode == "echo":
        if not oracle_file:
            raise ProtocolViolation("echo mode needs --oracle")
        oracle: dict[str, list[str]] = {}
        with open(oracle_file, encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                rid, _, rest = line.partition("\t")
                oracle[rid] = rest.split()
        return EchoBackend(oracle)
    raise ProtocolViolation(f"unknown stub mode {mode!r}")
