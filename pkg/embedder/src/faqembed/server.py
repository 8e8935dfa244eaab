"""HTTP embedding endpoint.

POST /embed with ``{"texts": [...], "kind": "query"|"passage"}`` returns
``{"dim": int, "vectors": [[...], ...]}`` in request order. The model is
shared read-only across requests.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from faqembed import DataError
from faqembed.export import encode_texts
from faqembed.model import HashEmbedder

logger = logging.getLogger(__name__)


class _EmbedHandler(BaseHTTPRequestHandler):
    model: HashEmbedder  # bound by make_embed_server

    def log_message(self, fmt, *args):
        logger.debug("%s - %s", self.address_string(), fmt % args)

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        if self.path != "/embed":
            self._send(404, {"error": f"unknown path '{self.path}'"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length).decode("utf-8"))
        except (ValueError, json.JSONDecodeError):
            self._send(400, {"error": "body must be JSON"})
            return
        if not isinstance(payload, dict):
            self._send(400, {"error": "body must be a JSON object"})
            return
        texts = payload.get("texts")
        kind = payload.get("kind")
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            self._send(400, {"error": "'texts' must be a list of strings"})
            return
        if kind not in ("query", "passage"):
            self._send(400, {"error": "'kind' must be 'query' or 'passage'"})
            return
        try:
            vectors = encode_texts(self.model, texts, kind)
        except DataError as exc:
            self._send(400, {"error": str(exc)})
            return
        except Exception as exc:  # noqa: BLE001 - HTTP boundary
            logger.exception("embedding failed")
            self._send(500, {"error": f"internal error: {exc}"})
            return
        self._send(200, {
            "dim": self.model.dim,
            "vectors": [[float(x) for x in row] for row in vectors],
        })


def make_embed_server(model: HashEmbedder, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    handler = type("BoundEmbedHandler", (_EmbedHandler,), {"model": model})
    return ThreadingHTTPServer((host, port), handler)


def serve_embeddings(model: HashEmbedder, host: str = "127.0.0.1", port: int = 0):
    """Start serving on a daemon thread; returns (server, thread)."""
    server = make_embed_server(model, host, port)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, thread
