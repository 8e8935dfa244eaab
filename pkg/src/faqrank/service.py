"""Read-only HTTP search endpoint over preloaded indices.

Endpoints:
  GET /search?q=...&k=...&mode=bm25|dense|hybrid
  GET /healthz

All state is loaded once at startup and never mutated, so concurrent
requests share it safely. Responses are UTF-8 JSON.
"""

from __future__ import annotations

import argparse
import json
import logging
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from faqrank.corpus import Corpus, load_corpus
from faqrank.dense import MockEmbedder, RemoteEmbedder, VectorStore, import_vectors, load_synonyms
from faqrank.errors import ConfigError, DataError
from faqrank.hybrid import FusionConfig
from faqrank.lexical import BM25Params, InvertedIndex, build_index, load_index
from faqrank.pipeline import single_query_search
from faqrank.text import normalize

logger = logging.getLogger(__name__)

MAX_K = 100
DEFAULT_K = 10
DEFAULT_MODE = "hybrid"


@dataclass
class SearchState:
    """Everything a request needs, assembled once at startup."""

    corpus: Corpus
    index: InvertedIndex
    doc_store: VectorStore | None = None
    provider: object | None = None
    fusion: FusionConfig = field(default_factory=FusionConfig)


def handle_search(state: SearchState, q: str, k: int, mode: str) -> dict:
    """Search with the same semantics as the CLI; returns the response body."""
    results = single_query_search(
        q, k, mode,
        index=state.index, doc_store=state.doc_store,
        provider=state.provider, fusion=state.fusion,
    )
    body = []
    for rank, (doc_id, score) in enumerate(results, 1):
        text = state.corpus[doc_id].text if doc_id in state.corpus else ""
        body.append({"id": doc_id, "text": text, "score": score, "rank": rank})
    return {"query": q, "mode": mode, "results": body}


class _Handler(BaseHTTPRequestHandler):
    state: SearchState  # set by make_server

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, fmt, *args):  # quiet by default
        logger.debug("%s - %s", self.address_string(), fmt % args)

    def do_GET(self):
        parsed = urlparse(self.path)
        if parsed.path == "/healthz":
            self._send(200, {
                "status": "ok",
                "documents": len(self.state.corpus),
                "vectors": len(self.state.doc_store) if self.state.doc_store else 0,
            })
            return
        if parsed.path != "/search":
            self._send(404, {"error": f"unknown path '{parsed.path}'"})
            return

        params = parse_qs(parsed.query)
        q = params.get("q", [""])[0]
        if not normalize(q):
            self._send(400, {"error": "query must be non-empty"})
            return
        try:
            k = int(params.get("k", [str(DEFAULT_K)])[0])
        except ValueError:
            self._send(400, {"error": "k must be an integer"})
            return
        if not 1 <= k <= MAX_K:
            self._send(400, {"error": f"k must lie in [1, {MAX_K}]"})
            return
        mode = params.get("mode", [DEFAULT_MODE])[0]
        if mode not in ("bm25", "dense", "hybrid"):
            self._send(400, {"error": f"mode must be bm25, dense, or hybrid, got '{mode}'"})
            return
        if mode in ("dense", "hybrid") and (self.state.doc_store is None or self.state.provider is None):
            self._send(409, {"error": f"mode '{mode}' unavailable: no vector store loaded"})
            return
        try:
            self._send(200, handle_search(self.state, q, k, mode))
        except (DataError, ConfigError) as exc:
            self._send(400, {"error": str(exc)})
        except Exception as exc:  # noqa: BLE001 - HTTP boundary
            logger.exception("search failed")
            self._send(500, {"error": f"internal error: {exc}"})


def make_server(state: SearchState, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Create (but do not start) the HTTP server bound to the state."""
    handler = type("BoundHandler", (_Handler,), {"state": state})
    return ThreadingHTTPServer((host, port), handler)


def serve_in_thread(state: SearchState, host: str = "127.0.0.1", port: int = 0):
    """Start the server on a daemon thread; returns (server, thread)."""
    server = make_server(state, host, port)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, thread


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Serve the search endpoints.")
    parser.add_argument("--corpus", required=True)
    parser.add_argument("--index", default=None, help="Prebuilt BM25 index; built from the corpus when omitted.")
    parser.add_argument("--vectors", default=None, help="Document vector file enabling dense/hybrid modes.")
    parser.add_argument("--provider", choices=["mock", "remote"], default="mock")
    parser.add_argument("--synonyms", default=None)
    parser.add_argument("--url", default=None, help="Remote embedding endpoint.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    args = parser.parse_args(argv)

    corpus = load_corpus(args.corpus)
    index = load_index(args.index) if args.index else build_index(corpus, BM25Params())
    doc_store = provider = None
    if args.vectors:
        doc_store = import_vectors(args.vectors)
        if args.provider == "remote":
            if not args.url:
                parser.error("--provider remote needs --url")
            provider = RemoteEmbedder(args.url, doc_store.dim)
        else:
            canonical = load_synonyms(args.synonyms) if args.synonyms else None
            provider = MockEmbedder(doc_store.dim, canonical_map=canonical)

    state = SearchState(corpus=corpus, index=index, doc_store=doc_store, provider=provider)
    server = make_server(state, args.host, args.port)
    logger.info("serving on %s:%d", args.host, server.server_address[1])
    print(f"listening on {args.host}:{server.server_address[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
