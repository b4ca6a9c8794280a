"""HTTP API over an annotation store.

Plain JSON over stdlib ``http.server``; no framework dependency. The store
directory comes from the ``TRIAGE_STORE_DIR`` environment variable unless
given explicitly. Writes are serialized by the store's internal lock, so
concurrent clients are safe.

Routes:
  GET  /conversations                      list conversations
  GET  /conversations/{id}/utterances      review items with pre-labels,
                                           annotations and vote summaries
  POST /annotations                        body: utterance_id, annotator_id, label
  GET  /agreement                          observed agreement + kappa
  POST /export                             write the voted training set

200 on success, 400 malformed request, 404 unknown id, 409 precondition
failure (nothing to aggregate or export yet).
"""

from __future__ import annotations

import json
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .annotation import AnnotationStore
from .model import ArtefactLabel


def _store_dir(explicit=None) -> str:
    directory = explicit or os.environ.get("TRIAGE_STORE_DIR")
    if not directory:
        raise ValueError("no store directory: pass one or set TRIAGE_STORE_DIR")
    return directory


class _Handler(BaseHTTPRequestHandler):
    store: AnnotationStore  # injected by make_server

    def _send(self, status: int, payload) -> None:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, message: str) -> None:
        self._send(status, {"error": message})

    def log_message(self, format, *args):  # quiet by default
        pass

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()

    def do_GET(self):
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        if parts == ["conversations"]:
            self._send(200, {"conversations": self.store.conversations()})
            return
        if len(parts) == 3 and parts[0] == "conversations" and parts[2] == "utterances":
            conversation_id = parts[1]
            ids = self.store.utterance_ids(conversation_id)
            if not ids:
                self._error(404, f"unknown conversation: {conversation_id}")
                return
            self._send(200, {"utterances": [self.store.review_item(u) for u in ids]})
            return
        if parts == ["agreement"]:
            try:
                self._send(200, self.store.agreement())
            except ValueError as exc:
                self._error(409, str(exc))
            return
        self._error(404, f"no such route: {self.path}")

    def do_POST(self):
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        if parts == ["annotations"]:
            self._post_annotation()
            return
        if parts == ["export"]:
            try:
                rows = self.store.export_training_set(
                    self.store.directory / "training_set.jsonl"
                )
            except ValueError as exc:
                self._error(409, str(exc))
                return
            self._send(200, {"path": str(self.store.directory / "training_set.jsonl"),
                             "count": len(rows)})
            return
        self._error(404, f"no such route: {self.path}")

    def _post_annotation(self):
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length).decode("utf-8") or "{}")
        except (ValueError, json.JSONDecodeError):
            self._error(400, "body must be a JSON object")
            return
        if not isinstance(body, dict):
            self._error(400, "body must be a JSON object")
            return
        missing = [k for k in ("utterance_id", "annotator_id", "label") if not body.get(k)]
        if missing:
            self._error(400, f"missing fields: {', '.join(missing)}")
            return
        try:
            label = ArtefactLabel.from_string(str(body["label"]))
        except ValueError as exc:
            self._error(400, str(exc))
            return
        try:
            self.store.record_annotation(
                str(body["utterance_id"]), str(body["annotator_id"]), label
            )
        except KeyError:
            self._error(404, f"unknown utterance: {body['utterance_id']}")
            return
        self._send(200, self.store.review_item(str(body["utterance_id"])))


def make_server(store_dir=None, port: int = 8080) -> ThreadingHTTPServer:
    """Build (but do not start) a server bound to 127.0.0.1:port."""
    store = AnnotationStore.open(_store_dir(store_dir))
    handler = type("BoundHandler", (_Handler,), {"store": store})
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve_forever(store_dir=None, port: int = 8080) -> None:
    server = make_server(store_dir, port)
    try:
        server.serve_forever()
    finally:
        server.server_close()


class BackgroundServer:
    """Context manager running the API on a daemon thread (used in tests)."""

    def __init__(self, store_dir, port: int = 0):
        self.server = make_server(store_dir, port)
        self.port = self.server.server_address[1]
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
        self._thread.join(timeout=5)
        return False
