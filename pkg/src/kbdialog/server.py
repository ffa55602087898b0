"""HTTP inference service for live chat against a trained checkpoint.

Endpoints:
    POST /session        {"kb": {"columns": [...], "rows": [{col: value}]}}
                         -> {"session_id": ...}
    POST /chat           {"session_id": ..., "utterance": ...}
                         -> {"response": ..., "trace": DecodeTrace}
    GET  /session/<id>   -> {"session_id", "kb", "turns"}
    GET  /health         -> {"status": "ok"}

Sessions are in-memory only. A session's KB is fixed at creation; model
parameters are shared read-only, so sessions with different KBs coexist.
Requests to the same session are serialized by a per-session lock.
"""

from __future__ import annotations

import json
import threading
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .corpus import DRIVER, CAR, NONE, KBTable, join_entities, normalize_value, tokenize
from .model import DialogueModel


class ServiceError(ValueError):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


class ChatSession:
    def __init__(self, session_id: str, kb: KBTable):
        self.id = session_id
        self.kb = kb
        self.turns: list = []  # (speaker, tokens) pairs, append-only
        self.traces: list = []  # one DecodeTrace dict per car turn
        self.lock = threading.Lock()


class DialogueService:
    """Session bookkeeping + decoding on top of a loaded model."""

    def __init__(self, model: DialogueModel, max_len: int = 60):
        self.model = model
        self.max_len = max_len
        self.sessions: dict[str, ChatSession] = {}
        self._lock = threading.Lock()

    def parse_kb(self, payload) -> KBTable:
        if not isinstance(payload, dict):
            raise ServiceError(400, "kb must be an object with columns and rows")
        columns = payload.get("columns")
        rows = payload.get("rows")
        expected = list(self.model.config.columns)
        if not isinstance(columns, list) or sorted(columns) != sorted(expected):
            raise ServiceError(
                400, f"kb columns must be exactly {expected}, got {columns}")
        if not isinstance(rows, list) or not rows:
            raise ServiceError(400, "kb needs at least one row")
        parsed = []
        for i, row in enumerate(rows):
            if not isinstance(row, dict):
                raise ServiceError(400, f"kb row {i} must be an object")
            unknown = sorted(set(row) - set(expected))
            if unknown:
                raise ServiceError(
                    400, f"kb row {i} has unknown columns {unknown}; expected {expected}")
            parsed.append({
                col: normalize_value(str(row[col])) if row.get(col) not in (None, "")
                else NONE
                for col in expected
            })
        return KBTable(columns=tuple(expected), rows=tuple(parsed),
                       domain="session", label_columns=(expected[0],))

    def create_session(self, kb_payload) -> str:
        kb = self.parse_kb(kb_payload)
        session_id = uuid.uuid4().hex[:12]
        with self._lock:
            self.sessions[session_id] = ChatSession(session_id, kb)
        return session_id

    def _session(self, session_id) -> ChatSession:
        with self._lock:
            session = self.sessions.get(str(session_id))
        if session is None:
            raise ServiceError(404, f"unknown session '{session_id}'")
        return session

    def chat(self, session_id, utterance) -> dict:
        session = self._session(session_id)
        tokens = join_entities(tokenize(str(utterance)), session.kb)
        if not tokens:
            raise ServiceError(400, "utterance is empty after tokenization")
        with session.lock:
            session.turns.append(("driver", tokens))
            history: list = []
            for speaker, toks in session.turns:
                history.append(DRIVER if speaker == "driver" else CAR)
                history.extend(toks)
            reply, trace = self.model.respond(history, session.kb,
                                              max_len=self.max_len)
            session.turns.append(("car", reply))
            payload = trace.to_json()
            session.traces.append(payload)
        return {"response": " ".join(reply), "trace": payload}

    def history(self, session_id) -> dict:
        session = self._session(session_id)
        with session.lock:
            turns = [{"speaker": spk, "tokens": list(toks), "text": " ".join(toks)}
                     for spk, toks in session.turns]
        return {
            "session_id": session.id,
            "kb": session.kb.to_json(),
            "turns": turns,
        }


_CONTENT_TYPES = {".html": "text/html", ".js": "text/javascript",
                  ".css": "text/css", ".map": "application/json",
                  ".svg": "image/svg+xml", ".ico": "image/x-icon"}


def make_handler(service: DialogueService, ui_dir=None):
    ui_root = Path(ui_dir).resolve() if ui_dir else None

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):
            pass

        def _send(self, status: int, payload: dict):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _read_json(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            try:
                data = json.loads(raw.decode("utf-8")) if raw else {}
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise ServiceError(400, f"request body is not valid JSON ({exc})")
            if not isinstance(data, dict):
                raise ServiceError(400, "request body must be a JSON object")
            return data

        def _static(self, path: str):
            name = "index.html" if path in ("/", "") else path.lstrip("/")
            target = (ui_root / name).resolve()
            if not target.is_relative_to(ui_root) or not target.is_file():
                self._send(404, {"error": f"no such path {path}"})
                return
            body = target.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type",
                             _CONTENT_TYPES.get(target.suffix, "application/octet-stream"))
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            try:
                if self.path == "/health":
                    self._send(200, {"status": "ok"})
                elif self.path.startswith("/session/"):
                    self._send(200, service.history(self.path.split("/", 2)[2]))
                elif ui_root is not None:
                    self._static(self.path)
                else:
                    self._send(404, {"error": f"no such path {self.path}"})
            except ServiceError as exc:
                self._send(exc.status, {"error": str(exc)})

        def do_POST(self):
            try:
                data = self._read_json()
                if self.path == "/session":
                    session_id = service.create_session(data.get("kb"))
                    self._send(200, {"session_id": session_id})
                elif self.path == "/chat":
                    if "session_id" not in data or "utterance" not in data:
                        raise ServiceError(400, "chat needs session_id and utterance")
                    self._send(200, service.chat(data["session_id"], data["utterance"]))
                else:
                    self._send(404, {"error": f"no such path {self.path}"})
            except ServiceError as exc:
                self._send(exc.status, {"error": str(exc)})

    return Handler


def serve(model: DialogueModel, port: int = 8080, ui_dir=None,
          max_len: int = 60) -> ThreadingHTTPServer:
    """Build the server; caller runs .serve_forever() (or uses it in a thread)."""
    service = DialogueService(model, max_len=max_len)
    return ThreadingHTTPServer(("0.0.0.0", port), make_handler(service, ui_dir))
