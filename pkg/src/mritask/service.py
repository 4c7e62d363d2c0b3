"""HTTP/JSON service for observer studies.

Serves trial payloads and stored images to the browser UI and persists
responses durably before acknowledging them.  The signal side of a trial
never appears in any payload; correctness is returned only to sessions
flagged as training, and only after the response is recorded.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import images
from .afc import SessionStore, dataset_digest, generate_trials_for, record_response, score_session
from .errors import DataError, ParameterError, SessionStateError

logger = logging.getLogger(__name__)


class StudyService:
    """State shared by all request handlers: datasets, sessions, locks."""

    def __init__(self, data_root, ui_dir=None, default_trials: int = 200):
        self.data_root = str(data_root)
        self.ui_dir = str(ui_dir) if ui_dir else None
        self.default_trials = default_trials
        self.store = SessionStore(os.path.join(self.data_root, "sessions"))
        self.datasets: dict[str, dict] = {}
        self.sessions: dict = {}
        self._session_locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self._load_datasets()

    def _load_datasets(self):
        afc_root = os.path.join(self.data_root, "afc")
        if not os.path.isdir(afc_root):
            return
        for name in sorted(os.listdir(afc_root)):
            manifest_path = os.path.join(afc_root, name, "manifest.json")
            if not os.path.exists(manifest_path):
                continue
            with open(manifest_path, "rb") as fh:
                raw = fh.read()
            manifest = json.loads(raw)
            condition = manifest["condition"]
            files = {rec["id"]: rec["file"] for rec in manifest["images"]}
            self.datasets[condition] = {
                "dir": os.path.join(afc_root, name),
                "digest": dataset_digest(raw),
                "n_pairs": len(manifest["images"]) // 2,
                "patch": manifest.get("patch"),
                "files": files,
                "template": manifest.get("template", "template.png"),
            }
            logger.info("loaded AFC dataset %r (%d pairs)", condition,
                        self.datasets[condition]["n_pairs"])

    def session_lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            if session_id not in self._session_locks:
                self._session_locks[session_id] = threading.Lock()
            return self._session_locks[session_id]

    def get_session(self, session_id: str):
        with self._registry_lock:
            if session_id in self.sessions:
                return self.sessions[session_id]
        if session_id in self.store.list_sessions():
            session = self.store.load(session_id)
            with self._registry_lock:
                self.sessions.setdefault(session_id, session)
                return self.sessions[session_id]
        return None

    def create_session(self, observer: str, condition: str, seed: int,
                       training: bool = False, n: int | None = None,
                       metadata: dict | None = None):
        if condition not in self.datasets:
            raise ParameterError(f"unknown condition {condition!r}")
        ds = self.datasets[condition]
        n = n or min(self.default_trials, ds["n_pairs"])
        trials = generate_trials_for(condition, ds["n_pairs"], n=n, seed=seed)
        session = self.store.create(observer, condition, seed, trials,
                                    training=training, digest=ds["digest"],
                                    metadata=metadata)
        with self._registry_lock:
            self.sessions[session.session_id] = session
        return session

    def image_bytes(self, condition: str, image_id: str) -> bytes | None:
        ds = self.datasets.get(condition)
        if ds is None:
            return None
        if image_id == "template":
            rel = ds["template"]
        else:
            rel = ds["files"].get(image_id)
        if rel is None:
            return None
        return images.png16_to_png8_bytes(os.path.join(ds["dir"], rel))


def _trial_payload(session, trial) -> dict:
    refs = trial.side_refs()
    cond = trial.condition
    return {
        "trial_id": trial.trial_id,
        "index": session.answered,
        "total": session.total,
        "left_image_url": f"/images/{cond}/{refs['left']}.png",
        "right_image_url": f"/images/{cond}/{refs['right']}.png",
        "signal_ref_url": f"/images/{cond}/template.png",
    }


class StudyRequestHandler(BaseHTTPRequestHandler):
    service: StudyService  # injected by make_server
    protocol_version = "HTTP/1.1"

    # -- plumbing -------------------------------------------------------------

    def log_message(self, fmt, *args):
        logger.debug("%s - %s", self.address_string(), fmt % args)

    def _send_json(self, payload: dict, status: int = 200):
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_json(self, status: int, message: str):
        self._send_json({"error": message}, status=status)

    def _send_bytes(self, body: bytes, content_type: str, status: int = 200):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self) -> dict | None:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError:
            return None
        return doc if isinstance(doc, dict) else None

    # -- routing ----------------------------------------------------------------

    def do_GET(self):
        path = self.path.split("?", 1)[0]
        parts = [p for p in path.split("/") if p]
        try:
            if parts[:1] == ["datasets"] and len(parts) == 1:
                return self._get_datasets()
            if parts[:1] == ["images"] and len(parts) == 3:
                return self._get_image(parts[1], parts[2])
            if parts[:1] == ["sessions"] and len(parts) == 3:
                if parts[2] == "current":
                    return self._get_current(parts[1])
                if parts[2] == "score":
                    return self._get_score(parts[1])
            return self._serve_static(path)
        except BrokenPipeError:  # client went away mid-write
            pass
        except Exception:
            logger.exception("unhandled error for GET %s", self.path)
            self._send_error_json(500, "internal error")

    def do_POST(self):
        path = self.path.split("?", 1)[0]
        parts = [p for p in path.split("/") if p]
        try:
            if parts == ["sessions"]:
                return self._post_session()
            if len(parts) == 3 and parts[0] == "sessions" and parts[2] == "response":
                return self._post_response(parts[1])
            self._send_error_json(404, f"no such endpoint {path}")
        except Exception:
            logger.exception("unhandled error for POST %s", self.path)
            self._send_error_json(500, "internal error")

    # -- endpoints ----------------------------------------------------------------

    def _get_datasets(self):
        payload = {
            "datasets": [
                {"condition": cond, "n_pairs": ds["n_pairs"], "patch": ds["patch"]}
                for cond, ds in sorted(self.service.datasets.items())
            ]
        }
        self._send_json(payload)

    def _get_image(self, condition: str, filename: str):
        if not filename.endswith(".png"):
            return self._send_error_json(404, "images are PNG only")
        body = self.service.image_bytes(condition, filename[:-4])
        if body is None:
            return self._send_error_json(404, f"no image {filename} in {condition!r}")
        self._send_bytes(body, "image/png")

    def _post_session(self):
        doc = self._read_json()
        if doc is None or "observer" not in doc or "condition" not in doc:
            return self._send_error_json(400, "expected JSON with observer and condition")
        try:
            session = self.service.create_session(
                observer=str(doc["observer"]),
                condition=str(doc["condition"]),
                seed=int(doc.get("seed", 0)),
                training=bool(doc.get("training", False)),
                n=int(doc["n"]) if "n" in doc else None,
                metadata=doc.get("metadata"),
            )
        except (ParameterError, DataError, ValueError) as exc:
            return self._send_error_json(400, str(exc))
        self._send_json(
            {
                "session_id": session.session_id,
                "total": session.total,
                "answered": session.answered,
                "training": session.training,
                "condition": session.condition,
            },
            status=201,
        )

    def _with_session(self, session_id: str):
        session = self.service.get_session(session_id)
        if session is None:
            self._send_error_json(404, f"no session {session_id!r}")
        return session

    def _get_current(self, session_id: str):
        session = self._with_session(session_id)
        if session is None:
            return
        with self.service.session_lock(session_id):
            if session.complete:
                return self._send_json(
                    {"complete": True, "index": session.answered, "total": session.total}
                )
            trial = session.current_trial()
            payload = _trial_payload(session, trial)
        payload["complete"] = False
        self._send_json(payload)

    def _post_response(self, session_id: str):
        session = self._with_session(session_id)
        if session is None:
            return
        doc = self._read_json()
        if doc is None or "chosen_side" not in doc:
            return self._send_error_json(400, "expected JSON with chosen_side")
        with self.service.session_lock(session_id):
            try:
                response = record_response(
                    session,
                    str(doc["chosen_side"]),
                    store=self.service.store,
                    trial_id=doc.get("trial_id"),
                    latency_ms=float(doc.get("latency_ms", 0.0)),
                    timestamp=time.time(),
                )
            except ParameterError as exc:
                return self._send_error_json(400, str(exc))
            except SessionStateError as exc:
                return self._send_error_json(409, str(exc))
            payload = {"accepted": True, "next_exists": not session.complete}
            if session.training:
                payload["correct"] = response.correct
        self._send_json(payload)

    def _get_score(self, session_id: str):
        session = self._with_session(session_id)
        if session is None:
            return
        with self.service.session_lock(session_id):
            try:
                score = score_session(session)
            except SessionStateError as exc:
                return self._send_error_json(409, str(exc))
            payload = {
                "session_id": session.session_id,
                "observer": session.observer,
                "condition": session.condition,
                "percent_correct": score.percent_correct,
                "n_trials": score.n_trials,
                "n_correct": score.n_correct,
                "complete": session.complete,
            }
        self._send_json(payload)

    # -- static UI ---------------------------------------------------------------

    _CONTENT_TYPES = {
        ".html": "text/html; charset=utf-8",
        ".js": "text/javascript; charset=utf-8",
        ".css": "text/css; charset=utf-8",
        ".map": "application/json",
        ".svg": "image/svg+xml",
    }

    def _serve_static(self, path: str):
        if self.service.ui_dir is None:
            return self._send_error_json(404, f"no such endpoint {path}")
        rel = path.lstrip("/") or "index.html"
        full = os.path.realpath(os.path.join(self.service.ui_dir, rel))
        root = os.path.realpath(self.service.ui_dir)
        if not full.startswith(root + os.sep) and full != root:
            return self._send_error_json(404, "not found")
        if os.path.isdir(full):
            full = os.path.join(full, "index.html")
        if not os.path.exists(full):
            return self._send_error_json(404, f"no static file {rel}")
        ext = os.path.splitext(full)[1]
        with open(full, "rb") as fh:
            body = fh.read()
        self._send_bytes(body, self._CONTENT_TYPES.get(ext, "application/octet-stream"))


def make_server(service: StudyService, host: str = "127.0.0.1",
                port: int = 0) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (StudyRequestHandler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(data_root, host: str, port: int, ui_dir=None):
    service = StudyService(data_root, ui_dir=ui_dir)
    server = make_server(service, host, port)
    actual = server.server_address
    logger.info("observer-study service listening on http://%s:%d", actual[0], actual[1])
    print(f"serving on http://{actual[0]}:{actual[1]}", flush=True)
    try:
        server.serve_forever()
    finally:
        server.server_close()
