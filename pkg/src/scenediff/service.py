"""Local HTTP service for the browser UI and scripts.

JSON endpoints:
  POST /api/sessions                     {"seed": int} or {"interaction": record}
  GET  /api/sessions/{id}                full scene
  POST /api/sessions/{id}/synthesize     {"prompt": str, "seed": int?}
  POST /api/sessions/{id}/edit           {"op", "prompt", "target_id", "seed": int?}
  GET  /api/health

One in-process model is shared read-only across handler threads; each session
serializes mutations through a non-blocking lock (a concurrent mutation gets
409).  Point arrays travel as flat row-major float lists.  Responses are
deterministic given (session state, prompt, seed); the seed is echoed back.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from . import metrics as mx
from . import synthdata as sd
from .autodiff import checkpoint_hash
from .diffusion import make_schedule, p_sample_loop
from .editing import EDIT_OPS, EditError, EditRequest, edit
from .gpnet import GuidingPointsModel
from .training import PreparedSample


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass
class SceneSession:
    session_id: str
    interaction: sd.Interaction
    history: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def scene_payload(self) -> dict:
        return {"session_id": self.session_id,
                "scene": self.interaction.to_record(),
                "history": self.history}


def _flat(points) -> list:
    return [float(v) for v in np.asarray(points).reshape(-1)]


class SceneService:
    """Session store + model operations behind the HTTP handler."""

    def __init__(self, model: GuidingPointsModel, checkpoint_dir=None,
                 gen_config: sd.GenConfig | None = None):
        self.model = model
        self.gen_config = gen_config or sd.GenConfig(n_points=model.hp.n_points)
        self.schedule = make_schedule(model.hp.schedule, model.hp.t_steps)
        self.sessions: dict[str, SceneSession] = {}
        self._mutex = threading.Lock()
        self._counter = 0
        self.checkpoint = checkpoint_hash(checkpoint_dir) if checkpoint_dir else "unsaved"
        self._seed_rng = np.random.default_rng()

    # ------------------------------------------------------------- sessions

    def create_session(self, body: dict) -> dict:
        if "interaction" in body:
            try:
                itx = sd.Interaction.from_record(body["interaction"])
            except (KeyError, TypeError, ValueError) as e:
                raise ApiError(400, f"interaction: malformed record: {e}")
            if len(itx.entities[0].points) != self.model.hp.n_points:
                raise ApiError(400, "interaction: clouds must have "
                               f"{self.model.hp.n_points} points")
        elif "seed" in body:
            if not isinstance(body["seed"], int):
                raise ApiError(400, "seed: must be an integer")
            try:
                itx = sd.gen_interaction(body["seed"], self.gen_config)
            except sd.DatasetError as e:
                raise ApiError(500, f"scene generation failed: {e}")
        else:
            raise ApiError(400, "body must carry either 'seed' or 'interaction'")
        with self._mutex:
            self._counter += 1
            sid = f"s{self._counter:06d}"
            self.sessions[sid] = SceneSession(sid, itx)
        return {"session_id": sid}

    def _session(self, sid: str) -> SceneSession:
        try:
            return self.sessions[sid]
        except KeyError:
            raise ApiError(404, f"unknown session {sid!r}")

    def get_session(self, sid: str) -> dict:
        return self._session(sid).scene_payload()

    # ------------------------------------------------------------ operations

    def _seed_of(self, body: dict) -> int:
        seed = body.get("seed")
        if seed is None:
            return int(self._seed_rng.integers(0, 2 ** 31))
        if not isinstance(seed, int):
            raise ApiError(400, "seed: must be an integer")
        return seed

    def _result_payload(self, s: PreparedSample, points_world, prompt, seed,
                        op) -> dict:
        gp = self.model.guiding_points(s.entities, prompt)
        payload = {
            "points": _flat(points_world),
            "guiding_points": _flat(mx.from_frame(gp.S_tilde, s.center, s.scale))
            if gp is not None else [],
            "attention_weights": [float(v) for v in gp.w] if gp is not None else [],
            "entity_labels": [e.label for e in s.interaction.entities],
            "seed": seed,
            "op": op,
        }
        return payload

    def synthesize(self, sid: str, body: dict) -> dict:
        session = self._session(sid)
        prompt = body.get("prompt")
        if not prompt or not isinstance(prompt, str):
            raise ApiError(400, "prompt: required string")
        seed = self._seed_of(body)
        if not session.lock.acquire(blocking=False):
            raise ApiError(409, "session busy: one mutation at a time")
        try:
            itx = session.interaction
            s = PreparedSample.from_interaction(itx)
            den = self.model.denoiser(s.entities, prompt)
            try:
                out_norm = p_sample_loop(den, None, self.schedule,
                                         self.model.hp.n_points, seed=(seed, 77))
            except Exception as e:
                raise ApiError(500, f"generation failed: {e}")
            out_world = mx.from_frame(out_norm, s.center, s.scale)
            session.interaction = sd.Interaction(
                itx.id, prompt, itx.entities,
                sd.Entity(itx.target.kind, itx.target.label, out_world,
                          itx.target.solid),
                {**itx.meta, "last_prompt": prompt})
            payload = self._result_payload(s, out_world, prompt, seed, "synthesize")
            session.history.append({"op": "synthesize", "prompt": prompt,
                                    "seed": seed})
            return payload
        finally:
            session.lock.release()

    def edit_session(self, sid: str, body: dict) -> dict:
        session = self._session(sid)
        op = body.get("op")
        prompt = body.get("prompt")
        target_id = body.get("target_id")
        if op not in EDIT_OPS:
            raise ApiError(400, f"op: must be one of {', '.join(EDIT_OPS)}")
        if not prompt or not isinstance(prompt, str):
            raise ApiError(400, "prompt: required string")
        if not target_id or not isinstance(target_id, str):
            raise ApiError(400, "target_id: required string")
        seed = self._seed_of(body)
        if not session.lock.acquire(blocking=False):
            raise ApiError(409, "session busy: one mutation at a time")
        try:
            itx = session.interaction
            try:
                request = EditRequest(itx.id, op, prompt, target_id)
                result = edit(itx, request, self.model, seed=seed)
            except EditError as e:
                raise ApiError(400, str(e))
            except Exception as e:
                raise ApiError(500, f"edit failed: {e}")
            s = PreparedSample.from_interaction(itx)
            session.interaction = sd.Interaction(
                itx.id, prompt, itx.entities,
                sd.Entity(itx.target.kind, itx.target.label, result.points,
                          itx.target.solid),
                {**itx.meta, "last_prompt": prompt, "last_op": op})
            payload = self._result_payload(s, result.points, prompt, seed, op)
            if result.fixed_mask is not None:
                payload["fixed_indices"] = [int(i) for i in
                                            np.flatnonzero(result.fixed_mask)]
            session.history.append({"op": op, "prompt": prompt,
                                    "target_id": target_id, "seed": seed})
            return payload
        finally:
            session.lock.release()

    def health(self) -> dict:
        return {"status": "ok", "checkpoint": self.checkpoint,
                "n_points": self.model.hp.n_points,
                "sessions": len(self.sessions)}


_CONTENT_TYPES = {".html": "text/html", ".js": "text/javascript",
                  ".css": "text/css", ".map": "application/json",
                  ".ico": "image/x-icon"}


def make_handler(service: SceneService, frontend_dir=None):
    frontend = Path(frontend_dir) if frontend_dir else None

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):
            pass

        def _send(self, status: int, payload: dict):
            body = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.end_headers()
            self.wfile.write(body)

        def _body(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b"{}"
            try:
                parsed = json.loads(raw.decode() or "{}")
            except json.JSONDecodeError as e:
                raise ApiError(400, f"body: invalid JSON: {e}")
            if not isinstance(parsed, dict):
                raise ApiError(400, "body: must be a JSON object")
            return parsed

        def _route(self, method: str):
            parts = [p for p in self.path.split("?")[0].split("/") if p]
            try:
                if method == "GET" and parts == ["api", "health"]:
                    return self._send(200, service.health())
                if parts[:1] == ["api"] and len(parts) >= 2 and parts[1] == "sessions":
                    if method == "POST" and len(parts) == 2:
                        return self._send(200, service.create_session(self._body()))
                    if method == "GET" and len(parts) == 3:
                        return self._send(200, service.get_session(parts[2]))
                    if method == "POST" and len(parts) == 4 and parts[3] == "synthesize":
                        return self._send(200, service.synthesize(parts[2], self._body()))
                    if method == "POST" and len(parts) == 4 and parts[3] == "edit":
                        return self._send(200, service.edit_session(parts[2], self._body()))
                if method == "GET" and frontend is not None:
                    return self._static(parts)
                raise ApiError(404, f"no route for {method} {self.path}")
            except ApiError as e:
                self._send(e.status, {"error": e.message})

        def _static(self, parts):
            rel = "/".join(parts) or "index.html"
            target = (frontend / rel).resolve()
            if not str(target).startswith(str(frontend.resolve())) or not target.is_file():
                raise ApiError(404, f"no route for GET {self.path}")
            data = target.read_bytes()
            self.send_response(200)
            ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            self._route("GET")

        def do_POST(self):
            self._route("POST")

        def do_OPTIONS(self):
            self._send(204, {})

    return Handler


def make_server(service: SceneService, host: str = "127.0.0.1", port: int = 8787,
                frontend_dir=None) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), make_handler(service, frontend_dir))
