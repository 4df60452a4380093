"""Sandbox session server.

One WebSocket connection holds one session. The pose stream is evaluated
inline (it must stay fast); landscape slices are computed in a worker thread
and sent when ready, so a slow slice never stalls pose replies. Kernel
parameters are baked into the precomputed spectra and cannot change live;
only the mode budget, drive mode, and damping can.
"""

import asyncio
import base64
import collections
import json
import statistics
import uuid
from dataclasses import dataclass, field

import numpy as np

from .energy import Configuration, PartAsset, evaluate, score_field
from .scenes import SCENES, get_scene

PROTOCOL_VERSION = 1
DEFAULT_GRID_N = 256
DEFAULT_MODES = 64 * 64
FRAME_DT = 1.0 / 60.0
MAX_SLICE = 256

_ASSET_CACHE: dict = {}


def scene_assets(name, n=DEFAULT_GRID_N):
    """Build (and cache) the asset pair for a built-in scene."""
    key = (name, n)
    if key not in _ASSET_CACHE:
        scene = get_scene(name)
        _ASSET_CACHE[key] = (scene, *scene.build_assets(n=n))
    return _ASSET_CACHE[key]


def scene_descriptor(name, n=DEFAULT_GRID_N):
    scene = get_scene(name)
    g = scene.grid(n)
    lo, hi = g.box()
    desc = {
        "name": name,
        "dimension": scene.dimension,
        "domain": scene.domain,
        "grid_n": n,
        "spacing": g.spacing,
        "box": [list(lo), list(hi)],
        "snap": scene.snap_translation.tolist(),
        "sigma": scene.kernel.sigma,
        "lambda_in": scene.kernel.lambda_in,
        "lambda_out": scene.kernel.lambda_out,
    }
    if scene.dimension == 2:
        desc["outlines"] = {
            "fixed": [loop.tolist() for loop in scene.fixed.polygon.loops],
            "moving": [loop.tolist() for loop in scene.moving.polygon.loops],
        }
        desc["initial"] = {"theta": 0.0, "x": 1.5, "y": 1.2}
    return desc


@dataclass
class Session:
    id: str
    scene_name: str
    fixed: PartAsset
    moving: PartAsset
    spacing: float
    theta: float = 0.0
    xy: np.ndarray = field(default_factory=lambda: np.array([1.5, 1.2]))
    modes: int = DEFAULT_MODES
    mode: str = "direct"
    damping: float = 1.0
    stats: collections.deque = field(default_factory=lambda: collections.deque(maxlen=2048))

    def config(self):
        return Configuration.from_angle(self.theta, self.xy)

    def eval_current(self):
        ev = evaluate(self.fixed, self.moving, self.config(), m_prime=self.modes)
        self.stats.append(ev.eval_time_us)
        return ev

    def eval_reply(self, ev):
        return {
            "t": "eval",
            "score_re": ev.score.real,
            "score_im": ev.score.imag,
            "energy": ev.energy,
            "fx": float(ev.force[0]),
            "fy": float(ev.force[1]),
            "torque": float(ev.torque[0]),
            "us": ev.eval_time_us,
            "modes": ev.modes_used,
            "theta": self.theta,
            "x": float(self.xy[0]),
            "y": float(self.xy[1]),
            "mode": self.mode,
        }

    def step_damped(self, ev):
        """First-order descent: dx = (F / c) dt, clamped to half a cell.

        A fixed-gain explicit step overshoots near the well and limit-cycles
        between two poses; halving the step until the energy actually drops
        makes the release settle. At most 4 extra evals, so a backtracking
        frame still costs well under the display budget.
        """
        step = (ev.force / self.damping) * FRAME_DT
        norm = float(np.linalg.norm(step))
        limit = 0.5 * self.spacing
        if norm > limit:
            step = step * (limit / norm)
        for _ in range(4):
            trial = self.xy + step
            cfg = Configuration.from_angle(self.theta, trial)
            if evaluate(self.fixed, self.moving, cfg,
                        m_prime=self.modes).energy <= ev.energy:
                self.xy = trial
                return
            step = 0.5 * step
        # every trial climbed: hold the pose rather than jitter on a ridge

    def validate_modes(self, m):
        side = round(m ** 0.5)
        if side * side != m or side % 2 or side < 2:
            raise ValueError(f"modes must be an even square, got {m}")
        if m > self.fixed.max_modes():
            raise ValueError(
                f"modes {m} exceeds the stored window {self.fixed.max_modes()}"
            )

    def stats_reply(self):
        times = sorted(self.stats)

        def pct(p):
            return times[min(len(times) - 1, int(p * len(times)))] if times else 0.0

        return {
            "t": "stats",
            "frames": len(times),
            "p50_us": statistics.median(times) if times else 0.0,
            "p95_us": pct(0.95),
            "p99_us": pct(0.99),
            "modes": self.modes,
            "mode": self.mode,
            "damping": self.damping,
        }


def _compute_slice(session, theta, w, h, modes):
    """Re-score slab over on-grid translations; NaN marks wrap-dirty cells."""
    g = session.fixed.grid
    R = Configuration.from_angle(theta, np.zeros(2)).rotation
    land = score_field(session.fixed, session.moving, R, m_prime=modes)
    re = np.real(land.values).reshape(g.dims)
    re = np.where(land.wrap_mask, np.nan, re).astype(np.float32)
    w = max(1, min(int(w), MAX_SLICE))
    h = max(1, min(int(h), MAX_SLICE))
    sx = max(1, g.dims[0] // w)
    sy = max(1, g.dims[1] // h)
    sub = re[::sx, ::sy]
    lo, _ = g.box()
    return {
        "t": "field_slice",
        "theta": theta,
        "w": int(sub.shape[0]),
        "h": int(sub.shape[1]),
        "x0": float(lo[0]),
        "y0": float(lo[1]),
        "dx": g.spacing * sx,
        "dy": g.spacing * sy,
        "modes": modes or g.node_count,
        "full_mask": bool(np.all(np.isnan(sub))),
        "data_b64": base64.b64encode(np.ascontiguousarray(sub).tobytes()).decode(),
    }


def _error(msg):
    return {"t": "error", "error": msg}


def _handle_message(session, msg):
    """Synchronous part of the protocol; returns (reply, session)."""
    t = msg.get("t")
    if t == "hello":
        if msg.get("v") != PROTOCOL_VERSION:
            return _error(
                f"incompatible protocol version {msg.get('v')}; "
                f"server speaks {PROTOCOL_VERSION}"
            ), session
        return {"t": "hello", "v": PROTOCOL_VERSION, "scenes": sorted(SCENES)}, session

    if t == "load_scene":
        name = msg.get("scene")
        if name not in SCENES:
            return _error(f"unknown scene {name!r}"), session
        # gate on dimension before building: a 3D scene at the interactive
        # grid resolution would be a 256^3 build triggered over the wire
        if get_scene(name).dimension != 2:
            return _error("interactive sessions are 2D; use the CLI for 3D assets"), session
        scene, fixed, moving = scene_assets(name)
        desc = scene_descriptor(name)
        session = Session(
            id=uuid.uuid4().hex,
            scene_name=name,
            fixed=fixed,
            moving=moving,
            spacing=fixed.grid.spacing,
            theta=desc["initial"]["theta"],
            xy=np.array([desc["initial"]["x"], desc["initial"]["y"]]),
        )
        reply = session.eval_reply(session.eval_current())
        reply["session"] = session.id
        reply["scene"] = desc
        return reply, session

    if session is None:
        return _error("no scene loaded"), session

    if t == "pose":
        if "theta" in msg:
            session.theta = float(msg["theta"]) % (2.0 * np.pi)
        if "x" in msg:
            session.xy = np.array([float(msg["x"]), float(msg["y"])])
        ev = session.eval_current()
        if session.mode == "damped" and "x" not in msg:
            session.step_damped(ev)
        return session.eval_reply(ev), session

    if t == "set_params":
        if any(k in msg for k in ("sigma", "lambda", "lambda_in", "lambda_out", "penalty")):
            return _error(
                "sigma and lambda are baked into the precomputed spectra; "
                "rerun precompute to change them"
            ), session
        try:
            if "modes" in msg:
                session.validate_modes(int(msg["modes"]))
                session.modes = int(msg["modes"])
            if "mode" in msg:
                if msg["mode"] not in ("direct", "damped"):
                    raise ValueError(f"unknown mode {msg['mode']!r}")
                session.mode = msg["mode"]
            if "damping" in msg:
                c = float(msg["damping"])
                if not c > 0:
                    raise ValueError("damping must be positive")
                session.damping = c
        except ValueError as exc:
            return _error(str(exc)), session
        return {"t": "set_params", "modes": session.modes, "mode": session.mode,
                "damping": session.damping}, session

    if t == "stats":
        return session.stats_reply(), session

    if t == "field_slice":
        return None, session  # handled async by the caller

    return _error(f"unknown message type {t!r}"), session


def create_app():
    from fastapi import FastAPI, WebSocket, WebSocketDisconnect

    app = FastAPI(title="geofield sandbox")

    @app.get("/scenes")
    def scenes():
        return [scene_descriptor(name) for name in sorted(SCENES)]

    @app.websocket("/ws")
    async def ws(socket: WebSocket):
        await socket.accept()
        session = None
        send_lock = asyncio.Lock()
        pending = set()

        async def send(obj):
            async with send_lock:
                await socket.send_json(obj)

        try:
            while True:
                raw = await socket.receive_text()
                try:
                    msg = json.loads(raw)
                except ValueError:
                    await send(_error("malformed JSON frame"))
                    continue
                if not isinstance(msg, dict):
                    await send(_error("messages are JSON objects"))
                    continue
                if msg.get("t") == "field_slice":
                    if session is None:
                        await send(_error("no scene loaded"))
                        continue
                    modes = msg.get("modes", session.modes)

                    async def run_slice(s=session, m=msg, mp=modes):
                        try:
                            reply = await asyncio.to_thread(
                                _compute_slice, s, float(m.get("theta", 0.0)),
                                m.get("w", MAX_SLICE), m.get("h", MAX_SLICE), mp,
                            )
                        except (ValueError, TypeError) as exc:
                            reply = _error(f"field_slice failed: {exc}")
                        await send(reply)

                    task = asyncio.create_task(run_slice())
                    pending.add(task)
                    task.add_done_callback(pending.discard)
                    continue
                reply, session = _handle_message(session, msg)
                if reply is not None:
                    await send(reply)
        except WebSocketDisconnect:
            pass
        finally:
            for task in pending:
                task.cancel()

    _mount_ui(app)
    return app


def _mount_ui(app):
    import os

    from fastapi.staticfiles import StaticFiles

    ui_dir = os.path.join(os.path.dirname(__file__), "ui")
    if os.path.isdir(ui_dir) and os.listdir(ui_dir):
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
