"""Live session service.

One stepping thread owns the world and runs it at the scenario tick rate while
in run mode; WebSocket clients receive full-state snapshots and submit commands
through a FIFO queue drained at tick boundaries, so observation never perturbs
the run. Every session can record its trace and timed command script, which the
CLI `replay` mode reproduces byte-for-byte.

Protocol (JSON text frames, one message per frame):
  client -> server: operator_input {dx, dy, dtheta}, configure {command, agent?,
    value?}, set_target {point}, push_waypoint {point}, run, pause_sim,
    step_n {n}, reset. An optional "id" is echoed in the ack/error.
  server -> client: hello, scene (once per world epoch), snapshot (strictly
    increasing ticks), ack {command, tick, id?}, error {message, id?}.
"""

from __future__ import annotations

import asyncio
import json
import logging
import queue
import threading
import time
from collections import deque
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Callable, Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .blackboard import (
    IN_PROGRESS,
    CommandError,
    configure,
    next_fire_tick,
    step,
)
from .manikin import eye_center
from .scenario_io import Scenario, build_world, format_trace_line, trace_record

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1

_COMMAND_TYPES = {"operator_input", "configure", "set_target", "push_waypoint"}


def _snapshot_message(world) -> dict:
    m = world.metrics
    eye = eye_center(world.pose, world.joints, world.body)
    return {
        "type": "snapshot",
        "tick": world.tick,
        "pose": {"x": world.pose.x, "y": world.pose.y, "heading": world.pose.heading},
        "joints": {
            "pitch": world.joints.pitch,
            "bend": world.joints.bend,
            "yaw": world.joints.yaw,
        },
        "cone_half_angle": world.cone.half_angle,
        "collision_length": m.collision_length,
        "cone_collision_length": m.cone_collision_length,
        "occluded": m.occluded,
        "comfort": m.comfort,
        "status": world.status,
        "eye": [float(v) for v in eye],
        "target_stack": [[float(v) for v in t] for t in world.target_stack],
        "delta_pos": world.normalization.delta_pos,
        "delta_or": world.normalization.delta_or,
        "agents": [
            {
                "name": a.name,
                "rate": a.rate,
                "active": a.active,
                "gain": a.gain,
                "fires": a.fires,
                "last": _last_contribution(world, a.name),
            }
            for a in world.agents
        ],
    }


def _last_contribution(world, name: str) -> Optional[dict]:
    c = world.last_contributions.get(name)
    if c is None:
        return None
    return {
        "dx": c.dx,
        "dy": c.dy,
        "dheading": c.dheading,
        "dpitch": c.dpitch,
        "dhead_yaw": c.dhead_yaw,
        "dcone": c.dcone,
    }


def _scene_message(world, scenario: Scenario) -> dict:
    def mesh_dict(posed):
        return {
            "vertices": posed.mesh.vertices.tolist(),
            "triangles": posed.mesh.triangles.tolist(),
            "pose": {
                "x": posed.pose.x,
                "y": posed.pose.y,
                "z": posed.pose.z,
                "yaw": posed.pose.yaw,
            },
        }

    return {
        "type": "scene",
        "protocol": PROTOCOL_VERSION,
        "obstacles": [
            dict(mesh_dict(posed), name=spec.name)
            for posed, spec in zip(world.obstacles, scenario.obstacles)
        ],
        "members": {
            "trunk": {
                "vertices": world.body.trunk_mesh.vertices.tolist(),
                "triangles": world.body.trunk_mesh.triangles.tolist(),
            },
            "head": {
                "vertices": world.body.head_mesh.vertices.tolist(),
                "triangles": world.body.head_mesh.triangles.tolist(),
            },
        },
        "body": {
            "neck_height": world.body.neck_height,
            "eye_forward": world.body.eye_forward,
            "eye_up": world.body.eye_up,
        },
        "tolerances": {"pos": world.tolerances.pos, "ang": world.tolerances.ang},
        "cone": {
            "min_half_angle": world.cone.min_half_angle,
            "max_half_angle": world.cone.max_half_angle,
            "facets": world.cone.facets,
        },
        "tick_rate_hz": scenario.tick_rate_hz,
    }


class Session:
    """Owns the world and its stepping loop; everything else just queues in."""

    def __init__(
        self,
        scenario: Scenario,
        record_dir: Optional[Path] = None,
        broadcast_divisor: int = 1,
        idle_sleep: float = 0.002,
    ):
        self.scenario = scenario
        self.world = build_world(scenario)
        self.tick_period = 1.0 / scenario.tick_rate_hz
        self.divisor = max(1, int(broadcast_divisor))
        self.idle_sleep = idle_sleep
        self._commands: "queue.Queue[tuple[dict, Callable[[dict], None]]]" = queue.Queue()
        self._subscribers: dict[int, Callable[[dict], None]] = {}
        self._subscribers_lock = threading.Lock()
        self._next_subscriber = 0
        self._running_mode = False
        # queued step_n requests: [remaining, reply, id]; each gets its own ack
        self._step_requests: deque = deque()
        self._boundary_commands: list[dict] = []
        self._last_broadcast_tick = -1
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._loop, name="maniplan-session", daemon=True)
        self._record_dir = Path(record_dir) if record_dir else None
        self._trace_file = None
        self._script_file = None
        if self._record_dir is not None:
            self._open_recorders()

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=5.0)
        self._finalize_recorders()

    def _open_recorders(self) -> None:
        self._record_dir.mkdir(parents=True, exist_ok=True)
        self._trace_file = (self._record_dir / "trace.jsonl").open("w", encoding="utf-8")
        self._script_file = (self._record_dir / "commands.jsonl").open("w", encoding="utf-8")

    def _finalize_recorders(self) -> None:
        if self._script_file is not None:
            self._script_file.write(json.dumps({"tick": self.world.tick, "end": True}) + "\n")
            self._script_file.close()
            self._script_file = None
        if self._trace_file is not None:
            self._trace_file.close()
            self._trace_file = None

    # -- client plumbing (called from websocket tasks) ------------------------

    def subscribe(self, send: Callable[[dict], None]) -> int:
        """Register a client. The registration and handshake run on the
        stepping thread (queued like any command) so the initial snapshot is
        never read while a tick is being applied."""
        with self._subscribers_lock:
            sid = self._next_subscriber
            self._next_subscriber += 1
        self._commands.put(({"type": "_register", "sid": sid}, send))
        return sid

    def unsubscribe(self, sid: int) -> None:
        with self._subscribers_lock:
            self._subscribers.pop(sid, None)

    def submit(self, message: dict, reply: Callable[[dict], None]) -> None:
        self._commands.put((message, reply))

    # -- stepping loop --------------------------------------------------------

    def _broadcast(self, message: dict) -> None:
        with self._subscribers_lock:
            targets = list(self._subscribers.values())
        for send in targets:
            send(message)

    def _broadcast_snapshot(self, force: bool = False) -> None:
        tick = self.world.tick
        if tick <= self._last_broadcast_tick:
            return  # snapshots carry strictly increasing ticks
        if not force and tick % self.divisor != 0:
            return
        self._last_broadcast_tick = tick
        self._broadcast(_snapshot_message(self.world))

    def _ack(self, reply: Callable[[dict], None], message: dict, kind: str, tick: int) -> None:
        ack = {"type": "ack", "command": kind, "tick": tick}
        if message.get("id") is not None:
            ack["id"] = message["id"]
        reply(ack)

    def _error(self, reply: Callable[[dict], None], message: dict, text: str) -> None:
        err = {"type": "error", "message": text}
        if isinstance(message, dict) and message.get("id") is not None:
            err["id"] = message["id"]
        reply(err)

    def _drain_commands(self) -> None:
        while True:
            try:
                message, reply = self._commands.get_nowait()
            except queue.Empty:
                return
            try:
                self._apply_command(message, reply)
            except CommandError as exc:
                self._error(reply, message, str(exc))
            except Exception as exc:  # keep the session alive on bad frames
                log.exception("command failed")
                self._error(reply, message, f"internal error: {exc}")

    def _apply_command(self, message: dict, reply: Callable[[dict], None]) -> None:
        kind = message.get("type")
        world = self.world
        if kind == "_register":
            with self._subscribers_lock:
                self._subscribers[message["sid"]] = reply
            reply({"type": "hello", "protocol": PROTOCOL_VERSION})
            reply(_scene_message(world, self.scenario))
            reply(_snapshot_message(world))
        elif kind == "run":
            self._running_mode = True
            self._ack(reply, message, kind, world.tick)
        elif kind == "pause_sim":
            self._running_mode = False
            self._ack(reply, message, kind, world.tick)
            self._broadcast_snapshot(force=True)
        elif kind == "step_n":
            if self._running_mode:
                raise CommandError("step_n requires the session to be paused")
            n = message.get("n")
            if not isinstance(n, int) or isinstance(n, bool) or n < 1:
                raise CommandError("step_n: n must be an integer >= 1")
            self._step_requests.append([n, reply, message.get("id")])
        elif kind == "reset":
            self.world = build_world(self.scenario)
            self._running_mode = False
            self._step_requests.clear()
            self._boundary_commands = []
            self._last_broadcast_tick = -1
            if self._record_dir is not None:
                self._finalize_recorders()
                self._open_recorders()
            self._ack(reply, message, kind, self.world.tick)
            self._broadcast(_scene_message(self.world, self.scenario))
            self._broadcast_snapshot(force=True)
        elif kind in _COMMAND_TYPES:
            command = self._to_blackboard_command(message)
            configure(world, command)
            self._boundary_commands.append(command)
            if self._script_file is not None:
                self._script_file.write(json.dumps({"tick": world.tick, **command}) + "\n")
                self._script_file.flush()
            if kind == "operator_input":
                ack_tick = next_fire_tick(world.agent("operator"), world.tick)
            else:
                ack_tick = world.tick
            # configure acks echo the inner command so clients can match them
            ack_name = command["command"] if kind == "configure" else kind
            self._ack(reply, message, ack_name, ack_tick)
        else:
            raise CommandError(f"unknown message type {kind!r}")

    @staticmethod
    def _to_blackboard_command(message: dict) -> dict:
        kind = message["type"]
        if kind == "operator_input":
            return {
                "command": "operator_input",
                "dx": message.get("dx"),
                "dy": message.get("dy"),
                "dtheta": message.get("dtheta"),
            }
        if kind == "set_target":
            return {"command": "set_target", "point": message.get("point")}
        if kind == "push_waypoint":
            return {"command": "push_intermediate_target", "point": message.get("point")}
        # configure: {command, agent?, value?}
        command = {"command": message.get("command")}
        if message.get("agent") is not None:
            command["agent"] = message["agent"]
        if message.get("value") is not None:
            command["value"] = message["value"]
        return command

    def _execute_tick(self) -> bool:
        """Step once. On a reached world the step is a no-op: the tick does not
        advance, nothing is traced or broadcast, and pending boundary commands
        stay attached to the next advancing tick (a retarget revives the run)."""
        before = self.world.tick
        step(self.world)
        if self.world.tick == before:
            return False
        commands = self._boundary_commands
        self._boundary_commands = []
        if self._trace_file is not None:
            self._trace_file.write(format_trace_line(trace_record(self.world, commands)) + "\n")
            self._trace_file.flush()
        return True

    def _loop(self) -> None:
        deadline = time.monotonic()
        while not self._stop.is_set():
            self._drain_commands()
            if self._step_requests:
                self._execute_tick()
                request = self._step_requests[0]
                request[0] -= 1
                if request[0] == 0:
                    self._step_requests.popleft()
                    ack = {"type": "ack", "command": "step_n", "tick": self.world.tick}
                    if request[2] is not None:
                        ack["id"] = request[2]
                    request[1](ack)
                    self._broadcast_snapshot(force=True)
                else:
                    self._broadcast_snapshot()
                deadline = time.monotonic()
            elif self._running_mode and self.world.status == IN_PROGRESS:
                self._execute_tick()
                self._broadcast_snapshot()
                deadline += self.tick_period
                sleep_for = deadline - time.monotonic()
                if sleep_for > 0:
                    time.sleep(sleep_for)
                else:
                    deadline = time.monotonic()  # fell behind; don't spiral
            else:
                time.sleep(self.idle_sleep)
                deadline = time.monotonic()


def create_app(
    scenario: Scenario,
    record_dir: Optional[Path] = None,
    broadcast_divisor: int = 1,
    ui_dir: Optional[Path] = None,
) -> FastAPI:
    """FastAPI app exposing /ws plus (optionally) the static operator console."""
    session = Session(scenario, record_dir=record_dir, broadcast_divisor=broadcast_divisor)

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        session.start()
        yield
        session.stop()

    app = FastAPI(lifespan=lifespan)
    app.state.session = session

    @app.websocket("/ws")
    async def websocket_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        loop = asyncio.get_running_loop()
        outbox: asyncio.Queue = asyncio.Queue()

        def send(message: dict) -> None:
            loop.call_soon_threadsafe(outbox.put_nowait, message)

        sid = session.subscribe(send)

        async def writer() -> None:
            while True:
                message = await outbox.get()
                await ws.send_text(json.dumps(message))

        async def reader() -> None:
            while True:
                text = await ws.receive_text()
                try:
                    message = json.loads(text)
                    if not isinstance(message, dict):
                        raise ValueError("frame must be a JSON object")
                except ValueError as exc:
                    send({"type": "error", "message": f"malformed frame: {exc}"})
                    continue
                session.submit(message, send)

        tasks = [asyncio.ensure_future(reader()), asyncio.ensure_future(writer())]
        try:
            done, pending = await asyncio.wait(tasks, return_when=asyncio.FIRST_COMPLETED)
            for task in pending:
                task.cancel()
            for task in done:
                exc = task.exception()
                if exc is not None and not isinstance(exc, WebSocketDisconnect):
                    raise exc
        except WebSocketDisconnect:
            pass
        finally:
            for task in tasks:
                task.cancel()
            session.unsubscribe(sid)

    if ui_dir is not None:
        from fastapi.responses import FileResponse
        from fastapi.staticfiles import StaticFiles

        index_path = Path(ui_dir) / "index.html"

        @app.get("/")
        def index() -> FileResponse:
            return FileResponse(index_path)

        app.mount("/dist", StaticFiles(directory=Path(ui_dir) / "dist"), name="ui-dist")

    return app


def serve(
    scenario: Scenario,
    host: str = "127.0.0.1",
    port: int = 8750,
    record_dir: Optional[Path] = None,
    ui_dir: Optional[Path] = None,
    broadcast_divisor: int = 1,
) -> None:
    import uvicorn

    app = create_app(
        scenario,
        record_dir=record_dir,
        ui_dir=ui_dir,
        broadcast_divisor=broadcast_divisor,
    )
    log.info("serving on ws://%s:%d/ws", host, port)
    uvicorn.run(app, host=host, port=port, log_level="info")
