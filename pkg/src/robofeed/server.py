"""HTTP/WebSocket service around the simulation.

One background thread owns the world and is the only place it mutates.
Request handlers enqueue signals and jogs onto the runner's command queue
and read published snapshots, so the API can never race the tick loop.
Wall-clock pacing follows simulated time scaled by a speed factor; the
state sequence is the same one a headless run with the same signal arrival
ticks would produce.
"""

from __future__ import annotations

import asyncio
import collections
import math
import queue
import socket
import threading
import time

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from .kinematics import JOINT_LIMITS_DEG
from .scenario import VALID_SIGNALS, Scenario
from .sim import World, jog_joint, make_world, queue_signal, snapshot, tick
from .supervisor import FeedingState

SNAPSHOT_RING = 4096
WS_PERIOD = 0.05  # seconds between pushes: at most 20 Hz


class ServerError(Exception):
    pass


class BindError(ServerError):
    """The requested port is not free."""


class SimRunner:
    """Background simulation thread plus the thread-safe views of it."""

    def __init__(self, scenario: Scenario, speed: float = 1.0):
        if speed <= 0.0:
            raise ValueError("speed must be positive")
        self.scenario = scenario
        self.speed = speed
        self.world: World = make_world(scenario)
        self._commands: queue.Queue = queue.Queue()
        self._lock = threading.Lock()
        self._latest = snapshot(self.world)
        self._seq = 0
        self._ring = collections.deque(maxlen=SNAPSHOT_RING)
        self._trace_rows: list[dict] = []
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name="sim-tick", daemon=True)

    # -------------------------------------------------------------- control
    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread.is_alive():
            self._thread.join(timeout=5.0)

    # ------------------------------------------------------------- commands
    def submit_signal(self, u: str) -> None:
        if u not in VALID_SIGNALS:
            raise ValueError(f"unknown signal {u!r}")
        self._commands.put(("signal", u))

    def submit_jog(self, joint: int, delta_rad: float) -> None:
        if not (isinstance(joint, int) and 0 <= joint <= 3):
            raise ValueError("joint must be 0..3")
        if not (isinstance(delta_rad, (int, float)) and math.isfinite(delta_rad)):
            raise ValueError("delta_rad must be a finite number")
        self._commands.put(("jog", joint, float(delta_rad)))

    # ---------------------------------------------------------------- views
    def latest(self) -> tuple[dict, int]:
        with self._lock:
            return self._latest, self._seq

    def tail(self, n: int) -> list[dict]:
        with self._lock:
            items = list(self._ring)
        return items[-n:] if n > 0 else []

    def trace_since(self, index: int) -> tuple[list[dict], int]:
        with self._lock:
            rows = self._trace_rows[index:]
            return rows, len(self._trace_rows)

    # ----------------------------------------------------------------- loop
    def _drain_commands(self) -> None:
        while True:
            try:
                cmd = self._commands.get_nowait()
            except queue.Empty:
                return
            if cmd[0] == "signal":
                queue_signal(self.world, cmd[1])
            else:
                jog_joint(self.world, cmd[1], cmd[2])

    def _publish(self) -> None:
        snap = snapshot(self.world)
        with self._lock:
            self._latest = snap
            self._seq += 1
            self._ring.append(snap)
            for row in self.world.trace.rows[len(self._trace_rows):]:
                self._trace_rows.append(
                    {
                        "t": row.t,
                        "state": row.state.value,
                        "signal": row.signal.value,
                        "next": row.next.value,
                    }
                )

    def _run(self) -> None:
        dt = self.scenario.dt
        wall_start = time.monotonic()
        sim_start = self.world.t
        while not self._stop.is_set():
            self._drain_commands()
            tick(self.world)
            self._publish()
            target = wall_start + (self.world.t - sim_start) / self.speed
            lag = time.monotonic() - target
            if lag < 0.0:
                time.sleep(min(-lag, 0.05))
            elif lag > 1.0:
                # too far behind to catch up tick-by-tick; resync the clock
                wall_start = time.monotonic()
                sim_start = self.world.t


def create_app(runner: SimRunner) -> FastAPI:
    app = FastAPI(title="feeding-sim", docs_url=None, redoc_url=None)

    @app.get("/state")
    def get_state():
        snap, _ = runner.latest()
        return snap

    @app.get("/scenario")
    def get_scenario():
        servo = runner.world.servo
        plan = runner.world.plan
        return {
            "scenario": runner.scenario.to_dict(),
            "ui": {
                "radius_threshold": servo.radius_threshold,
                "stable_duration": servo.stable_duration,
                "signals": list(VALID_SIGNALS),
                "states": [s.value for s in FeedingState],
                "steps_per_rev": list(plan.steps_per_rev),
                "joint_limits_deg": [list(pair) for pair in JOINT_LIMITS_DEG],
                "image_size": [runner.world.camera.width, runner.world.camera.height],
                "dt": runner.scenario.dt,
                "speed": runner.speed,
            },
        }

    @app.post("/signal")
    def post_signal(body: dict):
        try:
            runner.submit_signal(body.get("u"))
        except ValueError as exc:
            return JSONResponse(status_code=422, content={"error": str(exc)})
        return {"queued": True, "u": body["u"]}

    @app.post("/jog")
    def post_jog(body: dict):
        try:
            runner.submit_jog(body.get("joint"), body.get("delta_rad"))
        except ValueError as exc:
            return JSONResponse(status_code=422, content={"error": str(exc)})
        return {"queued": True, "joint": body["joint"], "delta_rad": body["delta_rad"]}

    @app.get("/log/tail")
    def log_tail(n: int = 50):
        return {"snapshots": runner.tail(n)}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        seq_seen = -1
        trace_seen = 0
        recv_task = asyncio.create_task(ws.receive_json())
        try:
            while True:
                done, _ = await asyncio.wait({recv_task}, timeout=WS_PERIOD)
                if recv_task in done:
                    try:
                        body = recv_task.result()
                    except WebSocketDisconnect:
                        return
                    _apply_ws_command(runner, body)
                    recv_task = asyncio.create_task(ws.receive_json())
                rows, trace_seen = runner.trace_since(trace_seen)
                for row in rows:
                    await ws.send_json({"type": "trace", "data": row})
                snap, seq = runner.latest()
                if seq != seq_seen:
                    seq_seen = seq
                    await ws.send_json({"type": "state", "data": snap})
        except WebSocketDisconnect:
            pass
        finally:
            recv_task.cancel()

    return app


def _apply_ws_command(runner: SimRunner, body) -> None:
    if not isinstance(body, dict):
        return
    try:
        if "u" in body:
            runner.submit_signal(body["u"])
        elif "joint" in body:
            runner.submit_jog(body.get("joint"), body.get("delta_rad"))
    except ValueError:
        pass  # bad interactive input is dropped, never fatal


def serve(scenario: Scenario, port: int, speed: float = 1.0, host: str = "127.0.0.1") -> None:
    """Run the simulation service until interrupted."""
    import uvicorn

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        probe.bind((host, port))
    except OSError as exc:
        raise BindError(f"cannot bind {host}:{port}: {exc}") from exc
    finally:
        probe.close()

    runner = SimRunner(scenario, speed=speed)
    app = create_app(runner)
    runner.start()
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        runner.stop()
