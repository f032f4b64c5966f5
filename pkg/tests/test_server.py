"""HTTP and WebSocket API tests against an in-process runner."""

import socket
import time

import pytest
from fastapi.testclient import TestClient

from robofeed.scenario import Scenario
from robofeed.server import BindError, SimRunner, create_app, serve


def idle_scenario():
    # no scheduled signals: the machine sits in X0 until the API pokes it
    return Scenario(name="idle", nose_world=(-0.4, 0.06, 0.35))


@pytest.fixture()
def api():
    runner = SimRunner(idle_scenario(), speed=200.0)
    client = TestClient(create_app(runner))
    runner.start()
    yield client, runner
    client.close()
    runner.stop()


def wait_for_state(client, pred, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        snap = client.get("/state").json()
        if pred(snap):
            return snap
        time.sleep(0.01)
    raise AssertionError("condition not reached before timeout")


def test_state_snapshot_shape(api):
    client, _ = api
    snap = client.get("/state").json()
    for key in ("t", "state", "q", "steps", "targets", "settled", "detection", "servo_error", "events"):
        assert key in snap
    assert snap["state"] == "X0"
    assert len(snap["q"]) == 4
    assert abs(snap["q"][1] - 0.8) < 0.01


def test_scenario_endpoint_reports_ui_constants(api):
    client, _ = api
    body = client.get("/scenario").json()
    assert body["scenario"]["name"] == "idle"
    ui = body["ui"]
    assert ui["radius_threshold"] == 20.0
    assert ui["stable_duration"] == 3.0
    assert ui["steps_per_rev"] == [4800, 4000, 4000, 2048]
    assert ui["image_size"] == [640, 480]
    assert len(ui["joint_limits_deg"]) == 4
    assert "u8" in ui["signals"]
    assert "X10" in ui["states"]


def test_signal_rejects_unknown(api):
    client, _ = api
    r = client.post("/signal", json={"u": "u99"})
    assert r.status_code == 422
    assert "error" in r.json()
    assert client.post("/signal", json={}).status_code == 422


def test_jog_rejects_bad_input(api):
    client, _ = api
    assert client.post("/jog", json={"joint": 7, "delta_rad": 0.1}).status_code == 422
    assert client.post("/jog", json={"joint": 0.5, "delta_rad": 0.1}).status_code == 422
    assert client.post("/jog", json={"joint": 0, "delta_rad": "fast"}).status_code == 422


def test_estop_round_trip(api):
    client, _ = api
    r = client.post("/signal", json={"u": "u8"})
    assert r.status_code == 200 and r.json()["queued"] is True
    wait_for_state(client, lambda s: s["state"] == "X8")
    client.post("/signal", json={"u": "u1"})
    wait_for_state(client, lambda s: s["state"] == "X0")


def test_jog_shifts_target_steps(api):
    client, _ = api
    before = client.get("/state").json()["targets"]
    r = client.post("/jog", json={"joint": 0, "delta_rad": 0.1})
    assert r.status_code == 200
    wait_for_state(client, lambda s: s["targets"][0] == before[0] + 76)


def test_jog_ignored_in_estop(api):
    client, _ = api
    client.post("/signal", json={"u": "u8"})
    wait_for_state(client, lambda s: s["state"] == "X8")
    before = client.get("/state").json()["targets"]
    client.post("/jog", json={"joint": 0, "delta_rad": 0.1})
    time.sleep(0.3)
    after = client.get("/state").json()["targets"]
    assert after == before


def test_log_tail_monotonic(api):
    client, _ = api
    time.sleep(0.2)
    snaps = client.get("/log/tail", params={"n": 5}).json()["snapshots"]
    assert 0 < len(snaps) <= 5
    ts = [s["t"] for s in snaps]
    assert all(a < b for a, b in zip(ts, ts[1:]))


def test_websocket_streams_state_and_applies_commands(api):
    client, _ = api
    with client.websocket_connect("/ws") as ws:
        ws.send_json({"u": "u8"})
        saw_state = False
        saw_row = False
        for _ in range(400):
            msg = ws.receive_json()
            if msg["type"] == "state":
                saw_state = True
            if msg["type"] == "trace" and msg["data"]["next"] == "X8":
                saw_row = True
                break
        assert saw_state and saw_row


def test_websocket_replays_trace_from_start(api):
    client, _ = api
    client.post("/signal", json={"u": "u8"})
    wait_for_state(client, lambda s: s["state"] == "X8")
    client.post("/signal", json={"u": "u1"})
    wait_for_state(client, lambda s: s["state"] == "X0")
    with client.websocket_connect("/ws") as ws:
        rows = []
        for _ in range(50):
            msg = ws.receive_json()
            if msg["type"] == "trace":
                rows.append(msg["data"])
            if len(rows) >= 2:
                break
        assert [r["next"] for r in rows[:2]] == ["X8", "X0"]


def test_serve_refuses_occupied_port():
    holder = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    holder.bind(("127.0.0.1", 0))
    holder.listen(1)
    port = holder.getsockname()[1]
    try:
        with pytest.raises(BindError):
            serve(idle_scenario(), port=port)
    finally:
        holder.close()
