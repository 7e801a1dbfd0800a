import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from conftest import make_scenario_dict
from maniplan.cli import main
from maniplan.scenario_io import read_trace, scenario_from_dict
from maniplan.server import create_app

FAST = {"tick_rate_hz": 500.0}


def make_app(record_dir=None, **overrides):
    scenario = scenario_from_dict(make_scenario_dict(tick_rate_hz=500.0, **overrides))
    return create_app(scenario, record_dir=record_dir)


def drain_until(ws, kind, **match):
    """Read frames until one matches; returns (matched, all seen)."""
    seen = []
    for _ in range(3000):
        msg = ws.receive_json()
        seen.append(msg)
        if msg["type"] == kind and all(msg.get(k) == v for k, v in match.items()):
            return msg, seen
    raise AssertionError(f"never saw {kind} {match}; last: {seen[-3:]}")


def test_connect_handshake():
    with TestClient(make_app()) as client:
        with client.websocket_connect("/ws") as ws:
            hello = ws.receive_json()
            assert hello["type"] == "hello" and hello["protocol"] == 1
            scene = ws.receive_json()
            assert scene["type"] == "scene"
            assert "members" in scene and "obstacles" in scene
            snapshot = ws.receive_json()
            assert snapshot["type"] == "snapshot" and snapshot["tick"] == 0
            assert {a["name"] for a in snapshot["agents"]} == {
                "repulsion", "visibility", "head_orientation", "attraction", "operator",
            }


def test_step_n_single():
    with TestClient(make_app()) as client:
        with client.websocket_connect("/ws") as ws:
            drain_until(ws, "snapshot", tick=0)
            ws.send_json({"type": "step_n", "n": 1, "id": "s1"})
            ack, _ = drain_until(ws, "ack", command="step_n")
            assert ack["tick"] == 1 and ack["id"] == "s1"
            snap, _ = drain_until(ws, "snapshot", tick=1)
            assert snap["tick"] == 1


def test_step_n_firing_counts_1_3_9():
    overrides = {
        "agents": {
            "repulsion": {"rate": 1},
            "attraction": {"rate": 3},
            "operator": {"rate": 9},
            "visibility": {"rate": 1},
            "head_orientation": {"rate": 1},
        }
    }
    with TestClient(make_app(**overrides)) as client:
        with client.websocket_connect("/ws") as ws:
            drain_until(ws, "snapshot", tick=0)
            ws.send_json({"type": "step_n", "n": 90})
            drain_until(ws, "ack", command="step_n")
            snap, _ = drain_until(ws, "snapshot", tick=90)
            fires = {a["name"]: a["fires"] for a in snap["agents"]}
            assert fires["repulsion"] == 90
            assert fires["attraction"] == 30
            assert fires["operator"] == 10


def test_step_n_twice_equals_once_doubled():
    def final_snapshot(step_sizes):
        with TestClient(make_app()) as client:
            with client.websocket_connect("/ws") as ws:
                drain_until(ws, "snapshot", tick=0)
                total = 0
                for n in step_sizes:
                    total += n
                    ws.send_json({"type": "step_n", "n": n})
                    drain_until(ws, "ack", command="step_n")
                snap, _ = drain_until(ws, "snapshot", tick=total)
                return snap

    twice = final_snapshot([7, 7])
    once = final_snapshot([14])
    assert json.dumps(twice, sort_keys=True) == json.dumps(once, sort_keys=True)


def test_step_n_rejected_while_running():
    with TestClient(make_app()) as client:
        with client.websocket_connect("/ws") as ws:
            drain_until(ws, "snapshot", tick=0)
            ws.send_json({"type": "run"})
            drain_until(ws, "ack", command="run")
            ws.send_json({"type": "step_n", "n": 1})
            err, _ = drain_until(ws, "error")
            assert "paused" in err["message"]


def test_pause_contract():
    with TestClient(make_app()) as client:
        with client.websocket_connect("/ws") as ws:
            drain_until(ws, "snapshot", tick=0)
            ws.send_json({"type": "run"})
            drain_until(ws, "ack", command="run")
            # let a few ticks pass
            _, running = drain_until(ws, "snapshot", tick=3)
            ws.send_json({"type": "pause_sim"})
            ack, seen = drain_until(ws, "ack", command="pause_sim")
            pause_tick = ack["tick"]
            assert pause_tick >= 3
            # probe: everything between the pause ack and the probe ack must
            # stay at or below the pause tick (no tick advances while paused)
            ws.send_json({"type": "configure", "command": "resume", "agent": "operator", "id": "probe"})
            _, between = drain_until(ws, "ack", command="resume")
            snapshots = [m for m in between if m["type"] == "snapshot"]
            assert all(s["tick"] <= pause_tick for s in snapshots)
            # the freshest snapshot delivered carries exactly the ack tick
            latest = max(
                m["tick"] for m in running + seen + between if m["type"] == "snapshot"
            )
            assert latest == pause_tick


def test_snapshots_strictly_increasing_and_identical_for_two_clients():
    with TestClient(make_app()) as client:
        with client.websocket_connect("/ws") as ws1, client.websocket_connect("/ws") as ws2:
            drain_until(ws1, "snapshot", tick=0)
            drain_until(ws2, "snapshot", tick=0)
            ws1.send_json({"type": "step_n", "n": 25})
            seq1 = [drain_until(ws1, "snapshot", tick=t)[0] for t in range(1, 26)]
            seq2 = [drain_until(ws2, "snapshot", tick=t)[0] for t in range(1, 26)]
            ticks1 = [s["tick"] for s in seq1]
            assert ticks1 == sorted(set(ticks1))  # strictly increasing
            assert json.dumps(seq1, sort_keys=True) == json.dumps(seq2, sort_keys=True)


def test_configure_pause_agent_round_trip():
    with TestClient(make_app()) as client:
        with client.websocket_connect("/ws") as ws:
            drain_until(ws, "snapshot", tick=0)
            ws.send_json({"type": "configure", "command": "pause", "agent": "attraction", "id": 7})
            ack, _ = drain_until(ws, "ack", command="pause")
            assert ack["id"] == 7
            ws.send_json({"type": "step_n", "n": 1})
            snap, _ = drain_until(ws, "snapshot", tick=1)
            attraction = next(a for a in snap["agents"] if a["name"] == "attraction")
            assert attraction["active"] is False
            assert attraction["last"] is None  # paused: no live contribution


def test_operator_input_ack_and_trace(tmp_path):
    record = tmp_path / "session"
    app = make_app(
        record_dir=record,
        agents={"operator": {"rate": 9}},
    )
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            drain_until(ws, "snapshot", tick=0)
            ws.send_json({"type": "step_n", "n": 5})
            drain_until(ws, "ack", command="step_n")
            ws.send_json({"type": "operator_input", "dx": 0.4, "dy": 0.0, "dtheta": 0.0})
            ack, _ = drain_until(ws, "ack", command="operator_input")
            assert ack["tick"] == 9  # next firing of the rate-9 operator from tick 5
            ws.send_json({"type": "step_n", "n": 10})
            drain_until(ws, "ack", command="step_n")
    records = read_trace(record / "trace.jsonl")
    fired = [r["tick"] for r in records if "operator" in r["contributions"]
             and r["contributions"]["operator"]["dx"] != 0.0]
    assert fired == [ack["tick"]]


def test_malformed_frame_keeps_session_alive():
    with TestClient(make_app()) as client:
        with client.websocket_connect("/ws") as ws:
            drain_until(ws, "snapshot", tick=0)
            ws.send_text("this is not json")
            err, _ = drain_until(ws, "error")
            assert "malformed" in err["message"]
            ws.send_json({"type": "step_n", "n": 1})
            ack, _ = drain_until(ws, "ack", command="step_n")
            assert ack["tick"] == 1


def test_unknown_command_errors():
    with TestClient(make_app()) as client:
        with client.websocket_connect("/ws") as ws:
            drain_until(ws, "snapshot", tick=0)
            ws.send_json({"type": "teleport", "id": "x"})
            err, _ = drain_until(ws, "error")
            assert err["id"] == "x"


def test_reset_starts_new_epoch():
    with TestClient(make_app()) as client:
        with client.websocket_connect("/ws") as ws:
            drain_until(ws, "snapshot", tick=0)
            ws.send_json({"type": "step_n", "n": 5})
            drain_until(ws, "snapshot", tick=5)
            ws.send_json({"type": "reset"})
            drain_until(ws, "ack", command="reset")
            scene, _ = drain_until(ws, "scene")
            snap, _ = drain_until(ws, "snapshot", tick=0)
            assert snap["tick"] == 0


def test_client_joining_mid_run_gets_clean_handshake():
    with TestClient(make_app()) as client:
        with client.websocket_connect("/ws") as first:
            drain_until(first, "snapshot", tick=0)
            first.send_json({"type": "run"})
            drain_until(first, "ack", command="run")
            drain_until(first, "snapshot", tick=5)
            # a second client joins while ticks are flowing: the handshake is
            # served from the stepping thread, so its snapshot is consistent
            with client.websocket_connect("/ws") as second:
                hello = second.receive_json()
                assert hello["type"] == "hello"
                scene = second.receive_json()
                assert scene["type"] == "scene"
                base = second.receive_json()
                assert base["type"] == "snapshot"
                last = base["tick"]
                for _ in range(5):
                    snap, _ = drain_until(second, "snapshot")
                    assert snap["tick"] > last
                    last = snap["tick"]
            first.send_json({"type": "pause_sim"})
            drain_until(first, "ack", command="pause_sim")


def test_serves_operator_console_when_built(tmp_path):
    ui_dir = Path(__file__).resolve().parent.parent / "frontend"
    if not (ui_dir / "dist" / "main.js").exists():
        pytest.skip("frontend not built")
    scenario = scenario_from_dict(make_scenario_dict(tick_rate_hz=500.0))
    with TestClient(create_app(scenario, ui_dir=ui_dir)) as client:
        page = client.get("/")
        assert page.status_code == 200
        assert "viewport" in page.text
        script = client.get("/dist/main.js")
        assert script.status_code == 200
        assert "SimClient" in script.text


def test_recorded_session_replays_byte_identically(tmp_path):
    scenario_dict = make_scenario_dict(
        tick_rate_hz=500.0,
        targets={"final_m": [0.0, 5.0, 1.6]},
    )
    scenario_path = tmp_path / "scene.json"
    scenario_path.write_text(json.dumps(scenario_dict))
    record = tmp_path / "session"

    scenario = scenario_from_dict(scenario_dict, base_dir=tmp_path)
    with TestClient(create_app(scenario, record_dir=record)) as client:
        with client.websocket_connect("/ws") as ws:
            drain_until(ws, "snapshot", tick=0)
            ws.send_json({"type": "step_n", "n": 10})
            drain_until(ws, "ack", command="step_n")
            ws.send_json({"type": "push_waypoint", "point": [1.0, 2.0, 1.5]})
            drain_until(ws, "ack", command="push_waypoint")
            ws.send_json({"type": "operator_input", "dx": 0.3, "dy": -0.1, "dtheta": 0.05})
            drain_until(ws, "ack", command="operator_input")
            ws.send_json({"type": "step_n", "n": 30})
            drain_until(ws, "ack", command="step_n")
            ws.send_json({"type": "configure", "command": "set_rate", "agent": "attraction", "value": 2})
            drain_until(ws, "ack", command="set_rate")
            ws.send_json({"type": "step_n", "n": 20})
            drain_until(ws, "ack", command="step_n")
    # session closed: recording finalized with the end marker
    live_trace = (record / "trace.jsonl").read_bytes()
    assert len(read_trace(record / "trace.jsonl")) == 60

    replay_trace = tmp_path / "replayed.jsonl"
    code = main(
        [
            "replay",
            "--scenario", str(scenario_path),
            "--script", str(record / "commands.jsonl"),
            "--trace", str(replay_trace),
        ]
    )
    assert code == 0
    assert replay_trace.read_bytes() == live_trace
