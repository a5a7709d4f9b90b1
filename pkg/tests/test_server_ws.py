"""End-to-end protocol script against the WebSocket server.

This is the headless counterpart of the UI: load a traced fig1 run, replay
to the first reception, inspect race sets, fork the feasible variant and
drive the child to its substituted reception.
"""

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from kerndbg import runtime
from kerndbg.lang import parse
from kerndbg.service.cli import read_schedule
from kerndbg.service.server import create_app
from kerndbg.trace import events_to_json

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"


class Proto:
    """Request/notification framing over the test websocket."""

    def __init__(self, ws):
        self.ws = ws
        self.rid = 0
        self.notifications = []

    def call(self, method, **params):
        self.rid += 1
        self.ws.send_text(json.dumps(
            {"id": self.rid, "method": method, "params": params}
        ))
        while True:
            msg = json.loads(self.ws.receive_text())
            if msg.get("method") == "state_changed":
                self.notifications.append(msg)
                continue
            assert msg["id"] == self.rid
            return msg


def fig1_traced_events():
    prog = parse((CORPUS / "fig1.kern").read_text())
    sched = runtime.SchedulerConfig(
        runtime.Scripted(read_schedule(CORPUS / "fig1_deliverall.sched")),
        runtime.LAZY,
    )
    res = runtime.run(prog, "main", sched)
    return events_to_json(res.events)


def test_protocol_script_end_to_end():
    app = create_app(ui_dist=Path("/nonexistent"))
    client = TestClient(app)
    with client.websocket_connect("/api") as ws:
        proto = Proto(ws)

        resp = proto.call(
            "load",
            program=(CORPUS / "fig1.kern").read_text(),
            trace=fig1_traced_events(),
        )
        assert "result" in resp
        sid = resp["result"]["session"]
        assert resp["result"]["snapshot"]["mode"] == "replay"

        resp = proto.call("run_until", session=sid, target={"kind": "rec", "tag": "l1"})
        assert resp["result"]["reached"]

        resp = proto.call("race_sets", session=sid)
        [rs] = resp["result"]["race_sets"]
        assert rs == {
            "receive": {"pid": "p2", "index": 3, "tag": "l1"},
            "races": {"p3": ["l2", "l3"]},
        }

        resp = proto.call(
            "fork_variant", session=sid,
            receive={"pid": rs["receive"]["pid"], "index": rs["receive"]["index"]},
            tag="l3",
        )
        child = resp["result"]["session"]
        assert child != sid
        assert resp["result"]["snapshot"]["parent"] == sid

        resp = proto.call("run_until", session=child, target={"kind": "rec", "tag": "l3"})
        assert resp["result"]["reached"]

        snap = proto.call("snapshot", session=child)["result"]
        assert {"pid": "p2", "action": "rec(l3)"} in snap["events"]

        # the infeasible sibling gets stuck instead of reaching its reception
        resp = proto.call(
            "fork_variant", session=sid,
            receive={"pid": "p2", "index": 3}, tag="l2",
        )
        stuck_child = resp["result"]["session"]
        resp = proto.call(
            "run_until", session=stuck_child, target={"kind": "rec", "tag": "l2"}
        )
        assert not resp["result"]["reached"]

        sessions = proto.call("list_sessions")["result"]["sessions"]
        assert len(sessions) == 3
        assert proto.notifications  # state_changed precedes mutating responses


def test_blocked_undo_error_over_ws(fig1_star):
    app = create_app(ui_dist=Path("/nonexistent"))
    client = TestClient(app)
    with client.websocket_connect("/api") as ws:
        proto = Proto(ws)
        resp = proto.call("load", program=(CORPUS / "fig1_star.kern").read_text())
        sid = resp["result"]["session"]
        proto.call("run_until", session=sid, target={"kind": "deadlock"})
        # walking p1 backwards eventually hits the guarded spawn undo
        last = None
        for _ in range(40):
            last = proto.call("step_bwd", session=sid, pid="p1")
            if "error" in last:
                break
        assert last is not None and "error" in last
        assert last["error"]["prerequisites"]


def test_index_without_ui_build():
    app = create_app(ui_dist=Path("/nonexistent"))
    client = TestClient(app)
    resp = client.get("/")
    assert resp.status_code == 200
    assert "not built" in resp.text
