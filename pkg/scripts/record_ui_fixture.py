#!/usr/bin/env python3
"""Record a protocol session as a fixture for the frontend's golden tests.

Drives the same script as the headless acceptance flow (load a traced fig1
run, replay to the first reception, fetch race sets, fork the l3 variant,
drive it to its reception, and provoke one blocked undo) and dumps every
notification and the interesting responses to
frontend/tests/fixtures/snapshot_stream.json.
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from kerndbg import runtime  # noqa: E402
from kerndbg.lang import parse  # noqa: E402
from kerndbg.service.cli import read_schedule  # noqa: E402
from kerndbg.service.sessions import SessionManager, handle_request  # noqa: E402
from kerndbg.trace import events_to_json  # noqa: E402


def main() -> int:
    corpus = ROOT / "corpus"
    prog_src = (corpus / "fig1.kern").read_text()
    prog = parse(prog_src)
    sched = runtime.SchedulerConfig(
        runtime.Scripted(read_schedule(corpus / "fig1_deliverall.sched")),
        runtime.LAZY,
    )
    res = runtime.run(prog, "main", sched)

    manager = SessionManager()
    stream = []
    responses = {}
    rid = 0

    def call(method, **params):
        nonlocal rid
        rid += 1
        response, notes = handle_request(
            manager, {"id": rid, "method": method, "params": params}
        )
        stream.extend(notes)
        responses[f"{rid}:{method}"] = response
        return response

    load = call("load", program=prog_src, trace=events_to_json(res.events))
    sid = load["result"]["session"]
    call("run_until", session=sid, target={"kind": "rec", "tag": "l1"})
    races = call("race_sets", session=sid)
    fork = call(
        "fork_variant", session=sid, receive={"pid": "p2", "index": 3}, tag="l3"
    )
    child = fork["result"]["session"]
    call("run_until", session=child, target={"kind": "rec", "tag": "l3"})
    # stuck sibling for the badge rendering
    fork2 = call(
        "fork_variant", session=sid, receive={"pid": "p2", "index": 3}, tag="l2"
    )
    stuck_child = fork2["result"]["session"]
    call("run_until", session=stuck_child, target={"kind": "rec", "tag": "l2"})
    # one blocked undo for guidance rendering
    blocked = None
    for _ in range(40):
        resp = call("step_bwd", session=child, pid="p1")
        if "error" in resp:
            blocked = resp
            break

    out = {
        "notifications": stream,
        "race_sets": races["result"],
        "blocked": blocked,
    }
    target = ROOT / "frontend" / "tests" / "fixtures"
    target.mkdir(parents=True, exist_ok=True)
    path = target / "snapshot_stream.json"
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path} ({len(stream)} notifications)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
