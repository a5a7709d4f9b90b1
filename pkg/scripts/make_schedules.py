#!/usr/bin/env python3
"""Regenerate the corpus schedule files and golden traces.

The scripted scheduler works at transition granularity (every local step is
one transition), so schedules are authored here by driving the runtime at
event granularity and recording the transitions taken.

Outputs (committed to the repo):
    corpus/fig1b.sched          delivery order l1 then l2, l3 (fig1_star)
    corpus/fig1c.sched          l2 delivered before l1 (fig1_star)
    corpus/fig1_deliverall.sched  everything delivered before the receive (fig1)
    corpus/golden/trace_star.json  the fig1b trace of fig1_star
    corpus/golden/trace_fig1c.json
    corpus/golden/trace_fig1_deliverall.json
"""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from kerndbg import runtime  # noqa: E402
from kerndbg.lang import parse  # noqa: E402
from kerndbg.service.cli import write_schedule  # noqa: E402
from kerndbg.trace import write_trace  # noqa: E402


class Director:
    """Drives a system one event at a time, recording the choices taken."""

    def __init__(self, program, entry="main"):
        self.program = program
        self.sys = runtime.initial(program, entry)
        self.choices = []
        self.events = []

    def _apply(self, choice):
        ev, self.sys = runtime.step(self.sys, self.program, choice)
        self.choices.append(choice)
        if ev is not None:
            self.events.append(ev)
        return ev

    def proc_event(self, pid):
        """Step pid until it emits an event (silent steps are recorded too)."""
        for _ in range(1000):
            ev = self._apply(runtime.ProcChoice(pid))
            if ev is not None:
                return ev
        raise RuntimeError(f"p{pid} never emitted an event")

    def deliver(self, sender, target):
        return self._apply(runtime.DeliverChoice(sender, target))


def fig1b(program):
    d = Director(program)
    d.proc_event(1)  # spawn p2
    d.proc_event(1)  # spawn p3
    d.proc_event(1)  # send l1 -> p2
    d.proc_event(1)  # exit p1
    d.deliver(1, 2)  # deliver l1
    d.proc_event(2)  # rec l1
    d.proc_event(3)  # send l2 -> p2
    d.proc_event(3)  # send l3 -> p2
    d.proc_event(3)  # exit p3
    d.deliver(3, 2)  # deliver l2
    d.deliver(3, 2)  # deliver l3
    return d


def fig1c(program):
    d = Director(program)
    d.proc_event(1)  # spawn p2
    d.proc_event(1)  # spawn p3
    d.proc_event(1)  # send l1 -> p2
    d.proc_event(1)  # exit p1
    d.proc_event(3)  # send l2 -> p2
    d.deliver(3, 2)  # deliver l2 (before l1!)
    d.deliver(1, 2)  # deliver l1
    d.proc_event(2)  # rec l1 (l2 does not match)
    d.proc_event(3)  # send l3 -> p2
    d.proc_event(3)  # exit p3
    d.deliver(3, 2)  # deliver l3
    return d


def fig1_deliverall(program):
    d = Director(program)
    d.proc_event(1)  # spawn p2
    d.proc_event(1)  # spawn p3
    d.proc_event(1)  # send l1 -> p2
    d.proc_event(1)  # exit p1
    d.proc_event(3)  # send l2 -> p2
    d.proc_event(3)  # send l3 -> p2
    d.proc_event(3)  # exit p3
    d.deliver(1, 2)  # deliver l1
    d.deliver(3, 2)  # deliver l2
    d.deliver(3, 2)  # deliver l3
    d.proc_event(2)  # rec l1
    d.proc_event(2)  # exit p2
    return d


def main():
    corpus = ROOT / "corpus"
    golden = corpus / "golden"
    golden.mkdir(exist_ok=True)

    star = parse((corpus / "fig1_star.kern").read_text())
    d = fig1b(star)
    write_schedule(corpus / "fig1b.sched", d.choices)
    write_trace(golden / "trace_star.json", d.events)
    print("fig1b:", [str(e) for e in d.events])

    d = fig1c(star)
    write_schedule(corpus / "fig1c.sched", d.choices)
    write_trace(golden / "trace_fig1c.json", d.events)

    one = parse((corpus / "fig1.kern").read_text())
    d = fig1_deliverall(one)
    write_schedule(corpus / "fig1_deliverall.sched", d.choices)
    write_trace(golden / "trace_fig1_deliverall.json", d.events)
    print("done")


if __name__ == "__main__":
    main()
