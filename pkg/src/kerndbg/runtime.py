"""Tracing system semantics: process pool + network, one rule per transition.

A system holds the network (one FIFO queue per ordered pid pair), the
process pool and the fresh-id counters. ``step`` applies exactly one rule
(Exit, Local, Self, Spawn, Send, Deliver or Receive) and reports the trace
event it emits, if any. ``run`` drives steps under a scheduler policy and
returns the recorded trace.

Steps are pure: they return a new System and never mutate their input.
"""

from __future__ import annotations

import random
from collections import deque
from copy import deepcopy
from dataclasses import dataclass, field
from typing import Optional, Union

from .lang.ast import PidVal, Program, Value, _Immutable
from .lang.machine import (
    LocalState, Local, OldestMatching, RecL, SelfL, SendL, SpawnL,
    bind_future, eval_step, final, initial_state, map_pids_in_state,
    map_pids_in_value, matchrec,
)
from .trace import (
    DeliverA, Event, ExitA, RecA, SendA, SpawnA, Trace, trace_of_events,
)


@dataclass(frozen=True)
class Message(_Immutable):
    tag: int
    value: Value


@dataclass
class Process:
    pid: int
    ls: LocalState
    mailbox: list[Message] = field(default_factory=list)


@dataclass
class System:
    network: dict[tuple[int, int], deque[Message]] = field(default_factory=dict)
    pool: dict[int, Process] = field(default_factory=dict)
    next_pid: int = 2
    next_tag: int = 1

    def queue(self, sender: int, target: int) -> deque[Message]:
        return self.network.get((sender, target), deque())

    def _append(self, sender: int, target: int, msg: Message) -> None:
        self.network.setdefault((sender, target), deque()).append(msg)

    def _pop_head(self, sender: int, target: int) -> Message:
        q = self.network[(sender, target)]
        msg = q.popleft()
        if not q:
            del self.network[(sender, target)]  # keep equality insensitive to leftovers
        return msg


def initial(program: Program, entry: str) -> System:
    sys_ = System()
    sys_.pool[1] = Process(1, initial_state(program, entry, ()))
    return sys_


# --- transition choices ------------------------------------------------------------


@dataclass(frozen=True)
class ProcChoice(_Immutable):
    pid: int


@dataclass(frozen=True)
class DeliverChoice(_Immutable):
    sender: int
    target: int


TransitionChoice = Union[ProcChoice, DeliverChoice]


def _choice_key(c: TransitionChoice):
    if isinstance(c, ProcChoice):
        return (0, c.pid, 0)
    return (1, c.sender, c.target)


class InapplicableChoice(Exception):
    pass


def _proc_applicable(sys_: System, program: Program, proc: Process) -> bool:
    """Exit/Local/Self/Spawn/Send always apply; Receive needs a match."""
    if final(proc.ls):
        return True
    label, after = eval_step(proc.ls, program)
    if isinstance(label, RecL):
        return matchrec(after, label.clauses, proc.mailbox, OldestMatching()) is not None
    return True


def enabled(sys_: System, program: Program) -> list[TransitionChoice]:
    out: list[TransitionChoice] = []
    for pid, proc in sys_.pool.items():
        if _proc_applicable(sys_, program, proc):
            out.append(ProcChoice(pid))
    for (sender, target), q in sys_.network.items():
        if q and target in sys_.pool:
            out.append(DeliverChoice(sender, target))
    return sorted(out, key=_choice_key)


def step(
    sys_: System, program: Program, choice: TransitionChoice
) -> tuple[Optional[Event], System]:
    """Apply one transition rule; returns (event or None, successor system)."""
    new = deepcopy(sys_)
    if isinstance(choice, DeliverChoice):
        sender, target = choice.sender, choice.target
        if not sys_.queue(sender, target) or target not in new.pool:
            raise InapplicableChoice(f"no deliverable message ({sender},{target})")
        msg = new._pop_head(sender, target)
        new.pool[target].mailbox.append(msg)
        return Event(target, DeliverA(msg.tag)), new

    pid = choice.pid
    if pid not in new.pool:
        raise InapplicableChoice(f"no process {pid}")
    proc = new.pool[pid]

    if final(proc.ls):  # rule Exit
        del new.pool[pid]
        return Event(pid, ExitA()), new

    label, after = eval_step(proc.ls, program)
    if isinstance(label, Local):
        proc.ls = after
        return None, new
    if isinstance(label, SelfL):
        proc.ls = bind_future(after, PidVal(pid))
        return None, new
    if isinstance(label, SpawnL):
        child = new.next_pid
        new.next_pid += 1
        proc.ls = bind_future(after, PidVal(child))
        new.pool[child] = Process(child, initial_state(program, label.fname, label.args))
        return Event(pid, SpawnA(child)), new
    if isinstance(label, SendL):
        tag = new.next_tag
        new.next_tag += 1
        new._append(pid, label.target, Message(tag, label.value))
        proc.ls = after
        return Event(pid, SendA(tag, label.target)), new
    if isinstance(label, RecL):
        res = matchrec(after, label.clauses, proc.mailbox, OldestMatching())
        if res is None:
            raise InapplicableChoice(f"process {pid} is blocked at a receive")
        proc.ls = res.state
        proc.mailbox = list(res.mailbox)
        return Event(pid, RecA(res.tag)), new
    raise TypeError(f"unhandled label {label!r}")  # pragma: no cover


def rename_ids(sys_: System, pid_map=None, tag_map=None) -> System:
    """Apply pid/tag renamings throughout a system (counters untouched).

    Ids not in the maps stay fixed. Fresh-id allocation makes independent
    allocating transitions commute only up to exchanging the ids they mint;
    this renaming is what "equal up to renaming" means at the system level.
    """
    pm = pid_map or {}
    tm = tag_map or {}

    def fp(p: int) -> int:
        return pm.get(p, p)

    def ft(t: int) -> int:
        return tm.get(t, t)

    def fmsg(m: Message) -> Message:
        return Message(ft(m.tag), map_pids_in_value(m.value, fp))

    out = System(next_pid=sys_.next_pid, next_tag=sys_.next_tag)
    for (s, t), q in sys_.network.items():
        out.network[(fp(s), fp(t))] = deque(fmsg(m) for m in q)
    for pid, proc in sys_.pool.items():
        out.pool[fp(pid)] = Process(
            fp(pid),
            map_pids_in_state(proc.ls, fp),
            [fmsg(m) for m in proc.mailbox],
        )
    return out


# --- schedulers ---------------------------------------------------------------------


@dataclass(frozen=True)
class RoundRobin(_Immutable):
    fuel: int = 1  # process steps per turn


@dataclass(frozen=True)
class RandomPolicy(_Immutable):
    seed: int = 0


@dataclass(frozen=True)
class Scripted(_Immutable):
    choices: tuple[TransitionChoice, ...]


Policy = Union[RoundRobin, RandomPolicy, Scripted]

EAGER = "eager"  # send and deliver applied consecutively, atomically
LAZY = "lazy"  # delivery is an ordinary schedulable transition


@dataclass(frozen=True)
class SchedulerConfig(_Immutable):
    policy: Policy = RoundRobin()
    delivery: str = EAGER


@dataclass
class RunResult:
    events: list[Event]
    trace: Trace
    final_sys: System
    stop_reason: str  # "completed" | "stuck" | "budget"


class ScriptError(Exception):
    pass


DEFAULT_BUDGET = 10_000


def run(
    program: Program,
    entry: str,
    sched: SchedulerConfig = SchedulerConfig(),
    budget: int = DEFAULT_BUDGET,
    record: bool = True,
) -> RunResult:
    """Drive transitions per the policy until quiescence or budget."""
    sys_ = initial(program, entry)
    events: list[Event] = []
    steps = 0

    def do(choice: TransitionChoice) -> Optional[Event]:
        nonlocal sys_, steps
        ev, sys_ = step(sys_, program, choice)
        steps += 1
        if record and ev is not None:
            events.append(ev)
        return ev

    def finish(reason: str) -> RunResult:
        return RunResult(events, trace_of_events(events), sys_, reason)

    def deliver_after_send(ev: Optional[Event]) -> None:
        # eager delivery: the freshly sent message is the queue head
        if ev is not None and isinstance(ev.action, SendA) and ev.action.to in sys_.pool:
            do(DeliverChoice(ev.pid, ev.action.to))

    policy = sched.policy
    if isinstance(policy, Scripted):
        for choice in policy.choices:
            if steps >= budget:
                return finish("budget")
            if choice not in enabled(sys_, program):
                raise ScriptError(f"scripted choice not enabled: {choice}")
            do(choice)
        return finish("completed" if not sys_.pool else "stuck")

    if isinstance(policy, RandomPolicy):
        rng = random.Random(policy.seed)
        while steps < budget:
            if not sys_.pool:
                return finish("completed")
            options = enabled(sys_, program)
            if sched.delivery == EAGER:
                options = [c for c in options if isinstance(c, ProcChoice)]
            if not options:
                return finish("stuck")
            choice = rng.choice(options)
            ev = do(choice)
            if sched.delivery == EAGER:
                deliver_after_send(ev)
        return finish("budget")

    if isinstance(policy, RoundRobin):
        turn_cursor = 0
        queue_cursor = 0
        while steps < budget:
            if not sys_.pool:
                return finish("completed")
            options = enabled(sys_, program)
            proc_options = [c.pid for c in options if isinstance(c, ProcChoice)]
            deliver_options = [c for c in options if isinstance(c, DeliverChoice)]
            if not proc_options and (sched.delivery == EAGER or not deliver_options):
                return finish("stuck")
            if proc_options:
                pick = None
                for p in proc_options:
                    if p >= turn_cursor:
                        pick = p
                        break
                if pick is None:
                    pick = proc_options[0]
                turn_cursor = pick + 1
                for _ in range(max(1, policy.fuel)):
                    if steps >= budget:
                        return finish("budget")
                    if ProcChoice(pick) not in enabled(sys_, program):
                        break
                    ev = do(ProcChoice(pick))
                    if sched.delivery == EAGER:
                        deliver_after_send(ev)
            if sched.delivery == LAZY and steps < budget:
                deliver_options = [
                    c for c in enabled(sys_, program) if isinstance(c, DeliverChoice)
                ]
                if deliver_options:
                    keys = sorted((c.sender, c.target) for c in deliver_options)
                    pick_q = None
                    for k in keys:
                        if k >= (queue_cursor, 0):
                            pick_q = k
                            break
                    if pick_q is None:
                        pick_q = keys[0]
                    queue_cursor = pick_q[0] + 1
                    do(DeliverChoice(*pick_q))
        return finish("budget")

    raise TypeError(f"unknown policy {policy!r}")  # pragma: no cover
