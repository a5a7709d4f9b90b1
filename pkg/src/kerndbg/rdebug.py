"""Log-driven causal-consistent reversible debugger.

The forward semantics replays a log: spawn, send and receive consult the
log cursor for the ids they must reproduce, deliveries are chosen by
``admissible``, and every forward step pushes a history entry with enough
information to undo it. The backward semantics undoes a process's most
recent step, returning spawn/send/rec actions to the log so they replay
identically when re-executed. Undoing is guarded: an action can only be
undone once everything that depends on it has been undone, and ``can_undo``
reports the missing prerequisites.

Two deliberate asymmetries with the tracing runtime: exit keeps the
process around (with its state saved) so it can be undone, and messages are
never delivered to an exited process, which keeps exit-undo exact.
"""

from __future__ import annotations

import random
from collections import deque
from copy import deepcopy
from dataclasses import dataclass, field
from typing import Optional, Union

from .lang.ast import PidVal, Program, Value, _Immutable
from .lang.machine import (
    ByTag, LocalState, Local, OldestMatching, RecL, SelfL, SendL, SpawnL,
    bind_future, eval_step, final, initial_state, matchrec,
)
from .runtime import DeliverChoice, InapplicableChoice, Message, ProcChoice, TransitionChoice
from .trace import (
    DeliverA, Event, EventRef, ExitA, Log, LogAction, RecA, SendA, SendLogA,
    SpawnA, Trace, format_action, pid_name, tag_name, trace_of_events,
)


class ReplayDivergenceError(Exception):
    def __init__(self, pid: int, expected: str, requested: str):
        super().__init__(
            f"replay divergence on {pid_name(pid)}: log has {expected}, "
            f"program performs {requested}"
        )
        self.pid = pid
        self.expected = expected
        self.requested = requested


# --- histories ---------------------------------------------------------------------


@dataclass(frozen=True)
class MailboxItem(_Immutable):
    msg: Message
    seq: int  # per-process delivery sequence number


@dataclass(frozen=True)
class ExitH(_Immutable):
    ls: LocalState
    mailbox: tuple[MailboxItem, ...]


@dataclass(frozen=True)
class LocalH(_Immutable):
    ls: LocalState


@dataclass(frozen=True)
class SelfH(_Immutable):
    ls: LocalState


@dataclass(frozen=True)
class SpawnH(_Immutable):
    ls: LocalState
    child: int


@dataclass(frozen=True)
class SendH(_Immutable):
    ls: LocalState
    to: int
    msg: Message


@dataclass(frozen=True)
class RecH(_Immutable):
    ls: LocalState
    tag: int
    value: Value
    index: int  # 0-based mailbox position the message was consumed from
    seq: int  # its delivery sequence number, for the deliver-undo guard


HistoryEntry = Union[ExitH, LocalH, SelfH, SpawnH, SendH, RecH]


def describe_entry(e: HistoryEntry) -> str:
    if isinstance(e, ExitH):
        return "exit"
    if isinstance(e, LocalH):
        return "local"
    if isinstance(e, SelfH):
        return "self"
    if isinstance(e, SpawnH):
        return f"spawn({pid_name(e.child)})"
    if isinstance(e, SendH):
        return f"send({tag_name(e.msg.tag)})"
    if isinstance(e, RecH):
        return f"rec({tag_name(e.tag)})"
    raise TypeError(f"not a history entry: {e!r}")


@dataclass
class RProcess:
    pid: int
    history: list[HistoryEntry] = field(default_factory=list)  # last = most recent
    ls: Optional[LocalState] = None  # None = exited (history head is ExitH)
    mailbox: list[MailboxItem] = field(default_factory=list)
    deliver_count: int = 0

    @property
    def exited(self) -> bool:
        return self.ls is None


@dataclass
class RSystem:
    log: dict[int, deque[LogAction]] = field(default_factory=dict)  # remaining ω
    network: dict[tuple[int, int], deque[Message]] = field(default_factory=dict)
    pool: dict[int, RProcess] = field(default_factory=dict)
    next_pid: int = 2  # monotone high-water marks; undo returns ids to the log
    next_tag: int = 1
    origin: dict[int, int] = field(default_factory=dict)  # live tag -> sender

    def remaining(self, pid: int) -> deque[LogAction]:
        return self.log.get(pid, deque())

    def _pop_log(self, pid: int) -> LogAction:
        q = self.log[pid]
        head = q.popleft()
        if not q:
            del self.log[pid]
        return head

    def _push_log(self, pid: int, action: LogAction) -> None:
        self.log.setdefault(pid, deque()).appendleft(action)


def initial_rsystem(program: Program, log: Log, entry: str = "main") -> RSystem:
    rs = RSystem()
    max_pid, max_tag = 1, 0
    for p in log.pids():
        seq = log.seq(p)
        if seq:
            rs.log[p] = deque(seq)
        max_pid = max(max_pid, p)
        for a in seq:
            if isinstance(a, SpawnA):
                max_pid = max(max_pid, a.child)
            elif isinstance(a, (SendLogA, RecA)):
                max_tag = max(max_tag, a.tag)
    rs.next_pid = max_pid + 1
    rs.next_tag = max_tag + 1
    rs.pool[1] = RProcess(1, ls=initial_state(program, entry, ()))
    return rs


# --- log cursor and delivery choice --------------------------------------------------

_KIND_OF = {"spawn": SpawnA, "send": SendLogA, "rec": RecA}


def next_p(omega: dict[int, deque[LogAction]], pid: int, kind: str, fresh):
    """Pop the next logged id for pid, or mint a fresh one if its log is done.

    Returns (id, consumed_from_log). The head must be of the requested kind,
    otherwise the replay has diverged from the log.
    """
    q = omega.get(pid)
    if q:
        head = q[0]
        if not isinstance(head, _KIND_OF[kind]):
            raise ReplayDivergenceError(pid, format_action(head), kind)
        q.popleft()
        if not q:
            del omega[pid]
        return (head.child if isinstance(head, SpawnA) else head.tag), True
    return fresh(), False


def admissible(
    omega: dict[int, deque[LogAction]],
    pid: int,
    network: dict[tuple[int, int], deque[Message]],
    mailbox,
) -> Optional[tuple[int, int]]:
    """The one message that may be delivered to pid next: (sender, tag).

    Preference order: the tag the log needs for pid's next rec; then the
    smallest sender whose queue head is not reserved for a later logged rec;
    then the smallest sender outright. Reservation is a preference, not a
    filter: a selectively received message can sit behind a later-logged
    tag in the same FIFO queue, and only delivering the head makes progress.
    """
    rec_tags = [a.tag for a in omega.get(pid, ()) if isinstance(a, RecA)]
    heads = sorted(
        (sender, q[0].tag)
        for (sender, target), q in network.items()
        if target == pid and q
    )
    if not heads:
        return None
    if rec_tags:
        for sender, t in heads:
            if t == rec_tags[0]:
                return sender, t
    later = set(rec_tags[1:])
    for sender, t in heads:
        if t not in later:
            return sender, t
    return heads[0]


# --- forward semantics -----------------------------------------------------------------


def _fresh_pid(rs: RSystem) -> int:
    p = rs.next_pid
    rs.next_pid += 1
    return p


def _fresh_tag(rs: RSystem) -> int:
    t = rs.next_tag
    rs.next_tag += 1
    return t


def fwd_step(
    rs: RSystem, program: Program, choice: TransitionChoice
) -> tuple[Optional[Event], RSystem]:
    """One forward (replay) transition; pushes the history entry to undo it."""
    new = deepcopy(rs)
    if isinstance(choice, DeliverChoice):
        sender, target = choice.sender, choice.target
        proc = new.pool.get(target)
        if proc is None or proc.exited:
            raise InapplicableChoice(f"cannot deliver to {pid_name(target)}")
        adm = admissible(new.log, target, new.network, proc.mailbox)
        q = new.network.get((sender, target))
        if not q or adm != (sender, q[0].tag):
            raise InapplicableChoice(
                f"delivery ({pid_name(sender)},{pid_name(target)}) is not admissible"
            )
        msg = q.popleft()
        if not q:
            del new.network[(sender, target)]
        proc.mailbox.append(MailboxItem(msg, proc.deliver_count))
        proc.deliver_count += 1
        return Event(target, DeliverA(msg.tag)), new

    pid = choice.pid
    proc = new.pool.get(pid)
    if proc is None:
        raise InapplicableChoice(f"no process {pid_name(pid)}")
    if proc.exited:
        raise InapplicableChoice(f"{pid_name(pid)} has exited")
    ls = proc.ls

    if final(ls):  # rule Exit: keep the process, mark it exited
        proc.history.append(ExitH(ls, tuple(proc.mailbox)))
        proc.ls = None
        return Event(pid, ExitA()), new

    label, after = eval_step(ls, program)
    if isinstance(label, Local):
        proc.history.append(LocalH(ls))
        proc.ls = after
        return None, new
    if isinstance(label, SelfL):
        proc.history.append(SelfH(ls))
        proc.ls = bind_future(after, PidVal(pid))
        return None, new
    if isinstance(label, SpawnL):
        child, consumed = next_p(new.log, pid, "spawn", lambda: _fresh_pid(new))
        if consumed:
            new.next_pid = max(new.next_pid, child + 1)
        proc.history.append(SpawnH(ls, child))
        proc.ls = bind_future(after, PidVal(child))
        new.pool[child] = RProcess(
            child, ls=initial_state(program, label.fname, label.args)
        )
        return Event(pid, SpawnA(child)), new
    if isinstance(label, SendL):
        tag, consumed = next_p(new.log, pid, "send", lambda: _fresh_tag(new))
        if consumed:
            new.next_tag = max(new.next_tag, tag + 1)
        msg = Message(tag, label.value)
        new.network.setdefault((pid, label.target), deque()).append(msg)
        new.origin[tag] = pid
        proc.history.append(SendH(ls, label.target, msg))
        proc.ls = after
        return Event(pid, SendA(tag, label.target)), new
    if isinstance(label, RecL):
        remaining = new.remaining(pid)
        values = [item.msg for item in proc.mailbox]
        if remaining:
            head = remaining[0]
            if not isinstance(head, RecA):
                raise ReplayDivergenceError(pid, format_action(head), "rec")
            res = matchrec(after, label.clauses, values, ByTag(head.tag))
            if res is None:
                raise InapplicableChoice(
                    f"{pid_name(pid)} waits for logged {tag_name(head.tag)}"
                )
            new._pop_log(pid)
        else:
            res = matchrec(after, label.clauses, values, OldestMatching())
            if res is None:
                raise InapplicableChoice(f"{pid_name(pid)} is blocked at a receive")
        item = proc.mailbox[res.index]
        proc.history.append(RecH(ls, res.tag, res.value, res.index, item.seq))
        del proc.mailbox[res.index]
        proc.ls = res.state
        return Event(pid, RecA(res.tag)), new
    raise TypeError(f"unhandled label {label!r}")  # pragma: no cover


def proc_step_kind(rs: RSystem, program: Program, pid: int) -> Optional[str]:
    """Kind of the process rule that would fire for pid, or None if blocked.

    A receive is reported only when it can actually consume a message now;
    a log-kind mismatch still reports the program's kind (stepping it
    surfaces the divergence loudly).
    """
    proc = rs.pool.get(pid)
    if proc is None or proc.exited:
        return None
    if final(proc.ls):
        return "exit"
    label, after = eval_step(proc.ls, program)
    if isinstance(label, Local):
        return "local"
    if isinstance(label, SelfL):
        return "self"
    if isinstance(label, SpawnL):
        return "spawn"
    if isinstance(label, SendL):
        return "send"
    remaining = rs.remaining(pid)
    values = [item.msg for item in proc.mailbox]
    if remaining:
        head = remaining[0]
        if not isinstance(head, RecA):
            return "rec"  # divergence surfaces when stepped
        res = matchrec(after, label.clauses, values, ByTag(head.tag))
    else:
        res = matchrec(after, label.clauses, values, OldestMatching())
    return "rec" if res is not None else None


# --- backward semantics ------------------------------------------------------------------


@dataclass(frozen=True)
class Prereq(_Immutable):
    pid: int
    kind: str  # "exit" | "local" | "self" | "spawn" | "send" | "rec" | "deliver"
    ident: Optional[int] = None  # tag or child pid, when applicable

    def describe(self) -> str:
        if self.kind == "deliver":
            return f"undo deliver({tag_name(self.ident)}) on {pid_name(self.pid)}"
        if self.kind in ("send", "rec"):
            return f"undo {self.kind}({tag_name(self.ident)}) on {pid_name(self.pid)}"
        if self.kind == "spawn":
            return f"undo spawn({pid_name(self.ident)}) on {pid_name(self.pid)}"
        if self.kind == "nothing":
            return f"nothing to undo on {pid_name(self.pid)}"
        if self.kind == "steps":
            return f"undo {pid_name(self.pid)}'s remaining steps"
        return f"undo {self.kind} on {pid_name(self.pid)}"


@dataclass
class UndoCheck:
    ok: bool
    reasons: list[Prereq] = field(default_factory=list)  # in executable order


def _entry_prereq(pid: int, e: HistoryEntry) -> Prereq:
    if isinstance(e, ExitH):
        return Prereq(pid, "exit")
    if isinstance(e, LocalH):
        return Prereq(pid, "local")
    if isinstance(e, SelfH):
        return Prereq(pid, "self")
    if isinstance(e, SpawnH):
        return Prereq(pid, "spawn", e.child)
    if isinstance(e, SendH):
        return Prereq(pid, "send", e.msg.tag)
    return Prereq(pid, "rec", e.tag)


def can_undo(rs: RSystem, pid: int) -> UndoCheck:
    """Whether pid's most recent history entry may be undone right now."""
    proc = rs.pool.get(pid)
    if proc is None or not proc.history:
        return UndoCheck(False, [Prereq(pid, "nothing")])
    head = proc.history[-1]
    if isinstance(head, (ExitH, LocalH, SelfH)):
        return UndoCheck(True)
    if isinstance(head, SpawnH):
        child = rs.pool.get(head.child)
        if child is None:
            return UndoCheck(False, [Prereq(pid, "nothing")])  # unreachable
        # guidance names the child's observable steps; a trailing entry
        # covers the silent local/self steps that must be popped as well
        reasons = [
            _entry_prereq(head.child, e)
            for e in reversed(child.history)
            if not isinstance(e, (LocalH, SelfH))
        ]
        if any(isinstance(e, (LocalH, SelfH)) for e in child.history):
            reasons.append(Prereq(head.child, "steps"))
        reasons += [
            Prereq(head.child, "deliver", item.msg.tag)
            for item in reversed(child.mailbox)
        ]
        return UndoCheck(not (child.history or child.mailbox), reasons)
    if isinstance(head, SendH):
        q = rs.network.get((pid, head.to))
        if q and q[-1] == head.msg:
            return UndoCheck(True)
        target = rs.pool.get(head.to)
        reasons = []
        if target is not None:
            if any(item.msg == head.msg for item in target.mailbox):
                if target.exited:
                    reasons.append(Prereq(head.to, "exit"))
                reasons.append(Prereq(head.to, "deliver", head.msg.tag))
            elif any(
                isinstance(e, RecH) and e.tag == head.msg.tag
                for e in target.history
            ):
                reasons.append(Prereq(head.to, "rec", head.msg.tag))
                reasons.append(Prereq(head.to, "deliver", head.msg.tag))
        if not reasons:  # message vanished entirely: internal inconsistency
            raise RuntimeError(f"message {tag_name(head.msg.tag)} untracked")
        return UndoCheck(False, reasons)
    if isinstance(head, RecH):
        if head.index > len(proc.mailbox):
            # only reachable through causally inconsistent deliver-undos
            return UndoCheck(False, [Prereq(pid, "deliver", head.tag)])
        return UndoCheck(True)
    raise TypeError(f"unhandled entry {head!r}")  # pragma: no cover


def can_undo_deliver(rs: RSystem, pid: int) -> UndoCheck:
    """Whether the most recent delivery to pid may be undone (mailbox tail)."""
    proc = rs.pool.get(pid)
    if proc is None:
        return UndoCheck(False, [Prereq(pid, "nothing")])
    if proc.exited:
        return UndoCheck(False, [Prereq(pid, "exit")])
    if not proc.mailbox:
        return UndoCheck(False, [Prereq(pid, "nothing")])
    tail = proc.mailbox[-1]
    # a consumed message delivered after the tail depends on its delivery
    blockers = [
        e for e in proc.history
        if isinstance(e, RecH) and e.seq > tail.seq
    ]
    if blockers:
        reasons = []
        for e in sorted(blockers, key=lambda e: -e.seq):
            reasons.append(Prereq(pid, "rec", e.tag))
            reasons.append(Prereq(pid, "deliver", e.tag))
        return UndoCheck(False, reasons)
    return UndoCheck(True)


def bwd_step(rs: RSystem, pid: int) -> tuple[Optional[Event], RSystem]:
    """Undo pid's most recent history entry (guards must hold, see can_undo)."""
    check = can_undo(rs, pid)
    if not check.ok:
        raise BlockedUndoError(pid, check.reasons)
    new = deepcopy(rs)
    proc = new.pool[pid]
    head = proc.history.pop()
    if isinstance(head, ExitH):
        proc.ls = head.ls
        return Event(pid, ExitA()), new
    if isinstance(head, LocalH):
        proc.ls = head.ls
        return None, new
    if isinstance(head, SelfH):
        proc.ls = head.ls
        return None, new
    if isinstance(head, SpawnH):
        del new.pool[head.child]
        proc.ls = head.ls
        new._push_log(pid, SpawnA(head.child))
        return Event(pid, SpawnA(head.child)), new
    if isinstance(head, SendH):
        q = new.network[(pid, head.to)]
        q.pop()
        if not q:
            del new.network[(pid, head.to)]
        del new.origin[head.msg.tag]
        proc.ls = head.ls
        new._push_log(pid, SendLogA(head.msg.tag))
        return Event(pid, SendA(head.msg.tag, head.to)), new
    if isinstance(head, RecH):
        item = MailboxItem(Message(head.tag, head.value), head.seq)
        proc.mailbox = put(proc.mailbox, head.index, item)
        proc.ls = head.ls
        new._push_log(pid, RecA(head.tag))
        return Event(pid, RecA(head.tag)), new
    raise TypeError(f"unhandled entry {head!r}")  # pragma: no cover


def bwd_deliver(rs: RSystem, pid: int) -> tuple[Event, RSystem]:
    """Undo the delivery of the message at pid's mailbox tail."""
    check = can_undo_deliver(rs, pid)
    if not check.ok:
        raise BlockedUndoError(pid, check.reasons)
    new = deepcopy(rs)
    proc = new.pool[pid]
    item = proc.mailbox.pop()
    sender = new.origin[item.msg.tag]
    new.network.setdefault((sender, pid), deque()).appendleft(item.msg)
    proc.deliver_count -= 1
    return Event(pid, DeliverA(item.msg.tag)), new


def put(mailbox: list[MailboxItem], index: int, item: MailboxItem) -> list[MailboxItem]:
    """Insert at index; the inverse of removing position index (matchrec)."""
    if index > len(mailbox):
        raise ValueError(f"put index {index} beyond mailbox of {len(mailbox)}")
    return mailbox[:index] + [item] + mailbox[index:]


class BlockedUndoError(Exception):
    def __init__(self, pid: int, reasons: list[Prereq]):
        super().__init__(
            f"cannot undo on {pid_name(pid)}: "
            + "; ".join(r.describe() for r in reasons)
        )
        self.pid = pid
        self.reasons = reasons


# --- sessions --------------------------------------------------------------------------


@dataclass(frozen=True)
class StuckAtReceive(_Immutable):
    pid: int
    tag: int  # the logged tag the receive cannot consume


@dataclass
class DebugSession:
    """One reversible-debugging session: system state plus its recorded past.

    ``recorded`` holds the events performed and not yet undone (the session
    trace); ``journal`` interleaves silent steps and deliveries so that a
    plain "step backward" knows whether pid's most recent step was a
    delivery or a history-backed step.
    """

    program: Program
    rsystem: RSystem
    entry: str = "main"
    recorded: list[Event] = field(default_factory=list)
    journal: list[tuple[int, str]] = field(default_factory=list)  # (pid, kind)
    free_running: bool = False  # no-log session: logged-kind steps are free

    def trace(self) -> Trace:
        return trace_of_events(self.recorded)

    # -- forward ------------------------------------------------------------------

    def fwd(self, choice: TransitionChoice) -> Optional[Event]:
        ev, self.rsystem = fwd_step(self.rsystem, self.program, choice)
        if isinstance(choice, DeliverChoice):
            self.journal.append((choice.target, "deliver"))
        else:
            kind = "exit"
            proc = self.rsystem.pool[choice.pid]
            if proc.history:
                kind = _entry_prereq(choice.pid, proc.history[-1]).kind
            self.journal.append((choice.pid, kind))
        if ev is not None:
            self.recorded.append(ev)
        return ev

    def step_fwd(self, pid: int) -> Optional[Event]:
        """User-driven single step of pid: its own rule, or its delivery."""
        if proc_step_kind(self.rsystem, self.program, pid) is not None:
            return self.fwd(ProcChoice(pid))
        proc = self.rsystem.pool.get(pid)
        if proc is not None and not proc.exited:
            adm = admissible(self.rsystem.log, pid, self.rsystem.network, proc.mailbox)
            if adm is not None:
                return self.fwd(DeliverChoice(adm[0], pid))
        raise InapplicableChoice(f"nothing enabled for {pid_name(pid)}")

    # -- backward -----------------------------------------------------------------

    def _unrecord(self, ev: Optional[Event]) -> None:
        if ev is None:
            return
        for i in range(len(self.recorded) - 1, -1, -1):
            if self.recorded[i] == ev:
                del self.recorded[i]
                return

    def _unjournal(self, pid: int, deliver: bool) -> None:
        for i in range(len(self.journal) - 1, -1, -1):
            p, kind = self.journal[i]
            if p == pid and (kind == "deliver") == deliver:
                del self.journal[i]
                return

    def bwd_head(self, pid: int) -> Optional[Event]:
        ev, self.rsystem = bwd_step(self.rsystem, pid)
        self._unjournal(pid, deliver=False)
        self._unrecord(ev)
        return ev

    def bwd_deliver(self, pid: int) -> Event:
        ev, self.rsystem = bwd_deliver(self.rsystem, pid)
        self._unjournal(pid, deliver=True)
        self._unrecord(ev)
        return ev

    def step_bwd(self, pid: int) -> Optional[Event]:
        """Undo pid's most recent step, whichever kind it was."""
        for p, kind in reversed(self.journal):
            if p == pid:
                if kind == "deliver":
                    return self.bwd_deliver(pid)
                return self.bwd_head(pid)
        raise BlockedUndoError(pid, [Prereq(pid, "nothing")])


def replay(
    program: Program,
    log: Log,
    budget: int = 10_000,
    entry: str = "main",
) -> "ReplayResult":
    """Replay a log to its end with the deterministic driver.

    Drives logged actions, unlogged local/self/exit steps and admissible
    deliveries until nothing remains; logged-kind steps beyond the log are
    never taken (the caller may continue in free mode afterwards). A log
    whose next receive can never consume its message reports StuckAtReceive.
    """
    session = DebugSession(program, initial_rsystem(program, log, entry), entry)
    steps = _drive(session, budget, stop_event=None)
    stuck = None
    if session.rsystem.log:
        stuck = _diagnose_stuck(session)
    return ReplayResult(session, session.trace(), steps, stuck)


@dataclass
class ReplayResult:
    session: DebugSession
    trace: Trace
    steps: int
    stuck: Optional[StuckAtReceive]


def _allowed_proc_step(session: DebugSession, pid: int) -> bool:
    kind = proc_step_kind(session.rsystem, session.program, pid)
    if kind is None:
        return False
    if session.free_running:
        return True
    if kind in ("exit", "local", "self"):
        return True
    return bool(session.rsystem.remaining(pid))  # logged-kind steps need the log


def _pick_step(session: DebugSession, cursor: int) -> Optional[TransitionChoice]:
    rs = session.rsystem
    pids = sorted(rs.pool)
    if pids:
        ordered = [p for p in pids if p >= cursor] + [p for p in pids if p < cursor]
        for p in ordered:
            if _allowed_proc_step(session, p):
                return ProcChoice(p)
        for p in ordered:
            proc = rs.pool[p]
            if proc.exited:
                continue
            adm = admissible(rs.log, p, rs.network, proc.mailbox)
            if adm is not None:
                return DeliverChoice(adm[0], p)
    return None


def _drive(session: DebugSession, budget: int, stop_event) -> int:
    """Round-robin deterministic driver; returns steps taken."""
    steps = 0
    cursor = 0
    while steps < budget:
        choice = _pick_step(session, cursor)
        if choice is None:
            break
        if isinstance(choice, ProcChoice):
            cursor = choice.pid + 1
        ev = session.fwd(choice)
        steps += 1
        if stop_event is not None and ev is not None and stop_event(ev):
            break
    return steps


def _diagnose_stuck(session: DebugSession) -> StuckAtReceive:
    rs = session.rsystem
    for pid in sorted(rs.log):
        head = rs.log[pid][0]
        if isinstance(head, RecA):
            return StuckAtReceive(pid, head.tag)
    pid = sorted(rs.log)[0]
    raise ReplayDivergenceError(pid, format_action(rs.log[pid][0]), "stuck")


@dataclass
class ContinueResult:
    steps: int
    trace: Trace
    stop_reason: str  # "completed" | "stuck" | "budget"


def continue_free(session: DebugSession, seed: int = 0, budget: int = 10_000) -> ContinueResult:
    """Run past the log with fresh ids, choosing seeded-random steps."""
    session.free_running = True
    rng = random.Random(seed)
    steps = 0
    while steps < budget:
        rs = session.rsystem
        options: list[TransitionChoice] = []
        for p in sorted(rs.pool):
            if _allowed_proc_step(session, p):
                options.append(ProcChoice(p))
            proc = rs.pool[p]
            if not proc.exited:
                adm = admissible(rs.log, p, rs.network, proc.mailbox)
                if adm is not None:
                    options.append(DeliverChoice(adm[0], p))
        if not options:
            alive = [p for p, proc in rs.pool.items() if not proc.exited]
            return ContinueResult(steps, session.trace(), "stuck" if alive else "completed")
        session.fwd(rng.choice(options))
        steps += 1
    return ContinueResult(steps, session.trace(), "budget")


# --- controlled requests -------------------------------------------------------------


@dataclass(frozen=True)
class SendOf(_Immutable):
    tag: int


@dataclass(frozen=True)
class RecOf(_Immutable):
    tag: int


@dataclass(frozen=True)
class DeliverOf(_Immutable):
    tag: int


@dataclass(frozen=True)
class SpawnOf(_Immutable):
    pid: int


@dataclass(frozen=True)
class ExitOf(_Immutable):
    pid: int


@dataclass(frozen=True)
class Deadlock(_Immutable):
    pass


@dataclass(frozen=True)
class OrphanFound(_Immutable):
    pass


@dataclass(frozen=True)
class LostFound(_Immutable):
    pass


Target = Union[SendOf, RecOf, DeliverOf, SpawnOf, ExitOf, Deadlock, OrphanFound, LostFound]


@dataclass(frozen=True)
class StepFwd(_Immutable):
    pid: int


@dataclass(frozen=True)
class StepBwd(_Immutable):
    pid: int


@dataclass(frozen=True)
class FwdUntil(_Immutable):
    target: Target


@dataclass(frozen=True)
class BwdUntil(_Immutable):
    target: Target


@dataclass(frozen=True)
class RollbackSteps(_Immutable):
    pid: int
    n: int


Request = Union[StepFwd, StepBwd, FwdUntil, BwdUntil, RollbackSteps]


@dataclass
class StepReport:
    reached: bool
    steps: int
    detail: str = ""
    blocked: list[Prereq] = field(default_factory=list)


class RequestError(Exception):
    pass


def _event_matches(target: Target, ev: Event) -> bool:
    a = ev.action
    if isinstance(target, SendOf):
        return isinstance(a, SendA) and a.tag == target.tag
    if isinstance(target, RecOf):
        return isinstance(a, RecA) and a.tag == target.tag
    if isinstance(target, DeliverOf):
        return isinstance(a, DeliverA) and a.tag == target.tag
    if isinstance(target, SpawnOf):
        return isinstance(a, SpawnA) and a.child == target.pid
    if isinstance(target, ExitOf):
        return isinstance(a, ExitA) and ev.pid == target.pid
    return False


def request(session: DebugSession, req: Request, budget: int = 10_000) -> StepReport:
    """Apply one controlled request to a session."""
    if isinstance(req, StepFwd):
        try:
            session.step_fwd(req.pid)
        except InapplicableChoice as exc:
            return StepReport(False, 0, str(exc))
        return StepReport(True, 1)

    if isinstance(req, StepBwd):
        try:
            session.step_bwd(req.pid)
        except BlockedUndoError as exc:
            return StepReport(False, 0, str(exc), blocked=list(exc.reasons))
        return StepReport(True, 1)

    if isinstance(req, FwdUntil):
        return _fwd_until(session, req.target, budget)

    if isinstance(req, BwdUntil):
        return _bwd_until(session, req.target, budget)

    if isinstance(req, RollbackSteps):
        done = 0
        for _ in range(req.n):
            rep = _force_undo_head(session, req.pid, budget)
            if not rep.reached:
                return StepReport(False, done, rep.detail, rep.blocked)
            done += rep.steps
        return StepReport(True, done)

    raise RequestError(f"unknown request {req!r}")


def _fwd_until(session: DebugSession, target: Target, budget: int) -> StepReport:
    from .analysis import symptoms  # local import to avoid a module cycle

    symptom_kind = {
        Deadlock: "deadlock", OrphanFound: "orphan", LostFound: "lost"
    }.get(type(target))

    if symptom_kind is None:
        hit = [False]

        def stop(ev: Event) -> bool:
            if _event_matches(target, ev):
                hit[0] = True
                return True
            return False

        steps = _drive(session, budget, stop)
        if hit[0]:
            return StepReport(True, steps)
        return StepReport(False, steps, "nothing left to run before the target fired")

    # symptom targets: run to quiescence, then judge the recorded trace
    steps = _drive(session, budget, None)
    s = symptoms(session.trace())
    found = {
        "deadlock": bool(s.blocked),
        "orphan": bool(s.orphan),
        "lost": bool(s.lost),
    }[symptom_kind]
    detail = f"{symptom_kind} {'found' if found else 'not found'} at quiescence"
    return StepReport(found, steps, detail)


def _locate_target(session: DebugSession, target: Target) -> tuple[int, str, Optional[int]]:
    """(pid, kind, ident) of the recorded step a BwdUntil must undo."""
    for ev in reversed(session.recorded):
        a = ev.action
        if isinstance(target, SendOf) and isinstance(a, SendA) and a.tag == target.tag:
            return ev.pid, "send", target.tag
        if isinstance(target, RecOf) and isinstance(a, RecA) and a.tag == target.tag:
            return ev.pid, "rec", target.tag
        if isinstance(target, DeliverOf) and isinstance(a, DeliverA) and a.tag == target.tag:
            return ev.pid, "deliver", target.tag
        if isinstance(target, SpawnOf) and isinstance(a, SpawnA) and a.child == target.pid:
            return ev.pid, "spawn", target.pid
        if isinstance(target, ExitOf) and isinstance(a, ExitA) and ev.pid == target.pid:
            return ev.pid, "exit", None
    raise RequestError(f"target {target!r} not in the session's recorded past")


def _bwd_until(session: DebugSession, target: Target, budget: int) -> StepReport:
    if isinstance(target, (Deadlock, OrphanFound, LostFound)):
        raise RequestError("symptom targets make no sense going backward")
    pid, kind, ident = _locate_target(session, target)
    return resolve_prerequisite(session, Prereq(pid, kind, ident), budget)


def _force_undo_head(session: DebugSession, pid: int, budget: int) -> StepReport:
    """Undo pid's most recent history entry, resolving prerequisites first."""
    steps = 0
    for _ in range(max(1, budget)):
        check = can_undo(session.rsystem, pid)
        if check.ok:
            session.bwd_head(pid)
            return StepReport(True, steps + 1)
        if check.reasons and check.reasons[0].kind == "nothing":
            return StepReport(False, steps, "nothing to undo", check.reasons)
        for sub in check.reasons:
            rep = resolve_prerequisite(session, sub, budget)
            steps += rep.steps
            if not rep.reached:
                return StepReport(False, steps, rep.detail, rep.blocked)
    return StepReport(False, steps, "undo budget exhausted")


def _history_contains(session: DebugSession, pr: Prereq) -> bool:
    proc = session.rsystem.pool.get(pr.pid)
    if proc is None:
        return False
    for e in proc.history:
        got = _entry_prereq(pr.pid, e)
        if got.kind == pr.kind and got.ident == pr.ident:
            return True
    return False


def _delivered_now(session: DebugSession, pid: int, tag: int) -> bool:
    proc = session.rsystem.pool.get(pid)
    if proc is None:
        return False
    if any(item.msg.tag == tag for item in proc.mailbox):
        return True
    return any(isinstance(e, RecH) and e.tag == tag for e in proc.history)


def resolve_prerequisite(session: DebugSession, pr: Prereq, budget: int = 10_000) -> StepReport:
    """Undo everything the prerequisite depends on, then the prerequisite.

    This is the executable meaning of one entry in a Blocked list: undoing
    in reverse dependency order, recursing through can_undo chains.
    """
    steps = 0

    def spend(n: int) -> None:
        nonlocal steps
        steps += n
        if steps > budget:
            raise RequestError("undo budget exhausted")

    def resolve(pr: Prereq) -> None:
        if pr.kind == "nothing":
            return
        if pr.kind == "steps":
            while True:
                proc = session.rsystem.pool.get(pr.pid)
                if proc is None or not proc.history:
                    return
                check = can_undo(session.rsystem, pr.pid)
                if check.ok:
                    session.bwd_head(pr.pid)
                    spend(1)
                else:
                    for sub in check.reasons:
                        resolve(sub)
        if pr.kind == "deliver":
            while _delivered_now(session, pr.pid, pr.ident):
                check = can_undo_deliver(session.rsystem, pr.pid)
                proc = session.rsystem.pool[pr.pid]
                consumed = any(
                    isinstance(e, RecH) and e.tag == pr.ident for e in proc.history
                )
                if consumed:
                    resolve(Prereq(pr.pid, "rec", pr.ident))
                    continue
                if not check.ok:
                    for sub in check.reasons:
                        resolve(sub)
                    continue
                if proc.mailbox and proc.mailbox[-1].msg.tag == pr.ident:
                    session.bwd_deliver(pr.pid)
                    spend(1)
                else:
                    # later deliveries sit above; undo the tail first
                    resolve(Prereq(pr.pid, "deliver", proc.mailbox[-1].msg.tag))
            return
        while _history_contains(session, pr):
            check = can_undo(session.rsystem, pr.pid)
            if check.ok:
                session.bwd_head(pr.pid)
                spend(1)
            else:
                for sub in check.reasons:
                    resolve(sub)

    try:
        resolve(pr)
    except BlockedUndoError as exc:
        return StepReport(False, steps, str(exc), blocked=list(exc.reasons))
    return StepReport(True, steps)
