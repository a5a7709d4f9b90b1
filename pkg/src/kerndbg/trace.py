"""Traces and logs of message-passing executions.

A trace maps each pid to the sequence of global actions it performed
(spawn, exit, send, deliver, rec); message delivery is attributed to the
target process. A log is the projection that drops delivers and exits and
erases send targets; it is what the replay debugger consumes.

This module owns well-formedness checking, the per-process ``precedes``
order, the happened-before relation and independence, canonical renaming
(which decides trace/log equality), and the JSON file formats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union


class _Immutable:
    def __deepcopy__(self, memo):
        return self

    def __copy__(self):
        return self


# --- actions and events -------------------------------------------------------


@dataclass(frozen=True)
class SpawnA(_Immutable):
    child: int


@dataclass(frozen=True)
class ExitA(_Immutable):
    pass


@dataclass(frozen=True)
class SendA(_Immutable):
    tag: int
    to: int


@dataclass(frozen=True)
class DeliverA(_Immutable):
    tag: int


@dataclass(frozen=True)
class RecA(_Immutable):
    tag: int


Action = Union[SpawnA, ExitA, SendA, DeliverA, RecA]


@dataclass(frozen=True)
class SendLogA(_Immutable):
    """send(tag) in a log: the target is erased."""

    tag: int


LogAction = Union[SpawnA, SendLogA, RecA]


@dataclass(frozen=True)
class Event(_Immutable):
    pid: int
    action: Action


@dataclass(frozen=True)
class EventRef(_Immutable):
    """Positional identity of an event: pid and 0-based index in its sequence."""

    pid: int
    index: int


def pid_name(p: int) -> str:
    return f"p{p}"


def tag_name(t: int) -> str:
    return f"l{t}"


def parse_pid(s: str) -> int:
    if not (s.startswith("p") and s[1:].isdigit() and int(s[1:]) > 0):
        raise ValueError(f"not a pid: {s!r}")
    return int(s[1:])


def parse_tag(s: str) -> int:
    if not (s.startswith("l") and s[1:].isdigit() and int(s[1:]) > 0):
        raise ValueError(f"not a tag: {s!r}")
    return int(s[1:])


def format_action(a: Action | LogAction) -> str:
    if isinstance(a, SpawnA):
        return f"spawn({pid_name(a.child)})"
    if isinstance(a, ExitA):
        return "exit"
    if isinstance(a, SendA):
        return f"send({tag_name(a.tag)},{pid_name(a.to)})"
    if isinstance(a, SendLogA):
        return f"send({tag_name(a.tag)})"
    if isinstance(a, DeliverA):
        return f"deliver({tag_name(a.tag)})"
    if isinstance(a, RecA):
        return f"rec({tag_name(a.tag)})"
    raise TypeError(f"not an action: {a!r}")


# --- trace / log ----------------------------------------------------------------


@dataclass
class Trace:
    procs: dict[int, tuple[Action, ...]]

    def pids(self) -> list[int]:
        return sorted(self.procs)

    def seq(self, pid: int) -> tuple[Action, ...]:
        return self.procs.get(pid, ())

    def action(self, ref: EventRef) -> Action:
        return self.procs[ref.pid][ref.index]

    def events(self) -> list[EventRef]:
        return [
            EventRef(p, i) for p in self.pids() for i in range(len(self.procs[p]))
        ]

    def all_pids(self) -> set[int]:
        """Pids in the domain plus every spawn target."""
        out = set(self.procs)
        for seq in self.procs.values():
            for a in seq:
                if isinstance(a, SpawnA):
                    out.add(a.child)
        return out

    def __eq__(self, other):
        return isinstance(other, Trace) and self.procs == other.procs


@dataclass
class Log:
    procs: dict[int, tuple[LogAction, ...]]

    def pids(self) -> list[int]:
        return sorted(self.procs)

    def seq(self, pid: int) -> tuple[LogAction, ...]:
        return self.procs.get(pid, ())

    def __eq__(self, other):
        return isinstance(other, Log) and self.procs == other.procs


def trace_of_events(events: Iterable[Event]) -> Trace:
    procs: dict[int, list[Action]] = {}
    for ev in events:
        procs.setdefault(ev.pid, []).append(ev.action)
    return Trace({p: tuple(seq) for p, seq in procs.items()})


def log_of(trace: Trace) -> Log:
    """Drop delivers and exits, erase send targets; order is preserved."""
    procs: dict[int, tuple[LogAction, ...]] = {}
    for p in trace.pids():
        out: list[LogAction] = []
        for a in trace.seq(p):
            if isinstance(a, SpawnA):
                out.append(a)
            elif isinstance(a, SendA):
                out.append(SendLogA(a.tag))
            elif isinstance(a, RecA):
                out.append(a)
        procs[p] = tuple(out)
    return Log(procs)


# --- well-formedness --------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    rule: str  # "tag-unique" | "deliver-sent" | "rec-delivered" | "spawn-unique"
    #            | "spawn-missing" | "exit-last" | "namespace"
    message: str
    ref: Optional[EventRef] = None


def well_formed(trace: Trace) -> list[Violation]:
    """Empty list iff the trace satisfies all structural rules."""
    out: list[Violation] = []
    sends: dict[int, list[EventRef]] = {}
    delivers: dict[int, list[EventRef]] = {}
    recs: dict[int, list[EventRef]] = {}
    spawned: dict[int, list[EventRef]] = {}

    for p in trace.pids():
        for i, a in enumerate(trace.seq(p)):
            ref = EventRef(p, i)
            if isinstance(a, SendA):
                sends.setdefault(a.tag, []).append(ref)
            elif isinstance(a, DeliverA):
                delivers.setdefault(a.tag, []).append(ref)
            elif isinstance(a, RecA):
                recs.setdefault(a.tag, []).append(ref)
            elif isinstance(a, SpawnA):
                spawned.setdefault(a.child, []).append(ref)

    for tag, refs in sends.items():
        if len(refs) > 1:
            out.append(Violation("tag-unique", f"{tag_name(tag)} sent more than once", refs[1]))
    for tag, refs in delivers.items():
        if len(refs) > 1:
            out.append(Violation("tag-unique", f"{tag_name(tag)} delivered more than once", refs[1]))
    for tag, refs in recs.items():
        if len(refs) > 1:
            out.append(Violation("tag-unique", f"{tag_name(tag)} received more than once", refs[1]))

    for tag, refs in delivers.items():
        ref = refs[0]
        send_refs = sends.get(tag)
        if not send_refs:
            out.append(Violation("deliver-sent", f"{tag_name(tag)} delivered but never sent", ref))
        else:
            act = trace.action(send_refs[0])
            if isinstance(act, SendA) and act.to != ref.pid:
                out.append(Violation(
                    "deliver-sent",
                    f"{tag_name(tag)} delivered to {pid_name(ref.pid)} but sent to {pid_name(act.to)}",
                    ref,
                ))

    for tag, refs in recs.items():
        ref = refs[0]
        ds = [d for d in delivers.get(tag, []) if d.pid == ref.pid and d.index < ref.index]
        if not ds:
            out.append(Violation(
                "rec-delivered",
                f"{tag_name(tag)} received without an earlier delivery on {pid_name(ref.pid)}",
                ref,
            ))

    for child, refs in spawned.items():
        if len(refs) > 1:
            out.append(Violation("spawn-unique", f"{pid_name(child)} spawned more than once", refs[1]))

    roots = [p for p in sorted(trace.all_pids()) if p not in spawned]
    acting_roots = [p for p in roots if trace.seq(p)]
    for p in acting_roots[1:]:
        out.append(Violation(
            "spawn-missing",
            f"{pid_name(p)} acts but is never spawned (second root)",
        ))

    for p in trace.pids():
        seq = trace.seq(p)
        for i, a in enumerate(seq):
            if isinstance(a, ExitA) and i != len(seq) - 1:
                out.append(Violation("exit-last", f"{pid_name(p)} acts after exit", EventRef(p, i)))
                break
    return out


# --- precedes / happened-before ------------------------------------------------------


def precedes(trace: Trace, e1: EventRef, e2: EventRef) -> Optional[bool]:
    """Within one pid: index order. Across pids the relation is undefined."""
    for e in (e1, e2):
        if e.index >= len(trace.seq(e.pid)):
            raise IndexError(f"event ref out of range: {e}")
    if e1.pid != e2.pid:
        return None
    return e1.index < e2.index


class HbIndex:
    """Happened-before over a trace: thin base edges plus memoized DFS closure.

    Base clauses: (1) program order between non-delivers of one pid;
    (2) delivery order between delivers of one pid; (3) spawn precedes every
    action of the child; (4) send precedes its delivery; (5) delivery
    precedes its reception; (6) everything on a pid precedes its exit.
    """

    def __init__(self, trace: Trace):
        self.trace = trace
        self._succ: dict[EventRef, tuple[EventRef, ...]] = {}
        self._reach: dict[EventRef, frozenset[EventRef]] = {}
        self._send_of: dict[int, EventRef] = {}
        self._deliver_of: dict[int, EventRef] = {}
        self._rec_of: dict[int, EventRef] = {}
        self._first_nondeliver: dict[int, EventRef] = {}
        self._first_deliver: dict[int, EventRef] = {}
        for p in trace.pids():
            for i, a in enumerate(trace.seq(p)):
                ref = EventRef(p, i)
                if isinstance(a, SendA):
                    self._send_of.setdefault(a.tag, ref)
                elif isinstance(a, DeliverA):
                    self._deliver_of.setdefault(a.tag, ref)
                    self._first_deliver.setdefault(p, ref)
                elif isinstance(a, RecA):
                    self._rec_of.setdefault(a.tag, ref)
                if not isinstance(a, DeliverA):
                    self._first_nondeliver.setdefault(p, ref)

    def _successors(self, e: EventRef) -> tuple[EventRef, ...]:
        cached = self._succ.get(e)
        if cached is not None:
            return cached
        trace = self.trace
        seq = trace.seq(e.pid)
        a = seq[e.index]
        out: list[EventRef] = []
        is_deliver = isinstance(a, DeliverA)
        for j in range(e.index + 1, len(seq)):
            b = seq[j]
            if isinstance(b, DeliverA) == is_deliver:
                out.append(EventRef(e.pid, j))  # clause 1 or clause 2 chain
                break
        if is_deliver:
            rec = self._rec_of.get(a.tag)
            if rec is not None:
                out.append(rec)  # clause 5
            if seq and isinstance(seq[-1], ExitA):
                out.append(EventRef(e.pid, len(seq) - 1))  # clause 6
        if isinstance(a, SpawnA):
            for head in (self._first_nondeliver.get(a.child), self._first_deliver.get(a.child)):
                if head is not None:
                    out.append(head)  # clause 3, thinned to chain heads
        if isinstance(a, SendA):
            d = self._deliver_of.get(a.tag)
            if d is not None:
                out.append(d)  # clause 4
        res = tuple(dict.fromkeys(out))
        self._succ[e] = res
        return res

    def _reachable(self, e: EventRef) -> frozenset[EventRef]:
        cached = self._reach.get(e)
        if cached is not None:
            return cached
        # iterative DFS; cycles cannot occur on well-formed traces
        out: set[EventRef] = set()
        stack = list(self._successors(e))
        while stack:
            x = stack.pop()
            if x in out:
                continue
            done = self._reach.get(x)
            if done is not None:
                out.add(x)
                out |= done
                continue
            out.add(x)
            stack.extend(self._successors(x))
        res = frozenset(out)
        self._reach[e] = res
        return res

    def happened_before(self, e1: EventRef, e2: EventRef) -> bool:
        if e1 == e2:
            return False
        return e2 in self._reachable(e1)


def _hb_index(trace: Trace) -> HbIndex:
    idx = getattr(trace, "_hb", None)
    if idx is None or idx.trace is not trace:
        idx = HbIndex(trace)
        trace._hb = idx  # cache on the instance; procs are never mutated
    return idx


def happened_before(trace: Trace, e1: EventRef, e2: EventRef) -> bool:
    return _hb_index(trace).happened_before(e1, e2)


def independent(trace: Trace, e1: EventRef, e2: EventRef) -> bool:
    idx = _hb_index(trace)
    return not idx.happened_before(e1, e2) and not idx.happened_before(e2, e1)


# --- canonical renaming ------------------------------------------------------------


class MalformedTraceError(Exception):
    pass


def _root_of(trace: Trace) -> int:
    spawned = {
        a.child
        for seq in trace.procs.values()
        for a in seq
        if isinstance(a, SpawnA)
    }
    roots = [p for p in sorted(trace.all_pids()) if p not in spawned and trace.seq(p)]
    if len(roots) != 1:
        raise MalformedTraceError(f"expected one root pid, found {len(roots)}")
    return roots[0]


def _canonical_maps(procs: dict[int, tuple], root: int):
    """Scan sequences of renamed pids in renamed order; number pids at spawn
    sites and tags at send sites on first encounter."""
    pid_map: dict[int, int] = {root: 1}
    tag_map: dict[int, int] = {}
    order = [root]
    i = 0
    while i < len(order):
        for a in procs.get(order[i], ()):
            if isinstance(a, SpawnA) and a.child not in pid_map:
                pid_map[a.child] = len(pid_map) + 1
                order.append(a.child)
            elif isinstance(a, (SendA, SendLogA)) and a.tag not in tag_map:
                tag_map[a.tag] = len(tag_map) + 1
        i += 1
    # deterministic fallback for ids that never went through a spawn/send site
    for p in order:
        for a in procs.get(p, ()):
            if isinstance(a, SendA) and a.to not in pid_map:
                pid_map[a.to] = len(pid_map) + 1
            elif isinstance(a, (DeliverA, RecA)) and a.tag not in tag_map:
                tag_map[a.tag] = len(tag_map) + 1
    for p in sorted(procs):
        if p not in pid_map and procs[p]:
            pid_map[p] = len(pid_map) + 1
    return pid_map, tag_map


def _rename_action(a, pid_map, tag_map):
    if isinstance(a, SpawnA):
        return SpawnA(pid_map[a.child])
    if isinstance(a, SendA):
        return SendA(tag_map[a.tag], pid_map[a.to])
    if isinstance(a, SendLogA):
        return SendLogA(tag_map[a.tag])
    if isinstance(a, DeliverA):
        return DeliverA(tag_map[a.tag])
    if isinstance(a, RecA):
        return RecA(tag_map[a.tag])
    return a


def canonicalize(trace: Trace) -> Trace:
    """Rename pids/tags to 1..n by the deterministic scan; idempotent.

    Empty sequences carry no actions and are dropped, so idle spawned
    children compare equal whether or not the writer materialized them.
    """
    procs = {p: seq for p, seq in trace.procs.items() if seq}
    if not procs:
        return Trace({})
    root = _root_of(Trace(procs))
    pid_map, tag_map = _canonical_maps(procs, root)
    renamed = {
        pid_map[p]: tuple(_rename_action(a, pid_map, tag_map) for a in seq)
        for p, seq in procs.items()
        if p in pid_map
    }
    return Trace(dict(sorted(renamed.items())))


def canonicalize_log(log: Log) -> Log:
    procs = {p: seq for p, seq in log.procs.items() if seq}
    if not procs:
        return Log({})
    spawned = {a.child for seq in procs.values() for a in seq if isinstance(a, SpawnA)}
    roots = [p for p in sorted(procs) if p not in spawned]
    if len(roots) != 1:
        raise MalformedTraceError(f"expected one root pid, found {len(roots)}")
    pid_map, tag_map = _canonical_maps(procs, roots[0])
    renamed = {
        pid_map[p]: tuple(_rename_action(a, pid_map, tag_map) for a in seq)
        for p, seq in procs.items()
        if p in pid_map
    }
    return Log(dict(sorted(renamed.items())))


def trace_equal(t1: Trace, t2: Trace) -> bool:
    return canonicalize(t1) == canonicalize(t2)


def log_equal(l1: Log, l2: Log) -> bool:
    return canonicalize_log(l1) == canonicalize_log(l2)


# --- JSON formats -------------------------------------------------------------------

TRACE_VERSION = 1


def _action_to_json(a: Action) -> dict:
    if isinstance(a, SpawnA):
        return {"kind": "spawn", "child": pid_name(a.child)}
    if isinstance(a, ExitA):
        return {"kind": "exit"}
    if isinstance(a, SendA):
        return {"kind": "send", "tag": tag_name(a.tag), "to": pid_name(a.to)}
    if isinstance(a, DeliverA):
        return {"kind": "deliver", "tag": tag_name(a.tag)}
    if isinstance(a, RecA):
        return {"kind": "rec", "tag": tag_name(a.tag)}
    raise TypeError(f"not a trace action: {a!r}")


def _action_from_json(obj: dict, where: str) -> Action:
    kind = obj.get("kind")
    try:
        if kind == "spawn":
            return SpawnA(parse_pid(obj["child"]))
        if kind == "exit":
            return ExitA()
        if kind == "send":
            return SendA(parse_tag(obj["tag"]), parse_pid(obj["to"]))
        if kind == "deliver":
            return DeliverA(parse_tag(obj["tag"]))
        if kind == "rec":
            return RecA(parse_tag(obj["tag"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise TraceFormatError(f"{where}: bad action fields: {exc}") from exc
    raise TraceFormatError(f"{where}: unknown action kind {kind!r}")


class TraceFormatError(Exception):
    pass


def events_to_json(events: Iterable[Event]) -> dict:
    return {
        "version": TRACE_VERSION,
        "events": [
            {"pid": pid_name(ev.pid), "action": _action_to_json(ev.action)}
            for ev in events
        ],
    }


def events_from_json(obj) -> list[Event]:
    if not isinstance(obj, dict) or obj.get("version") != TRACE_VERSION:
        raise TraceFormatError("missing or unsupported version field")
    raw = obj.get("events")
    if not isinstance(raw, list):
        raise TraceFormatError("missing events list")
    out: list[Event] = []
    for i, entry in enumerate(raw):
        where = f"event {i}"
        if not isinstance(entry, dict):
            raise TraceFormatError(f"{where}: not an object")
        try:
            pid = parse_pid(entry["pid"])
        except (KeyError, ValueError, TypeError) as exc:
            raise TraceFormatError(f"{where}: bad pid: {exc}") from exc
        action = entry.get("action")
        if not isinstance(action, dict):
            raise TraceFormatError(f"{where}: missing action")
        out.append(Event(pid, _action_from_json(action, where)))
    return out


@dataclass
class LoadedTrace:
    events: list[Event]
    trace: Trace
    violations: list[Violation] = field(default_factory=list)


def write_trace(path, events: Iterable[Event]) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(events_to_json(events), fp, indent=2)
        fp.write("\n")


def read_trace(path, lenient: bool = False) -> LoadedTrace:
    with open(path, "r", encoding="utf-8") as fp:
        try:
            obj = json.load(fp)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"malformed JSON: {exc}") from exc
    events = events_from_json(obj)
    trace = trace_of_events(events)
    violations = well_formed(trace)
    if violations and not lenient:
        raise TraceFormatError(
            "trace is not well-formed: " + "; ".join(v.message for v in violations)
        )
    return LoadedTrace(events, trace, violations)


def _log_action_to_json(a: LogAction) -> dict:
    if isinstance(a, SpawnA):
        return {"kind": "spawn", "child": pid_name(a.child)}
    if isinstance(a, SendLogA):
        return {"kind": "send", "tag": tag_name(a.tag)}
    if isinstance(a, RecA):
        return {"kind": "rec", "tag": tag_name(a.tag)}
    raise TypeError(f"not a log action: {a!r}")


def log_to_json(log: Log) -> dict:
    return {
        "version": TRACE_VERSION,
        "log": {
            pid_name(p): [_log_action_to_json(a) for a in log.seq(p)]
            for p in log.pids()
        },
    }


def log_from_json(obj) -> Log:
    if not isinstance(obj, dict) or obj.get("version") != TRACE_VERSION:
        raise TraceFormatError("missing or unsupported version field")
    raw = obj.get("log")
    if not isinstance(raw, dict):
        raise TraceFormatError("missing log object")
    procs: dict[int, tuple[LogAction, ...]] = {}
    for pid_s, actions in raw.items():
        try:
            pid = parse_pid(pid_s)
        except ValueError as exc:
            raise TraceFormatError(f"bad pid key {pid_s!r}") from exc
        seq: list[LogAction] = []
        for i, entry in enumerate(actions):
            where = f"log[{pid_s}][{i}]"
            kind = entry.get("kind") if isinstance(entry, dict) else None
            try:
                if kind == "spawn":
                    seq.append(SpawnA(parse_pid(entry["child"])))
                elif kind == "send":
                    seq.append(SendLogA(parse_tag(entry["tag"])))
                elif kind == "rec":
                    seq.append(RecA(parse_tag(entry["tag"])))
                else:
                    raise TraceFormatError(f"{where}: unknown action kind {kind!r}")
            except (KeyError, ValueError, TypeError) as exc:
                raise TraceFormatError(f"{where}: bad action fields: {exc}") from exc
        procs[pid] = tuple(seq)
    return Log(procs)


def write_log(path, log: Log) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(log_to_json(log), fp, indent=2)
        fp.write("\n")


def read_log(path) -> Log:
    with open(path, "r", encoding="utf-8") as fp:
        try:
            obj = json.load(fp)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"malformed JSON: {exc}") from exc
    return log_from_json(obj)


def canonical_log_bytes(log: Log) -> bytes:
    """Stable serialization of the canonical log; the replay-equivalence key."""
    return json.dumps(
        log_to_json(canonicalize_log(log)), separators=(",", ":"), sort_keys=True
    ).encode()
