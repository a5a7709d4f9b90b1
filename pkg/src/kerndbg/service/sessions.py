"""Transport-agnostic debug sessions and the JSON method surface.

A manager owns any number of sessions. Mutating methods return (result,
notifications); each notification is a state_changed snapshot for the
session it concerns. Snapshots serialize deterministically so that a fixed
request script yields byte-identical snapshot streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .. import analysis, rdebug
from ..lang.ast import Program, format_value
from ..lang.parser import KernSyntaxError, parse
from ..runtime import InapplicableChoice
from ..trace import (
    EventRef, Log, Trace, events_from_json, events_to_json, format_action,
    log_from_json, log_of, log_to_json, parse_pid, parse_tag, pid_name,
    tag_name, trace_of_events,
)


class SessionError(Exception):
    pass


@dataclass
class Session:
    id: str
    program: Program
    entry: str
    dsession: rdebug.DebugSession
    loaded_trace: Optional[Trace] = None  # full original recording, when given
    parent: Optional[str] = None
    seq: int = 0  # snapshot sequence number
    had_log: bool = False

    @property
    def mode(self) -> str:
        if self.dsession.rsystem.log:
            return "replay"
        return "free" if self.had_log else "record"

    def analysis_trace(self) -> Trace:
        """The trace race sets are computed on: the loaded recording if any,
        else what the session has recorded so far."""
        if self.loaded_trace is not None:
            return self.loaded_trace
        return self.dsession.trace()


def _proc_status(session: Session, pid: int) -> str:
    proc = session.dsession.rsystem.pool[pid]
    if proc.exited:
        return "exited"
    if rdebug.proc_step_kind(session.dsession.rsystem, session.program, pid) is not None:
        return "running"
    return "blocked"


def snapshot(session: Session) -> dict:
    rs = session.dsession.rsystem
    procs = []
    for pid in sorted(rs.pool):
        proc = rs.pool[pid]
        remaining = rs.remaining(pid)
        procs.append({
            "pid": pid_name(pid),
            "status": _proc_status(session, pid),
            "mailbox": [
                {"tag": tag_name(item.msg.tag), "value": format_value(item.msg.value)}
                for item in proc.mailbox
            ],
            "history_len": len(proc.history),
            "next_log": format_action(remaining[0]) if remaining else None,
        })
    network = []
    for (sender, target) in sorted(rs.network):
        q = rs.network[(sender, target)]
        if not q:
            continue
        network.append({
            "from": pid_name(sender),
            "to": pid_name(target),
            "messages": [
                {"tag": tag_name(m.tag), "value": format_value(m.value)} for m in q
            ],
        })
    return {
        "session": session.id,
        "seq": session.seq,
        "mode": session.mode,
        "parent": session.parent,
        "processes": procs,
        "network": network,
        "log_remaining": {
            pid_name(p): [format_action(a) for a in rs.log[p]] for p in sorted(rs.log)
        },
        "events": [
            {"pid": pid_name(ev.pid), "action": format_action(ev.action)}
            for ev in session.dsession.recorded
        ],
    }


def _parse_target(obj: dict) -> rdebug.Target:
    kind = obj.get("kind")
    if kind == "send":
        return rdebug.SendOf(parse_tag(obj["tag"]))
    if kind == "rec":
        return rdebug.RecOf(parse_tag(obj["tag"]))
    if kind == "deliver":
        return rdebug.DeliverOf(parse_tag(obj["tag"]))
    if kind == "spawn":
        return rdebug.SpawnOf(parse_pid(obj["pid"]))
    if kind == "exit":
        return rdebug.ExitOf(parse_pid(obj["pid"]))
    if kind == "deadlock":
        return rdebug.Deadlock()
    if kind == "orphan":
        return rdebug.OrphanFound()
    if kind == "lost":
        return rdebug.LostFound()
    raise SessionError(f"unknown target kind {kind!r}")


def _report_json(rep: rdebug.StepReport) -> dict:
    return {
        "reached": rep.reached,
        "steps": rep.steps,
        "detail": rep.detail,
        "blocked": [p.describe() for p in rep.blocked],
    }


class SessionManager:
    """Dispatches protocol methods; one instance per connection."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._counter = 0

    # -- helpers ---------------------------------------------------------------

    def _new_id(self) -> str:
        self._counter += 1
        return f"s{self._counter}"

    def _get(self, params: dict) -> Session:
        sid = params.get("session")
        if sid not in self._sessions:
            raise SessionError(f"unknown session {sid!r}")
        return self._sessions[sid]

    def _notify(self, session: Session) -> dict:
        session.seq += 1
        return {"method": "state_changed", "params": snapshot(session)}

    # -- methods ---------------------------------------------------------------

    def dispatch(self, method: str, params: dict) -> tuple[dict, list[dict]]:
        handler = getattr(self, f"m_{method}", None)
        if handler is None:
            raise SessionError(f"unknown method {method!r}")
        return handler(params or {})

    def m_load(self, params: dict) -> tuple[dict, list[dict]]:
        source = params.get("program")
        if not isinstance(source, str):
            raise SessionError("load needs program source text")
        entry = params.get("entry", "main")
        try:
            program = parse(source)
        except KernSyntaxError as exc:
            raise SessionError(f"parse error at {exc.line}:{exc.col}: {exc.msg}") from exc
        if (entry, 0) not in program.fundefs:
            raise SessionError(f"entry function {entry}/0 is not defined")

        loaded_trace = None
        if params.get("trace") is not None:
            events = events_from_json(params["trace"])
            loaded_trace = trace_of_events(events)
            log = log_of(loaded_trace)
        elif params.get("log") is not None:
            log = log_from_json(params["log"])
        else:
            log = Log({})

        dsession = rdebug.DebugSession(
            program, rdebug.initial_rsystem(program, log, entry), entry
        )
        if not log.procs:
            dsession.free_running = True  # record mode: no log to follow
        sid = self._new_id()
        session = Session(sid, program, entry, dsession,
                          loaded_trace=loaded_trace,
                          parent=params.get("parent"),
                          had_log=bool(log.procs))
        self._sessions[sid] = session
        note = self._notify(session)
        return {"session": sid, "snapshot": note["params"]}, [note]

    def m_snapshot(self, params: dict) -> tuple[dict, list[dict]]:
        session = self._get(params)
        return snapshot(session), []

    def m_step_fwd(self, params: dict) -> tuple[dict, list[dict]]:
        session = self._get(params)
        pid = parse_pid(params["pid"])
        try:
            ev = session.dsession.step_fwd(pid)
        except (InapplicableChoice, rdebug.ReplayDivergenceError) as exc:
            raise SessionError(str(exc)) from exc
        note = self._notify(session)
        result = {
            "event": format_action(ev.action) if ev is not None else None,
            "pid": pid_name(ev.pid) if ev is not None else pid_name(pid),
        }
        return result, [note]

    def m_step_bwd(self, params: dict) -> tuple[dict, list[dict]]:
        session = self._get(params)
        pid = parse_pid(params["pid"])
        try:
            ev = session.dsession.step_bwd(pid)
        except rdebug.BlockedUndoError as exc:
            raise BlockedError(exc) from exc
        note = self._notify(session)
        result = {
            "event": format_action(ev.action) if ev is not None else None,
            "pid": pid_name(pid),
        }
        return result, [note]

    def m_run_until(self, params: dict) -> tuple[dict, list[dict]]:
        session = self._get(params)
        target = _parse_target(params.get("target") or {})
        rep = rdebug.request(session.dsession, rdebug.FwdUntil(target))
        note = self._notify(session)
        return _report_json(rep), [note]

    def m_rollback_until(self, params: dict) -> tuple[dict, list[dict]]:
        session = self._get(params)
        target = _parse_target(params.get("target") or {})
        try:
            rep = rdebug.request(session.dsession, rdebug.BwdUntil(target))
        except rdebug.RequestError as exc:
            raise SessionError(str(exc)) from exc
        note = self._notify(session)
        return _report_json(rep), [note]

    def m_race_sets(self, params: dict) -> tuple[dict, list[dict]]:
        session = self._get(params)
        trace = session.analysis_trace()
        sets = analysis.all_race_sets(trace)
        return {
            "race_sets": [
                sets[ref].to_json()
                for ref in sorted(sets, key=lambda r: (r.pid, r.index))
            ]
        }, []

    def m_fork_variant(self, params: dict) -> tuple[dict, list[dict]]:
        session = self._get(params)
        recv = params.get("receive") or {}
        ref = EventRef(parse_pid(recv["pid"]), int(recv["index"]))
        tag = parse_tag(params["tag"])
        trace = session.analysis_trace()
        try:
            variant = analysis.race_variant(trace, ref, tag)
        except ValueError as exc:
            raise SessionError(str(exc)) from exc
        dsession = rdebug.DebugSession(
            session.program,
            rdebug.initial_rsystem(session.program, variant, session.entry),
            session.entry,
        )
        sid = self._new_id()
        child = Session(sid, session.program, session.entry, dsession, parent=session.id)
        self._sessions[sid] = child
        note = self._notify(child)
        return {"session": sid, "log": log_to_json(variant),
                "snapshot": note["params"]}, [note]

    def m_list_sessions(self, params: dict) -> tuple[dict, list[dict]]:
        return {
            "sessions": [
                {"session": s.id, "mode": s.mode, "parent": s.parent}
                for s in self._sessions.values()
            ]
        }, []

    def m_close(self, params: dict) -> tuple[dict, list[dict]]:
        session = self._get(params)
        del self._sessions[session.id]
        return {"closed": session.id}, []


class BlockedError(SessionError):
    """A rejected undo; carries the prerequisite list for the UI."""

    def __init__(self, cause: rdebug.BlockedUndoError):
        super().__init__(str(cause))
        self.prerequisites = [p.describe() for p in cause.reasons]
        self.structured = [
            {
                "pid": pid_name(p.pid),
                "kind": p.kind,
                "ident": (
                    pid_name(p.ident) if p.kind == "spawn" and p.ident is not None
                    else tag_name(p.ident) if p.ident is not None
                    else None
                ),
            }
            for p in cause.reasons
        ]


def handle_request(manager: SessionManager, request: dict) -> tuple[dict, list[dict]]:
    """One protocol request -> (response, notifications)."""
    rid = request.get("id")
    method = request.get("method")
    params = request.get("params") or {}
    try:
        result, notes = manager.dispatch(method, params)
        return {"id": rid, "result": result}, notes
    except BlockedError as exc:
        return {
            "id": rid,
            "error": {
                "message": str(exc),
                "prerequisites": exc.prerequisites,
                "prerequisites_struct": exc.structured,
            },
        }, []
    except (SessionError, KeyError, ValueError) as exc:
        return {"id": rid, "error": {"message": str(exc)}}, []
