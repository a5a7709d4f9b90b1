"""Small-step expression semantics for kern.

A local state is (environment, focus, stack). ``eval_step`` reduces a
non-final state by exactly one step and reports a label telling the system
layer which side effect, if any, the step requires. Steps that need a value
from the system layer (self, spawn, receive) leave a FutureVal in focus;
``bind_future`` / ``matchrec`` fill it in.

Runtime errors never raise: they reduce to a CrashVal focus with an empty
stack, which is final and which the system layer treats exactly like a
normal exit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .ast import (
    AtomLit, BinOp, Call, Case, Clause, CrashVal, Expr, FutureVal, IntLit,
    Let, ListE, ListVal, PAtom, PInt, PList, PTuple, PVar, PWild, Pattern,
    PidVal, Program, Receive, SelfE, Send, Seq, Spawn, TupleE, TupleVal,
    Value, Var, _Immutable, is_value,
)


class KernCrash(Exception):
    """Internal signal for a runtime error; converted to a CrashVal state."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


# --- continuation frames ------------------------------------------------------


@dataclass(frozen=True)
class FBinopRight(_Immutable):
    op: str
    right: Expr


@dataclass(frozen=True)
class FBinopCombine(_Immutable):
    op: str
    left: Value


@dataclass(frozen=True)
class FTupleBuild(_Immutable):
    done: tuple[Value, ...]
    pending: tuple[Expr, ...]


@dataclass(frozen=True)
class FListBuild(_Immutable):
    done: tuple[Value, ...]
    pending: tuple[Expr, ...]
    tail: Optional[Expr]


@dataclass(frozen=True)
class FListTail(_Immutable):
    done: tuple[Value, ...]


@dataclass(frozen=True)
class FLetBind(_Immutable):
    var: str
    body: Expr


@dataclass(frozen=True)
class FSeqNext(_Immutable):
    rest: Expr


@dataclass(frozen=True)
class FCaseMatch(_Immutable):
    clauses: tuple[Clause, ...]


@dataclass(frozen=True)
class FSendTarget(_Immutable):
    payload: Expr


@dataclass(frozen=True)
class FSendValue(_Immutable):
    target: Value


@dataclass(frozen=True)
class FCallArgs(_Immutable):
    fname: str
    done: tuple[Value, ...]
    pending: tuple[Expr, ...]


@dataclass(frozen=True)
class FSpawnArgs(_Immutable):
    fname: str
    done: tuple[Value, ...]
    pending: tuple[Expr, ...]


@dataclass(frozen=True)
class FReturn(_Immutable):
    """Restores the caller's environment when a call body reaches a value."""

    saved_env: tuple[tuple[str, Value], ...]


Frame = Union[
    FBinopRight, FBinopCombine, FTupleBuild, FListBuild, FListTail, FLetBind,
    FSeqNext, FCaseMatch, FSendTarget, FSendValue, FCallArgs, FSpawnArgs,
    FReturn,
]


@dataclass(frozen=True)
class LocalState(_Immutable):
    env: tuple[tuple[str, Value], ...]  # sorted (name, value) pairs
    focus: Union[Expr, Value, FutureVal]
    stack: tuple[Frame, ...]

    def env_dict(self) -> dict[str, Value]:
        return dict(self.env)

    def with_(self, *, env=None, focus=None, stack=None) -> "LocalState":
        return LocalState(
            self.env if env is None else env,
            self.focus if focus is None else focus,
            self.stack if stack is None else stack,
        )


def _env(d: dict[str, Value]) -> tuple[tuple[str, Value], ...]:
    return tuple(sorted(d.items()))


def initial_state(program: Program, fname: str, args: tuple[Value, ...]) -> LocalState:
    fd = program.lookup(fname, len(args))
    return LocalState(_env(dict(zip(fd.params, args))), fd.body, ())


def final(ls: LocalState) -> bool:
    return is_value(ls.focus) and not ls.stack


# --- evaluation labels ----------------------------------------------------------


@dataclass(frozen=True)
class Local(_Immutable):
    pass


@dataclass(frozen=True)
class SelfL(_Immutable):
    """Successor focus is the future to be bound to the running pid."""


@dataclass(frozen=True)
class SendL(_Immutable):
    value: Value
    target: int  # pid number


@dataclass(frozen=True)
class RecL(_Immutable):
    clauses: tuple[Clause, ...]


@dataclass(frozen=True)
class SpawnL(_Immutable):
    fname: str
    args: tuple[Value, ...]


EvalLabel = Union[Local, SelfL, SendL, RecL, SpawnL]

_LOCAL = Local()


def _crashed(ls: LocalState, reason: str) -> tuple[EvalLabel, LocalState]:
    return _LOCAL, LocalState(ls.env, CrashVal(reason), ())


def eval_step(ls: LocalState, program: Program) -> tuple[EvalLabel, LocalState]:
    """One deterministic reduction of a non-final local state."""
    if final(ls):
        raise ValueError("eval_step on a final state")
    try:
        return _step(ls, program)
    except KernCrash as c:
        return _crashed(ls, c.reason)


def _step(ls: LocalState, program: Program) -> tuple[EvalLabel, LocalState]:
    focus = ls.focus
    if isinstance(focus, FutureVal):
        raise ValueError("eval_step on an unbound future; bind it first")
    if is_value(focus):
        return _apply_frame(ls, focus, program)
    return _decompose(ls, focus, program)


def _decompose(ls: LocalState, e: Expr, program: Program) -> tuple[EvalLabel, LocalState]:
    if isinstance(e, IntLit):
        return _LOCAL, ls.with_(focus=e.n)
    if isinstance(e, AtomLit):
        return _LOCAL, ls.with_(focus=e.name)
    if isinstance(e, Var):
        env = ls.env_dict()
        if e.name not in env:
            raise KernCrash(f"unbound variable {e.name}")
        return _LOCAL, ls.with_(focus=env[e.name])
    if isinstance(e, TupleE):
        if not e.items:
            return _LOCAL, ls.with_(focus=TupleVal(()))
        frame = FTupleBuild((), e.items[1:])
        return _LOCAL, ls.with_(focus=e.items[0], stack=(frame,) + ls.stack)
    if isinstance(e, ListE):
        if not e.items and e.tail is None:
            return _LOCAL, ls.with_(focus=ListVal(()))
        frame = FListBuild((), e.items[1:], e.tail)
        return _LOCAL, ls.with_(focus=e.items[0], stack=(frame,) + ls.stack)
    if isinstance(e, BinOp):
        frame = FBinopRight(e.op, e.right)
        return _LOCAL, ls.with_(focus=e.left, stack=(frame,) + ls.stack)
    if isinstance(e, Let):
        frame = FLetBind(e.var, e.body)
        return _LOCAL, ls.with_(focus=e.bound, stack=(frame,) + ls.stack)
    if isinstance(e, Seq):
        frame = FSeqNext(e.rest)
        return _LOCAL, ls.with_(focus=e.first, stack=(frame,) + ls.stack)
    if isinstance(e, Case):
        frame = FCaseMatch(e.clauses)
        return _LOCAL, ls.with_(focus=e.subject, stack=(frame,) + ls.stack)
    if isinstance(e, Send):
        frame = FSendTarget(e.payload)
        return _LOCAL, ls.with_(focus=e.target, stack=(frame,) + ls.stack)
    if isinstance(e, Call):
        if not e.args:
            return _enter_call(ls, e.fname, (), program)
        frame = FCallArgs(e.fname, (), e.args[1:])
        return _LOCAL, ls.with_(focus=e.args[0], stack=(frame,) + ls.stack)
    if isinstance(e, Spawn):
        if not e.args:
            return SpawnL(e.fname, ()), ls.with_(focus=FutureVal())
        frame = FSpawnArgs(e.fname, (), e.args[1:])
        return _LOCAL, ls.with_(focus=e.args[0], stack=(frame,) + ls.stack)
    if isinstance(e, Receive):
        return RecL(e.clauses), ls.with_(focus=FutureVal())
    if isinstance(e, SelfE):
        return SelfL(), ls.with_(focus=FutureVal())
    raise TypeError(f"unhandled expression {e!r}")  # pragma: no cover


def _apply_frame(ls: LocalState, v: Value, program: Program) -> tuple[EvalLabel, LocalState]:
    if isinstance(v, CrashVal):
        # a crash value unwinds the whole stack
        return _LOCAL, LocalState(ls.env, v, ())
    frame = ls.stack[0]
    rest = ls.stack[1:]
    if isinstance(frame, FBinopRight):
        nf = FBinopCombine(frame.op, v)
        return _LOCAL, ls.with_(focus=frame.right, stack=(nf,) + rest)
    if isinstance(frame, FBinopCombine):
        return _LOCAL, ls.with_(focus=_binop(frame.op, frame.left, v), stack=rest)
    if isinstance(frame, FTupleBuild):
        done = frame.done + (v,)
        if frame.pending:
            nf = FTupleBuild(done, frame.pending[1:])
            return _LOCAL, ls.with_(focus=frame.pending[0], stack=(nf,) + rest)
        return _LOCAL, ls.with_(focus=TupleVal(done), stack=rest)
    if isinstance(frame, FListBuild):
        done = frame.done + (v,)
        if frame.pending:
            nf = FListBuild(done, frame.pending[1:], frame.tail)
            return _LOCAL, ls.with_(focus=frame.pending[0], stack=(nf,) + rest)
        if frame.tail is not None:
            nf2 = FListTail(done)
            return _LOCAL, ls.with_(focus=frame.tail, stack=(nf2,) + rest)
        return _LOCAL, ls.with_(focus=ListVal(done), stack=rest)
    if isinstance(frame, FListTail):
        if not isinstance(v, ListVal):
            raise KernCrash("list tail is not a list")
        return _LOCAL, ls.with_(focus=ListVal(frame.done + v.items), stack=rest)
    if isinstance(frame, FLetBind):
        env = ls.env_dict()
        env[frame.var] = v
        return _LOCAL, ls.with_(env=_env(env), focus=frame.body, stack=rest)
    if isinstance(frame, FSeqNext):
        return _LOCAL, ls.with_(focus=frame.rest, stack=rest)
    if isinstance(frame, FCaseMatch):
        env = ls.env_dict()
        for cl in frame.clauses:
            bound = match_pattern(cl.pattern, v, env)
            if bound is None:
                continue
            if cl.guard is not None and not eval_guard(cl.guard, bound):
                continue
            return _LOCAL, ls.with_(env=_env(bound), focus=cl.body, stack=rest)
        raise KernCrash("no matching case clause")
    if isinstance(frame, FSendTarget):
        nf = FSendValue(v)
        return _LOCAL, ls.with_(focus=frame.payload, stack=(nf,) + rest)
    if isinstance(frame, FSendValue):
        if not isinstance(frame.target, PidVal):
            raise KernCrash("send target is not a pid")
        # the send step itself: value of `T ! V` is V
        return SendL(v, frame.target.n), ls.with_(focus=v, stack=rest)
    if isinstance(frame, FCallArgs):
        done = frame.done + (v,)
        if frame.pending:
            nf = FCallArgs(frame.fname, done, frame.pending[1:])
            return _LOCAL, ls.with_(focus=frame.pending[0], stack=(nf,) + rest)
        return _enter_call(ls.with_(stack=rest), frame.fname, done, program)
    if isinstance(frame, FSpawnArgs):
        done = frame.done + (v,)
        if frame.pending:
            nf = FSpawnArgs(frame.fname, done, frame.pending[1:])
            return _LOCAL, ls.with_(focus=frame.pending[0], stack=(nf,) + rest)
        return SpawnL(frame.fname, done), ls.with_(focus=FutureVal(), stack=rest)
    if isinstance(frame, FReturn):
        return _LOCAL, ls.with_(env=frame.saved_env, focus=v, stack=rest)
    raise TypeError(f"unhandled frame {frame!r}")  # pragma: no cover


def _enter_call(ls: LocalState, fname: str, args: tuple[Value, ...], program: Program):
    fd = program.lookup(fname, len(args))
    frame = FReturn(ls.env)
    return _LOCAL, LocalState(
        _env(dict(zip(fd.params, args))), fd.body, (frame,) + ls.stack
    )


def _binop(op: str, a: Value, b: Value) -> Value:
    if op in ("+", "-", "*", "div"):
        if not isinstance(a, int) or not isinstance(b, int):
            raise KernCrash(f"arithmetic on non-integers ({op})")
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if b == 0:
            raise KernCrash("division by zero")
        q = abs(a) // abs(b)
        return q if (a >= 0) == (b >= 0) else -q
    if op == "==":
        return "true" if a == b else "false"
    if op == "/=":
        return "true" if a != b else "false"
    if op in ("<", "=<", ">", ">="):
        if not isinstance(a, int) or not isinstance(b, int):
            raise KernCrash(f"comparison on non-integers ({op})")
        res = {"<": a < b, "=<": a <= b, ">": a > b, ">=": a >= b}[op]
        return "true" if res else "false"
    if op in ("and", "or"):
        for x in (a, b):
            if x not in ("true", "false"):
                raise KernCrash(f"boolean operator on non-boolean ({op})")
        if op == "and":
            return "true" if a == "true" and b == "true" else "false"
        return "true" if a == "true" or b == "true" else "false"
    raise TypeError(f"unknown operator {op}")  # pragma: no cover


# --- pattern matching and guards -------------------------------------------------


def match_pattern(p: Pattern, v: Value, env: dict[str, Value]) -> Optional[dict[str, Value]]:
    """Match one pattern; already-bound variables must compare equal."""
    if isinstance(p, PWild):
        return env
    if isinstance(p, PInt):
        return env if v == p.n else None
    if isinstance(p, PAtom):
        return env if v == p.name else None
    if isinstance(p, PVar):
        if p.name in env:
            return env if env[p.name] == v else None
        out = dict(env)
        out[p.name] = v
        return out
    if isinstance(p, PTuple):
        if not isinstance(v, TupleVal) or len(v.items) != len(p.items):
            return None
        cur = env
        for q, item in zip(p.items, v.items):
            cur = match_pattern(q, item, cur)
            if cur is None:
                return None
        return cur
    if isinstance(p, PList):
        if not isinstance(v, ListVal):
            return None
        if p.tail is None:
            if len(v.items) != len(p.items):
                return None
            cur = env
            for q, item in zip(p.items, v.items):
                cur = match_pattern(q, item, cur)
                if cur is None:
                    return None
            return cur
        if len(v.items) < len(p.items):
            return None
        cur = env
        for q, item in zip(p.items, v.items[: len(p.items)]):
            cur = match_pattern(q, item, cur)
            if cur is None:
                return None
        return match_pattern(p.tail, ListVal(v.items[len(p.items):]), cur)
    raise TypeError(f"unhandled pattern {p!r}")  # pragma: no cover


def eval_guard(g: Expr, env: dict[str, Value]) -> bool:
    """Total guard evaluation: any error counts as false."""
    try:
        return _eval_pure(g, env) == "true"
    except KernCrash:
        return False


def _eval_pure(e: Expr, env: dict[str, Value]) -> Value:
    if isinstance(e, IntLit):
        return e.n
    if isinstance(e, AtomLit):
        return e.name
    if isinstance(e, Var):
        if e.name not in env:
            raise KernCrash(f"unbound variable {e.name}")
        return env[e.name]
    if isinstance(e, TupleE):
        return TupleVal(tuple(_eval_pure(x, env) for x in e.items))
    if isinstance(e, ListE):
        items = tuple(_eval_pure(x, env) for x in e.items)
        if e.tail is None:
            return ListVal(items)
        tail = _eval_pure(e.tail, env)
        if not isinstance(tail, ListVal):
            raise KernCrash("list tail is not a list")
        return ListVal(items + tail.items)
    if isinstance(e, BinOp):
        return _binop(e.op, _eval_pure(e.left, env), _eval_pure(e.right, env))
    raise KernCrash("not a guard expression")


# --- matchrec ---------------------------------------------------------------------


@dataclass(frozen=True)
class OldestMatching(_Immutable):
    pass


@dataclass(frozen=True)
class ByTag(_Immutable):
    tag: int


@dataclass(frozen=True)
class MatchResult(_Immutable):
    state: LocalState  # future bound to the selected clause body
    mailbox: tuple  # the mailbox with the consumed message removed
    tag: int
    value: Value
    index: int  # 0-based position of the consumed message


def matchrec(ls, clauses, mailbox, mode) -> Optional[MatchResult]:
    """Select a message from the mailbox per the receive clauses.

    ``ls`` is the post-receive-step state (focus is the unbound future).
    ``mailbox`` is a sequence of objects with ``tag`` and ``value`` fields.
    OldestMatching scans messages front to back, clauses top to bottom;
    ByTag(tag) picks the unique message with that tag, still requiring a
    clause to match it.
    """
    if not isinstance(ls.focus, FutureVal):
        raise ValueError("matchrec needs the post-receive state (future focus)")
    env = ls.env_dict()

    def try_message(i: int):
        msg = mailbox[i]
        for cl in clauses:
            bound = match_pattern(cl.pattern, msg.value, env)
            if bound is None:
                continue
            if cl.guard is not None and not eval_guard(cl.guard, bound):
                continue
            new_ls = ls.with_(env=_env(bound), focus=cl.body)
            rest = tuple(mailbox[:i]) + tuple(mailbox[i + 1:])
            return MatchResult(new_ls, rest, msg.tag, msg.value, i)
        return None

    if isinstance(mode, OldestMatching):
        for i in range(len(mailbox)):
            res = try_message(i)
            if res is not None:
                return res
        return None
    if isinstance(mode, ByTag):
        for i, msg in enumerate(mailbox):
            if msg.tag == mode.tag:
                return try_message(i)
        return None
    raise TypeError(f"unknown matchrec mode {mode!r}")


def bind_future(ls: LocalState, value: Value) -> LocalState:
    """Fill the future left by a self/spawn step with the pid it resolves to."""
    if not isinstance(ls.focus, FutureVal):
        raise ValueError("no future to bind")
    return ls.with_(focus=value)


# --- pid renaming (trace-equality support) ---------------------------------------


def map_pids_in_value(v, f):
    if isinstance(v, PidVal):
        return PidVal(f(v.n))
    if isinstance(v, TupleVal):
        return TupleVal(tuple(map_pids_in_value(x, f) for x in v.items))
    if isinstance(v, ListVal):
        return ListVal(tuple(map_pids_in_value(x, f) for x in v.items))
    return v


def _map_pids_in_frame(frame: Frame, f) -> Frame:
    if isinstance(frame, FBinopCombine):
        return FBinopCombine(frame.op, map_pids_in_value(frame.left, f))
    if isinstance(frame, FTupleBuild):
        return FTupleBuild(tuple(map_pids_in_value(x, f) for x in frame.done), frame.pending)
    if isinstance(frame, FListBuild):
        return FListBuild(
            tuple(map_pids_in_value(x, f) for x in frame.done), frame.pending, frame.tail
        )
    if isinstance(frame, FListTail):
        return FListTail(tuple(map_pids_in_value(x, f) for x in frame.done))
    if isinstance(frame, FSendValue):
        return FSendValue(map_pids_in_value(frame.target, f))
    if isinstance(frame, FCallArgs):
        return FCallArgs(frame.fname, tuple(map_pids_in_value(x, f) for x in frame.done), frame.pending)
    if isinstance(frame, FSpawnArgs):
        return FSpawnArgs(frame.fname, tuple(map_pids_in_value(x, f) for x in frame.done), frame.pending)
    if isinstance(frame, FReturn):
        return FReturn(tuple((k, map_pids_in_value(v, f)) for k, v in frame.saved_env))
    return frame


def map_pids_in_state(ls: LocalState, f) -> LocalState:
    """Apply a pid renaming to every pid value inside a local state."""
    focus = ls.focus
    if is_value(focus):
        focus = map_pids_in_value(focus, f)
    return LocalState(
        tuple((k, map_pids_in_value(v, f)) for k, v in ls.env),
        focus,
        tuple(_map_pids_in_frame(fr, f) for fr in ls.stack),
    )
