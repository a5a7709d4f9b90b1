from .ast import (
    AtomLit,
    BinOp,
    Call,
    Case,
    Clause,
    CrashVal,
    Expr,
    FunDef,
    FutureVal,
    IntLit,
    Let,
    ListE,
    ListVal,
    PAtom,
    PInt,
    PList,
    PTuple,
    PVar,
    PWild,
    Pattern,
    PidVal,
    Program,
    Receive,
    SelfE,
    Send,
    Seq,
    Spawn,
    TupleE,
    TupleVal,
    Value,
    Var,
    format_value,
    is_value,
)
from .machine import (
    ByTag,
    EvalLabel,
    KernCrash,
    Local,
    LocalState,
    MatchResult,
    OldestMatching,
    RecL,
    SelfL,
    SendL,
    SpawnL,
    bind_future,
    eval_guard,
    eval_step,
    final,
    initial_state,
    match_pattern,
    matchrec,
)
from .parser import KernSyntaxError, parse, parse_file

__all__ = [name for name in dir() if not name.startswith("_")]
