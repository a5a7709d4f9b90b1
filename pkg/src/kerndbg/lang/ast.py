"""AST and value domain for the kern language.

Values are integers, atoms (Python strings), tuples, lists and pids; pids
cannot be written as literals, they only enter a computation through
``spawn`` and ``self()``. All nodes are immutable; ``__deepcopy__`` returns
``self`` so copying machine states never duplicates syntax trees.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


class _Immutable:
    def __deepcopy__(self, memo):
        return self

    def __copy__(self):
        return self


# --- values -----------------------------------------------------------------


@dataclass(frozen=True)
class PidVal(_Immutable):
    n: int


@dataclass(frozen=True)
class TupleVal(_Immutable):
    items: tuple["Value", ...]


@dataclass(frozen=True)
class ListVal(_Immutable):
    items: tuple["Value", ...]


@dataclass(frozen=True)
class CrashVal(_Immutable):
    """Terminal state of a crashed process; treated like any final value."""

    reason: str


Value = Union[int, str, PidVal, TupleVal, ListVal, CrashVal]


def is_value(x: object) -> bool:
    return isinstance(x, (int, str, PidVal, TupleVal, ListVal, CrashVal))


@dataclass(frozen=True)
class FutureVal(_Immutable):
    """Placeholder the system layer later binds to a pid or a clause body."""


def format_value(v: Value) -> str:
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return v
    if isinstance(v, PidVal):
        return f"<p{v.n}>"
    if isinstance(v, TupleVal):
        return "{" + ", ".join(format_value(x) for x in v.items) + "}"
    if isinstance(v, ListVal):
        return "[" + ", ".join(format_value(x) for x in v.items) + "]"
    if isinstance(v, CrashVal):
        return f"<crash: {v.reason}>"
    raise TypeError(f"not a value: {v!r}")


# --- expressions ------------------------------------------------------------


@dataclass(frozen=True)
class IntLit(_Immutable):
    n: int


@dataclass(frozen=True)
class AtomLit(_Immutable):
    name: str


@dataclass(frozen=True)
class Var(_Immutable):
    name: str
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class TupleE(_Immutable):
    items: tuple["Expr", ...]


@dataclass(frozen=True)
class ListE(_Immutable):
    items: tuple["Expr", ...]
    tail: Optional["Expr"] = None  # [H | T] cons form


@dataclass(frozen=True)
class BinOp(_Immutable):
    op: str  # +, -, *, div, ==, /=, <, =<, >, >=, and, or
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Let(_Immutable):
    var: str
    bound: "Expr"
    body: "Expr"


@dataclass(frozen=True)
class Seq(_Immutable):
    first: "Expr"
    rest: "Expr"


@dataclass(frozen=True)
class Case(_Immutable):
    subject: "Expr"
    clauses: tuple["Clause", ...]


@dataclass(frozen=True)
class Call(_Immutable):
    fname: str
    args: tuple["Expr", ...]
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Spawn(_Immutable):
    fname: str
    args: tuple["Expr", ...]
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Send(_Immutable):
    target: "Expr"
    payload: "Expr"


@dataclass(frozen=True)
class Receive(_Immutable):
    clauses: tuple["Clause", ...]


@dataclass(frozen=True)
class SelfE(_Immutable):
    pass


Expr = Union[
    IntLit, AtomLit, Var, TupleE, ListE, BinOp, Let, Seq, Case, Call, Spawn,
    Send, Receive, SelfE,
]


# --- patterns ---------------------------------------------------------------


@dataclass(frozen=True)
class PInt(_Immutable):
    n: int


@dataclass(frozen=True)
class PAtom(_Immutable):
    name: str


@dataclass(frozen=True)
class PVar(_Immutable):
    name: str


@dataclass(frozen=True)
class PWild(_Immutable):
    pass


@dataclass(frozen=True)
class PTuple(_Immutable):
    items: tuple["Pattern", ...]


@dataclass(frozen=True)
class PList(_Immutable):
    items: tuple["Pattern", ...]
    tail: Optional["Pattern"] = None


Pattern = Union[PInt, PAtom, PVar, PWild, PTuple, PList]


@dataclass(frozen=True)
class Clause(_Immutable):
    pattern: Pattern
    guard: Optional[Expr]
    body: Expr


@dataclass(frozen=True)
class FunDef(_Immutable):
    name: str
    params: tuple[str, ...]
    body: Expr
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass
class Program:
    """A linked kern program: (name, arity) -> definition."""

    fundefs: dict[tuple[str, int], FunDef]

    def lookup(self, name: str, arity: int) -> FunDef:
        return self.fundefs[(name, arity)]

    def __deepcopy__(self, memo):
        return self


def pattern_vars(p: Pattern) -> list[str]:
    """Variables bound by a pattern, in left-to-right order."""
    out: list[str] = []

    def walk(q: Pattern) -> None:
        if isinstance(q, PVar):
            out.append(q.name)
        elif isinstance(q, PTuple):
            for item in q.items:
                walk(item)
        elif isinstance(q, PList):
            for item in q.items:
                walk(item)
            if q.tail is not None:
                walk(q.tail)

    walk(p)
    return out
