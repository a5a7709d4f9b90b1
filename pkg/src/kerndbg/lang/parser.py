"""Recursive-descent parser for .kern sources.

The reference grammar lives in docs/LANGUAGE.md. Parsing is total and
deterministic; every rejection is a KernSyntaxError carrying line/column.
Besides the grammar the parser enforces, at link time:

  * called and spawned functions exist at the right arity,
  * every variable is a parameter or bound by an enclosing let / pattern,
  * patterns are linear (no repeated variables inside one pattern),
  * guards use only literals, variables and operators.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    AtomLit, BinOp, Call, Case, Clause, Expr, FunDef, IntLit, Let, ListE,
    PAtom, PInt, PList, PTuple, PVar, PWild, Pattern, Program, Receive,
    SelfE, Send, Seq, Spawn, TupleE, Var, pattern_vars,
)

KEYWORDS = {
    "let", "in", "case", "of", "when", "end", "receive", "spawn", "self",
    "div", "and", "or",
}

_SYMBOLS = [
    "->", "==", "/=", "=<", ">=",  # two-char first
    "(", ")", "{", "}", "[", "]", ",", ";", ".", "!", "|", "+", "-", "*",
    "<", ">", "=",
]


class KernSyntaxError(Exception):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.msg = msg
        self.line = line
        self.col = col


@dataclass
class Token:
    kind: str  # "int" | "atom" | "var" | "wild" | symbol text | "eof"
    text: str
    line: int
    col: int


def _lex(source: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "%":  # comment to end of line
            while i < n and source[i] != "\n":
                i += 1
            continue
        if c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            toks.append(Token("int", source[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            if word == "_":
                toks.append(Token("wild", word, line, col))
            elif c == "_" or c.isupper():
                toks.append(Token("var", word, line, col))
            elif word in KEYWORDS:
                toks.append(Token(word, word, line, col))
            else:
                toks.append(Token("atom", word, line, col))
            col += j - i
            i = j
            continue
        for sym in _SYMBOLS:
            if source.startswith(sym, i):
                toks.append(Token(sym, sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise KernSyntaxError(f"unexpected character {c!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.i = 0

    # -- token plumbing ------------------------------------------------------

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, kind: str) -> bool:
        return self.peek().kind == kind

    def eat(self, kind: str) -> Token:
        t = self.peek()
        if t.kind != kind:
            shown = t.text or t.kind
            raise KernSyntaxError(f"expected {kind!r}, found {shown!r}", t.line, t.col)
        return self.next()

    def fail(self, msg: str) -> KernSyntaxError:
        t = self.peek()
        return KernSyntaxError(msg, t.line, t.col)

    # -- grammar -------------------------------------------------------------

    def program(self) -> Program:
        fundefs: dict[tuple[str, int], FunDef] = {}
        while not self.at("eof"):
            fd = self.fundef()
            key = (fd.name, len(fd.params))
            if key in fundefs:
                raise KernSyntaxError(
                    f"duplicate definition of {fd.name}/{len(fd.params)}",
                    fd.pos[0], fd.pos[1],
                )
            fundefs[key] = fd
        if not fundefs:
            t = self.peek()
            raise KernSyntaxError("empty program", t.line, t.col)
        return Program(fundefs)

    def fundef(self) -> FunDef:
        name_tok = self.eat("atom")
        self.eat("(")
        params: list[str] = []
        if not self.at(")"):
            params.append(self.eat("var").text)
            while self.at(","):
                self.next()
                params.append(self.eat("var").text)
        self.eat(")")
        if len(set(params)) != len(params):
            raise KernSyntaxError(
                f"duplicate parameter in {name_tok.text}", name_tok.line, name_tok.col
            )
        self.eat("->")
        body = self.seq()
        self.eat(".")
        return FunDef(name_tok.text, tuple(params), body,
                      pos=(name_tok.line, name_tok.col))

    def seq(self) -> Expr:
        """Comma-separated sequence; ``let`` swallows the rest of the sequence."""
        if self.at("let"):
            self.next()
            var = self.eat("var").text
            self.eat("=")
            bound = self.send_expr()
            self.eat("in")
            body = self.seq()
            return Let(var, bound, body)
        first = self.send_expr()
        if self.at(","):
            self.next()
            return Seq(first, self.seq())
        return first

    def send_expr(self) -> Expr:
        left = self.or_expr()
        if self.at("!"):
            self.next()
            return Send(left, self.send_expr())  # right associative
        return left

    def or_expr(self) -> Expr:
        e = self.and_expr()
        while self.at("or"):
            self.next()
            e = BinOp("or", e, self.and_expr())
        return e

    def and_expr(self) -> Expr:
        e = self.cmp_expr()
        while self.at("and"):
            self.next()
            e = BinOp("and", e, self.cmp_expr())
        return e

    def cmp_expr(self) -> Expr:
        e = self.add_expr()
        if self.peek().kind in ("==", "/=", "<", "=<", ">", ">="):
            op = self.next().kind
            return BinOp(op, e, self.add_expr())
        return e

    def add_expr(self) -> Expr:
        e = self.mul_expr()
        while self.peek().kind in ("+", "-"):
            op = self.next().kind
            e = BinOp(op, e, self.mul_expr())
        return e

    def mul_expr(self) -> Expr:
        e = self.unary()
        while self.peek().kind in ("*", "div"):
            op = self.next().kind
            e = BinOp(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.at("-"):
            t = self.next()
            inner = self.unary()
            if isinstance(inner, IntLit):
                return IntLit(-inner.n)
            return BinOp("-", IntLit(0), inner)
        return self.primary()

    def primary(self) -> Expr:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return IntLit(int(t.text))
        if t.kind == "var":
            self.next()
            return Var(t.text, pos=(t.line, t.col))
        if t.kind == "(":
            self.next()
            e = self.seq()
            self.eat(")")
            return e
        if t.kind == "{":
            self.next()
            items: list[Expr] = []
            if not self.at("}"):
                items.append(self.send_expr())
                while self.at(","):
                    self.next()
                    items.append(self.send_expr())
            self.eat("}")
            return TupleE(tuple(items))
        if t.kind == "[":
            return self.list_expr()
        if t.kind == "case":
            self.next()
            subject = self.send_expr()
            self.eat("of")
            clauses = self.clauses()
            self.eat("end")
            return Case(subject, clauses)
        if t.kind == "receive":
            self.next()
            clauses = self.clauses()
            self.eat("end")
            return Receive(clauses)
        if t.kind == "self":
            self.next()
            self.eat("(")
            self.eat(")")
            return SelfE()
        if t.kind == "spawn":
            self.next()
            self.eat("(")
            fname = self.eat("atom").text
            self.eat(",")
            self.eat("[")
            args: list[Expr] = []
            if not self.at("]"):
                args.append(self.send_expr())
                while self.at(","):
                    self.next()
                    args.append(self.send_expr())
            self.eat("]")
            self.eat(")")
            return Spawn(fname, tuple(args), pos=(t.line, t.col))
        if t.kind == "atom":
            self.next()
            if self.at("("):
                self.next()
                args = []
                if not self.at(")"):
                    args.append(self.send_expr())
                    while self.at(","):
                        self.next()
                        args.append(self.send_expr())
                self.eat(")")
                return Call(t.text, tuple(args), pos=(t.line, t.col))
            return AtomLit(t.text)
        raise self.fail(f"expected an expression, found {t.text or t.kind!r}")

    def list_expr(self) -> Expr:
        self.eat("[")
        if self.at("]"):
            self.next()
            return ListE(())
        items = [self.send_expr()]
        while self.at(","):
            self.next()
            items.append(self.send_expr())
        tail = None
        if self.at("|"):
            self.next()
            tail = self.send_expr()
        self.eat("]")
        return ListE(tuple(items), tail)

    def clauses(self) -> tuple[Clause, ...]:
        out = [self.clause()]
        while self.at(";"):
            self.next()
            out.append(self.clause())
        return tuple(out)

    def clause(self) -> Clause:
        t = self.peek()
        pat = self.pattern()
        seen = pattern_vars(pat)
        if len(set(seen)) != len(seen):
            raise KernSyntaxError("pattern is not linear", t.line, t.col)
        guard = None
        if self.at("when"):
            self.next()
            g = self.peek()
            guard = self.or_expr()
            _check_guard(guard, g.line, g.col)
        self.eat("->")
        body = self.seq()
        return Clause(pat, guard, body)

    def pattern(self) -> Pattern:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return PInt(int(t.text))
        if t.kind == "-":
            self.next()
            inner = self.eat("int")
            return PInt(-int(inner.text))
        if t.kind == "atom":
            self.next()
            return PAtom(t.text)
        if t.kind == "var":
            self.next()
            return PVar(t.text)
        if t.kind == "wild":
            self.next()
            return PWild()
        if t.kind == "{":
            self.next()
            items: list[Pattern] = []
            if not self.at("}"):
                items.append(self.pattern())
                while self.at(","):
                    self.next()
                    items.append(self.pattern())
            self.eat("}")
            return PTuple(tuple(items))
        if t.kind == "[":
            self.next()
            if self.at("]"):
                self.next()
                return PList(())
            items = [self.pattern()]
            while self.at(","):
                self.next()
                items.append(self.pattern())
            tail = None
            if self.at("|"):
                self.next()
                tail = self.pattern()
            self.eat("]")
            return PList(tuple(items), tail)
        raise self.fail(f"expected a pattern, found {t.text or t.kind!r}")


def _check_guard(e: Expr, line: int, col: int) -> None:
    if isinstance(e, (IntLit, AtomLit, Var)):
        return
    if isinstance(e, BinOp):
        _check_guard(e.left, line, col)
        _check_guard(e.right, line, col)
        return
    if isinstance(e, TupleE):
        for item in e.items:
            _check_guard(item, line, col)
        return
    if isinstance(e, ListE):
        for item in e.items:
            _check_guard(item, line, col)
        if e.tail is not None:
            _check_guard(e.tail, line, col)
        return
    raise KernSyntaxError(
        "guards may contain only literals, variables and operators", line, col
    )


# --- link / scope checking ----------------------------------------------------


def _link_check(prog: Program) -> None:
    arities = set(prog.fundefs)

    def err(pos, msg):
        line, col = pos if pos else (0, 0)
        raise KernSyntaxError(msg, line, col)

    def walk(e: Expr, bound: frozenset[str]) -> None:
        if isinstance(e, Var):
            if e.name not in bound:
                err(e.pos, f"unbound variable {e.name}")
        elif isinstance(e, (IntLit, AtomLit, SelfE)):
            pass
        elif isinstance(e, TupleE):
            for item in e.items:
                walk(item, bound)
        elif isinstance(e, ListE):
            for item in e.items:
                walk(item, bound)
            if e.tail is not None:
                walk(e.tail, bound)
        elif isinstance(e, BinOp):
            walk(e.left, bound)
            walk(e.right, bound)
        elif isinstance(e, Let):
            walk(e.bound, bound)
            walk(e.body, bound | {e.var})
        elif isinstance(e, Seq):
            walk(e.first, bound)
            walk(e.rest, bound)
        elif isinstance(e, (Case, Receive)):
            if isinstance(e, Case):
                walk(e.subject, bound)
            for cl in e.clauses:
                inner = bound | set(pattern_vars(cl.pattern))
                if cl.guard is not None:
                    walk(cl.guard, inner)
                walk(cl.body, inner)
        elif isinstance(e, (Call, Spawn)):
            key = (e.fname, len(e.args))
            if key not in arities:
                err(e.pos, f"unknown function {e.fname}/{len(e.args)}")
            for a in e.args:
                walk(a, bound)
        elif isinstance(e, Send):
            walk(e.target, bound)
            walk(e.payload, bound)
        else:  # pragma: no cover
            raise TypeError(f"unhandled node {e!r}")

    for (_name, _arity), fd in prog.fundefs.items():
        walk(fd.body, frozenset(fd.params))


def parse(source: str) -> Program:
    prog = _Parser(_lex(source)).program()
    _link_check(prog)
    return prog


def parse_file(path) -> Program:
    with open(path, "r", encoding="utf-8") as fp:
        return parse(fp.read())
