"""Lexer, recursive-descent parser and pretty-printer for `.pef` sources."""
from __future__ import annotations

import re
from dataclasses import dataclass

from . import syntax as S
from .errors import Diagnostic, ParseError, Span

KEYWORDS = {
    "fun", "let", "in", "handle", "with", "resume", "if", "then", "else",
    "fst", "snd", "return", "effect", "forall", "true", "false", "div",
    "bool", "int", "unit", "bot",
}

# ML keywords with no meaning here; reserved so they fail loudly
RESERVED = {"rec", "match", "type", "val", "of", "where"}

# longest symbols first
SYMBOLS = ["}->", ";;", "->", "-{", "=>", "(", ")", "{", "}", ",", ";", "=", "+", "-", "*", "#", ":", "."]

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")
_INT = re.compile(r"[0-9]+")


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "int", "kw", "sym", "eof"
    text: str
    start: int
    end: int


def tokenize(src: str) -> list:
    toks = []
    i, n = 0, len(src)
    while i < n:
        ch = src[i]
        if ch.isspace():
            i += 1
            continue
        if src.startswith("(*", i) and not src.startswith("(*)", i):
            i = _skip_comment(src, i)
            continue
        m = _IDENT.match(src, i)
        if m:
            text = m.group()
            if text in RESERVED:
                raise ParseError([Diagnostic.at(src, Span(i, m.end()), f"unknown keyword {text!r}")])
            toks.append(Token("kw" if text in KEYWORDS else "ident", text, i, m.end()))
            i = m.end()
            continue
        m = _INT.match(src, i)
        if m:
            toks.append(Token("int", m.group(), i, m.end()))
            i = m.end()
            continue
        for sym in SYMBOLS:
            if src.startswith(sym, i):
                toks.append(Token("sym", sym, i, i + len(sym)))
                i += len(sym)
                break
        else:
            raise ParseError([Diagnostic.at(src, Span(i, i + 1), f"lexical error: unexpected character {ch!r}")])
    toks.append(Token("eof", "", n, n))
    return toks


def _skip_comment(src: str, i: int) -> int:
    start, depth = i, 0
    while i < len(src):
        if src.startswith("(*", i):
            depth += 1
            i += 2
        elif src.startswith("*)", i):
            depth -= 1
            i += 2
            if depth == 0:
                return i
        else:
            i += 1
    raise ParseError([Diagnostic.at(src, Span(start, start + 2), "lexical error: unterminated comment")])


_BINOPS = {"=": 1, "+": 2, "-": 2, "*": 3}


class Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = tokenize(src)
        self.pos = 0
        self.opens: list = []

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self) -> Token:
        return self.toks[min(self.pos + 1, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("sym", "kw") and t.text == text

    def advance(self) -> Token:
        t = self.tok
        self.pos += 1
        return t

    def error(self, msg: str, tok: Token | None = None):
        t = tok or self.tok
        end = t.end if t.end > t.start else min(t.start + 1, len(self.src))
        start = t.start if t.start < len(self.src) or not self.src else max(0, len(self.src) - 1)
        raise ParseError([Diagnostic.at(self.src, Span(start, max(end, start + 1)), msg)])

    def expect(self, text: str) -> Token:
        if self.at(text):
            return self.advance()
        found = "end of input" if self.tok.kind == "eof" else repr(self.tok.text)
        if text in (")", "}") and self.opens:
            opener = self.opens[-1]
            self.error(f"unbalanced delimiter: expected {text!r} to close {opener.text!r} but found {found}")
        self.error(f"expected {text!r} but found {found}")

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind == "ident":
            return self.advance()
        if self.tok.kind == "kw":
            self.error(f"unexpected keyword {self.tok.text!r} where {what} was expected")
        self.error(f"expected {what}")

    def open(self, text: str) -> Token:
        t = self.expect(text)
        self.opens.append(t)
        return t

    def close(self, text: str) -> Token:
        t = self.expect(text)
        self.opens.pop()
        return t

    def span(self, start: int) -> Span:
        prev = self.toks[self.pos - 1] if self.pos else self.tok
        return Span(start, max(prev.end, start + 1))

    # -- programs and types

    def program(self) -> S.Program:
        sigs = []
        while self.at("effect"):
            sigs.append(self.decl())
            if not self.at("effect"):
                self.expect(";;")
        if not sigs and self.at(";;"):
            self.advance()
        main = self.term()
        if self.tok.kind != "eof":
            if self.tok.text in (")", "}"):
                self.error(f"unbalanced delimiter: unmatched {self.tok.text!r}")
            self.error(f"unexpected {self.tok.text!r} after end of program")
        names = [s.op for s in sigs]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise ParseError([Diagnostic.at(self.src, Span(0, 1), f"operation {dup} declared twice")])
        return S.Program(tuple(sigs), main)

    def decl(self) -> S.EffectSignature:
        start = self.advance()
        name = self.ident("operation name").text
        self.expect(":")
        bound = []
        if self.at("forall"):
            self.advance()
            while self.tok.kind == "ident":
                bound.append(self.advance().text)
            if not bound:
                self.error("expected type variables after 'forall'")
            self.expect(".")
        dom = self.type_()
        self.expect("=>")
        cod = self.type_()
        try:
            return S.EffectSignature(name, tuple(bound), dom, cod)
        except ValueError as exc:
            raise ParseError([Diagnostic.at(self.src, self.span(start.start), str(exc))]) from None

    def type_(self):
        left = self.atype()
        if self.at("->"):
            self.advance()
            return S.Arrow(left, S.EMPTY, self.type_())
        if self.at("-{"):
            self.advance()
            ops = []
            while self.tok.kind == "ident":
                ops.append(self.advance().text)
                if self.at(","):
                    self.advance()
                else:
                    break
            self.expect("}->")
            return S.Arrow(left, frozenset(ops), self.type_())
        return left

    def atype(self):
        t = self.tok
        if t.kind == "kw" and t.text in S.BASE_KINDS:
            self.advance()
            return S.Base(t.text)
        if t.kind == "ident":
            self.advance()
            return S.TVar(t.text)
        if self.at("("):
            self.open("(")
            a = self.type_()
            if self.at("*"):
                self.advance()
                a = S.Prod(a, self.type_())
            self.close(")")
            return a
        self.error(f"expected a type but found {t.text or 'end of input'!r}")

    # -- terms

    def term(self, seq: bool = True):
        start = self.tok.start
        e = self.expr(seq)
        if seq and self.at(";"):
            self.advance()
            rest = self.term(seq)
            return S.Let(S.fresh("_"), e, rest, span=self.span(start))
        return e

    def expr(self, seq: bool):
        t = self.tok
        start = t.start
        if self.at("fun"):
            self.advance()
            x = self.ident().text
            self.expect("->")
            body = self.term(seq)
            return S.Abs(x, body, span=self.span(start))
        if self.at("let"):
            self.advance()
            x = self.ident().text
            self.expect("=")
            bound = self.term(True)
            self.expect("in")
            body = self.term(seq)
            return S.Let(x, bound, body, span=self.span(start))
        if self.at("handle"):
            self.advance()
            body = self.term(True)
            self.expect("with")
            h = self.handler()
            return S.Handle(body, h, span=self.span(start))
        if self.at("if"):
            self.advance()
            c = self.term(True)
            self.expect("then")
            a = self.term(True)
            self.expect("else")
            b = self.expr(seq)
            return S.If(c, a, b, span=self.span(start))
        return self.binary(1)

    def binary(self, level: int):
        start = self.tok.start
        if level > 3:
            return self.app()
        left = self.binary(level + 1)
        while self.tok.kind == "sym" and _BINOPS.get(self.tok.text) == level:
            optok = self.advance()
            right = self.binary(level + 1)
            op = S.Const(S.PrimC(optok.text), span=Span(optok.start, optok.end))
            left = S.App(S.App(op, left, span=self.span(start)), right, span=self.span(start))
            if level == 1:
                break
        return left

    def app(self):
        start = self.tok.start
        if self.at("resume"):
            self.advance()
            return S.Resume(self.aterm(), span=self.span(start))
        fn = self.aterm()
        while self._starts_aterm():
            fn = S.App(fn, self.aterm(), span=self.span(start))
        return fn

    def _starts_aterm(self) -> bool:
        t = self.tok
        if t.kind in ("ident", "int"):
            return True
        if t.kind == "kw":
            return t.text in ("true", "false", "fst", "snd", "div")
        return t.kind == "sym" and t.text in ("(", "#")

    def aterm(self):
        t = self.tok
        start = t.start
        if t.kind == "ident":
            self.advance()
            return S.Var(t.text, span=self.span(start))
        if t.kind == "int":
            self.advance()
            return S.Const(S.IntC(int(t.text)), span=self.span(start))
        if self.at("-") and self.peek().kind == "int" and self.peek().start == t.end:
            self.advance()
            n = self.advance()
            return S.Const(S.IntC(-int(n.text)), span=self.span(start))
        if self.at("true") or self.at("false"):
            self.advance()
            return S.Const(S.BoolC(t.text == "true"), span=self.span(start))
        if self.at("div"):
            self.advance()
            return S.Const(S.PrimC("div"), span=self.span(start))
        if self.at("fst") or self.at("snd"):
            self.advance()
            arg = self.aterm()
            return S.Proj(1 if t.text == "fst" else 2, arg, span=self.span(start))
        if self.at("#"):
            self.advance()
            op = self.ident("operation name").text
            self.open("(")
            arg = self.term(True)
            self.close(")")
            return S.OpCall(op, arg, span=self.span(start))
        if self.at("("):
            self.open("(")
            if self.at(")"):
                self.close(")")
                return S.Const(S.UnitC(), span=self.span(start))
            nxt = self.peek()
            if self.tok.kind == "sym" and self.tok.text in _BINOPS and nxt.text == ")":
                op = self.advance().text
                self.close(")")
                return S.Const(S.PrimC(op), span=self.span(start))
            a = self.term(True)
            if self.at(","):
                self.advance()
                b = self.term(True)
                self.close(")")
                return S.Pair(a, b, span=self.span(start))
            self.close(")")
            return a
        if t.kind == "eof":
            if self.opens:
                self.error(f"unbalanced delimiter: {self.opens[-1].text!r} is never closed", self.opens[-1])
            self.error("unexpected end of input")
        if t.kind == "kw":
            self.error(f"unexpected keyword {t.text!r}")
        self.error(f"unexpected {t.text!r}")

    def handler(self) -> S.Handler:
        start = self.open("{").start
        self.expect("return")
        x = self.ident().text
        self.expect("->")
        ret = self.term(False)
        clauses = []
        seen = set()
        while self.at(";"):
            self.advance()
            cstart = self.tok.start
            optok = self.ident("operation name")
            if optok.text in seen:
                self.error(f"THS-Op: duplicate clause for operation {optok.text}", optok)
            seen.add(optok.text)
            self.expect("(")
            y = self.ident().text
            self.expect(")")
            self.expect("->")
            body = self.term(False)
            clauses.append(S.OpClause(optok.text, y, body, span=self.span(cstart)))
        self.close("}")
        return S.Handler(x, ret, tuple(clauses), span=self.span(start))


def parse_program(src: str) -> S.Program:
    """Parse a whole `.pef` program; raises ParseError with diagnostics."""
    return Parser(src).program()


def parse_term(src: str):
    p = Parser(src)
    t = p.term()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r}")
    return t


def parse_type(src: str):
    p = Parser(src)
    t = p.type_()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r}")
    return t


# ---------------------------------------------------------------------------
# pretty printing

_P_TERM, _P_EXPR, _P_CMP, _P_ADD, _P_MUL, _P_APP, _P_ATOM = range(7)


def pretty(t) -> str:
    """Render a surface type, scheme, term or program; IR terms use the IR format."""
    from . import ir

    if isinstance(t, (S.TVar, S.Base, S.Arrow, S.Prod)):
        return show_type(t)
    if isinstance(t, S.TypeScheme):
        return show_scheme(t)
    if isinstance(t, S.Program):
        return show_program(t)
    if isinstance(t, ir.IR_NODES):
        return ir.show(t)
    return _term(t, _P_TERM)


def show_type(t) -> str:
    if isinstance(t, S.TVar):
        return t.name
    if isinstance(t, S.Base):
        return t.kind
    if isinstance(t, S.Prod):
        return f"({show_type(t.left)} * {show_type(t.right)})"
    if isinstance(t, S.Arrow):
        dom = show_type(t.dom)
        if isinstance(t.dom, S.Arrow):
            dom = f"({dom})"
        eff = t.eff
        if isinstance(eff, frozenset):
            arrow = "->" if not eff else "-{" + ", ".join(sorted(eff)) + "}->"
        else:
            arrow = f"-{{{eff}}}->"
        return f"{dom} {arrow} {show_type(t.cod)}"
    return str(t)


def show_scheme(s: S.TypeScheme) -> str:
    if not s.bound:
        return show_type(s.body)
    return f"forall {' '.join(s.bound)}. {show_type(s.body)}"


def show_program(p: S.Program) -> str:
    lines = []
    for s in p.sigs:
        q = f"forall {' '.join(s.bound)}. " if s.bound else ""
        lines.append(f"effect {s.op} : {q}{show_type(s.dom)} => {show_type(s.cod)}")
    lines.append(";;")
    lines.append(_term(p.main, _P_TERM))
    return "\n".join(lines)


def _binop(t):
    if isinstance(t, S.App) and isinstance(t.fn, S.App) and isinstance(t.fn.fn, S.Const):
        c = t.fn.fn.value
        if isinstance(c, S.PrimC) and not c.args and c.op in _BINOPS:
            return c.op, t.fn.arg, t.arg
    return None


def _int(n: int) -> str:
    return f"({n})" if n < 0 else str(n)


def _paren(s: str, need: bool) -> str:
    return f"({s})" if need else s


def _is_seq(t) -> bool:
    return isinstance(t, S.Let) and t.var.startswith("_~")


def _term(t, prec: int) -> str:
    # prec _P_TERM admits a trailing `; e`; _P_EXPR (clause bodies) does not
    if isinstance(t, S.Var):
        return t.name
    if isinstance(t, S.Const):
        c = t.value
        if isinstance(c, S.PrimC) and not c.args and c.op in _BINOPS:
            return f"( {c.op} )"
        if isinstance(c, S.PrimC) and c.args:
            return f"(( {c.op} ) {_int(c.args[0])})"
        if isinstance(c, S.IntC):
            return _int(c.value)
        return S.show_const(c)
    if _is_seq(t):
        if prec > _P_TERM:
            return f"({_term(t.bound, _P_CMP)}; {_term(t.body, _P_TERM)})"
        return f"{_term(t.bound, _P_CMP)}; {_term(t.body, _P_TERM)}"
    if isinstance(t, (S.Abs, S.Let, S.If, S.Handle)):
        wrap = prec > _P_EXPR
        tail = _P_TERM if wrap else prec
        if isinstance(t, S.Abs):
            s = f"fun {t.var} -> {_term(t.body, tail)}"
        elif isinstance(t, S.Let):
            s = f"let {t.var} = {_term(t.bound, _P_TERM)} in {_term(t.body, tail)}"
        elif isinstance(t, S.If):
            s = f"if {_term(t.cond, _P_TERM)} then {_term(t.then, _P_TERM)} else {_term(t.else_, max(tail, _P_EXPR))}"
        else:
            s = f"handle {_term(t.body, _P_TERM)} with {_handler(t.handler)}"
        return _paren(s, wrap)
    b = _binop(t)
    if b is not None:
        op, l, r = b
        lvl = {"=": _P_CMP, "+": _P_ADD, "-": _P_ADD, "*": _P_MUL}[op]
        left_prec = lvl + 1 if op == "=" else lvl
        s = f"{_term(l, left_prec)} {op} {_term(r, lvl + 1)}"
        return _paren(s, prec > lvl)
    if isinstance(t, S.App):
        fn = _term(t.fn, _P_ATOM if isinstance(t.fn, S.Resume) else _P_APP)
        return _paren(f"{fn} {_term(t.arg, _P_ATOM)}", prec > _P_APP)
    if isinstance(t, S.Resume):
        return _paren(f"resume {_term(t.arg, _P_ATOM)}", prec > _P_APP)
    if isinstance(t, S.OpCall):
        return f"#{t.op}({_term(t.arg, _P_TERM)})"
    if isinstance(t, S.Pair):
        return f"({_term(t.left, _P_TERM)}, {_term(t.right, _P_TERM)})"
    if isinstance(t, S.Proj):
        return f"{'fst' if t.index == 1 else 'snd'} {_term(t.arg, _P_ATOM)}"
    raise TypeError(f"cannot print {t!r}")


def _handler(h: S.Handler) -> str:
    parts = [f"return {h.ret_var} -> {_term(h.ret_body, _P_EXPR)}"]
    for c in h.clauses:
        parts.append(f"{c.op}({c.var}) -> {_term(c.body, _P_EXPR)}")
    return "{ " + " ; ".join(parts) + " }"
