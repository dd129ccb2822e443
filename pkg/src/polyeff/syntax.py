"""Types, schemes, contexts, signatures, constants and surface terms."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

Effect = frozenset
EMPTY: frozenset = frozenset()

_counter = itertools.count(1)


def fresh(base: str) -> str:
    """Return a name never produced before in this process."""
    return f"{base.split('~')[0]}~{next(_counter)}"


def base_name(name: str) -> str:
    return name.split("~")[0]


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class TVar:
    name: str


BASE_KINDS = ("bool", "int", "unit", "bot")


@dataclass(frozen=True)
class Base:
    kind: str


@dataclass(frozen=True)
class Arrow:
    dom: object
    eff: object  # frozenset of op names; an EffVar during inference
    cod: object


@dataclass(frozen=True)
class Prod:
    left: object
    right: object


Type = Union[TVar, Base, Arrow, Prod]

BOOL = Base("bool")
INT = Base("int")
UNIT = Base("unit")
BOT = Base("bot")


@dataclass(frozen=True)
class TypeScheme:
    bound: tuple
    body: object

    def __post_init__(self):
        if len(set(self.bound)) != len(self.bound):
            raise ValueError(f"duplicate binders in scheme: {self.bound}")


def mono(t) -> TypeScheme:
    return TypeScheme((), t)


def ftv(s) -> set:
    """Free type variables of a type or scheme."""
    if isinstance(s, TypeScheme):
        return ftv(s.body) - set(s.bound)
    out: set = set()
    _ftv_into(s, out)
    return out


def _ftv_into(t, out: set) -> None:
    while True:
        if isinstance(t, TVar):
            out.add(t.name)
            return
        if isinstance(t, Arrow):
            _ftv_into(t.dom, out)
            t = t.cod
        elif isinstance(t, Prod):
            _ftv_into(t.left, out)
            t = t.right
        else:
            return


def subst_ty(t, pairs) -> object:
    """Simultaneous substitution of types for type variables."""
    m = dict(pairs)
    if not m:
        return t
    return _subst(t, m)


def _subst(t, m: dict):
    if isinstance(t, TVar):
        return m.get(t.name, t)
    if isinstance(t, Arrow):
        return Arrow(_subst(t.dom, m), t.eff, _subst(t.cod, m))
    if isinstance(t, Prod):
        return Prod(_subst(t.left, m), _subst(t.right, m))
    return t


def subst_scheme(s: TypeScheme, m: dict) -> TypeScheme:
    """Capture-avoiding substitution under a scheme's binders."""
    m = {k: v for k, v in m.items() if k not in s.bound}
    if not m:
        return s
    rng = set()
    for v in m.values():
        rng |= ftv(v)
    bound = list(s.bound)
    for i, b in enumerate(bound):
        if b in rng:
            nb = fresh(b)
            m[b] = TVar(nb)
            bound[i] = nb
    return TypeScheme(tuple(bound), _subst(s.body, m))


def rename_scheme(s: TypeScheme, names) -> TypeScheme:
    names = tuple(names)
    if names == s.bound:
        return s
    if len(names) != len(s.bound):
        raise ValueError("binder arity mismatch")
    return TypeScheme(names, subst_ty(s.body, [(a, TVar(b)) for a, b in zip(s.bound, names)]))


def scheme_alpha_eq(s1: TypeScheme, s2: TypeScheme) -> bool:
    if len(s1.bound) != len(s2.bound):
        return False
    return rename_scheme(s1, s2.bound).body == s2.body


def show_effect(eff) -> str:
    return "{" + ", ".join(sorted(eff)) + "}"


# ---------------------------------------------------------------------------
# typing contexts


@dataclass(frozen=True)
class VarBind:
    name: str
    scheme: TypeScheme


@dataclass(frozen=True)
class TyVarBind:
    name: str


class TypingContext:
    """Ordered context; later entries shadow earlier term bindings."""

    __slots__ = ("entries", "_vars", "tyvars")

    def __init__(self, entries: Iterable = ()):
        self.entries = tuple(entries)
        self._vars: dict = {}
        tvs = set()
        for e in self.entries:
            if isinstance(e, VarBind):
                self._vars[e.name] = e.scheme
            else:
                tvs.add(e.name)
        self.tyvars = frozenset(tvs)

    def _extend(self, entry) -> "TypingContext":
        new = TypingContext.__new__(TypingContext)
        new.entries = self.entries + (entry,)
        if isinstance(entry, VarBind):
            new._vars = {**self._vars, entry.name: entry.scheme}
            new.tyvars = self.tyvars
        else:
            new._vars = self._vars
            new.tyvars = self.tyvars | {entry.name}
        return new

    def bind(self, name: str, scheme) -> "TypingContext":
        if not isinstance(scheme, TypeScheme):
            scheme = mono(scheme)
        return self._extend(VarBind(name, scheme))

    def bind_tyvars(self, names) -> "TypingContext":
        ctx = self
        for n in names:
            ctx = ctx._extend(TyVarBind(n))
        return ctx

    def lookup(self, name: str) -> Optional[TypeScheme]:
        return self._vars.get(name)

    def __len__(self):
        return len(self.entries)

    def __repr__(self):
        return f"TypingContext({list(self.entries)!r})"


def ctx_wf(ctx: TypingContext) -> bool:
    seen: set = set()
    for e in ctx.entries:
        if isinstance(e, TyVarBind):
            if e.name in seen:
                return False
            seen.add(e.name)
        elif not ftv(e.scheme) <= seen:
            return False
    return True


def dom(ctx: TypingContext) -> set:
    return {e.name for e in ctx.entries}


# ---------------------------------------------------------------------------
# effect signatures


@dataclass(frozen=True)
class EffectSignature:
    op: str
    bound: tuple
    dom: object
    cod: object

    def __post_init__(self):
        extra = (ftv(self.dom) | ftv(self.cod)) - set(self.bound)
        if extra:
            raise ValueError(f"signature of {self.op} has unbound type variables {sorted(extra)}")

    def instantiate(self, targs) -> tuple:
        pairs = list(zip(self.bound, targs))
        return subst_ty(self.dom, pairs), subst_ty(self.cod, pairs)


# ---------------------------------------------------------------------------
# constants


@dataclass(frozen=True)
class BoolC:
    value: bool


@dataclass(frozen=True)
class IntC:
    value: int


@dataclass(frozen=True)
class UnitC:
    pass


_PRIM_RESULT = {"+": INT, "-": INT, "*": INT, "=": BOOL, "div": INT}
PRIMS = tuple(_PRIM_RESULT)


@dataclass(frozen=True)
class PrimC:
    op: str
    args: tuple = ()


Constant = Union[BoolC, IntC, UnitC, PrimC]


def _div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b > 0) else -q


_PRIM_FN = {
    "+": lambda a, b: IntC(a + b),
    "-": lambda a, b: IntC(a - b),
    "*": lambda a, b: IntC(a * b),
    "=": lambda a, b: BoolC(a == b),
    "div": lambda a, b: IntC(_div(a, b)) if b != 0 else None,
}


class ConstTable:
    """Typing and delta for the built-in constants."""

    @staticmethod
    def typing(c) -> object:
        if isinstance(c, BoolC):
            return BOOL
        if isinstance(c, IntC):
            return INT
        if isinstance(c, UnitC):
            return UNIT
        if isinstance(c, PrimC):
            res = _PRIM_RESULT[c.op]
            for _ in range(2 - len(c.args)):
                res = Arrow(INT, EMPTY, res)
            return res
        raise TypeError(f"not a constant: {c!r}")

    @staticmethod
    def delta(c1, c2):
        if not isinstance(c1, PrimC) or not isinstance(c2, IntC) or isinstance(c2.value, bool):
            return None
        if not c1.args:
            return PrimC(c1.op, (c2.value,))
        return _PRIM_FN[c1.op](c1.args[0], c2.value)


def show_const(c) -> str:
    if isinstance(c, BoolC):
        return "true" if c.value else "false"
    if isinstance(c, IntC):
        return str(c.value)
    if isinstance(c, UnitC):
        return "()"
    if c.args:
        return f"<{c.op} {c.args[0]}>"
    return c.op


# ---------------------------------------------------------------------------
# surface terms

_span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    span: object = _span


@dataclass(frozen=True)
class Const:
    value: object
    span: object = _span


@dataclass(frozen=True)
class Abs:
    var: str
    body: object
    span: object = _span


@dataclass(frozen=True)
class App:
    fn: object
    arg: object
    span: object = _span


@dataclass(frozen=True)
class Let:
    var: str
    bound: object
    body: object
    span: object = _span


@dataclass(frozen=True)
class OpCall:
    op: str
    arg: object
    span: object = _span


@dataclass(frozen=True)
class OpClause:
    op: str
    var: str
    body: object
    span: object = _span


@dataclass(frozen=True)
class Handler:
    ret_var: str
    ret_body: object
    clauses: tuple = ()
    span: object = _span

    def __post_init__(self):
        ops = [c.op for c in self.clauses]
        if len(set(ops)) != len(ops):
            raise ValueError("duplicate operation clause")

    def ops(self) -> frozenset:
        return frozenset(c.op for c in self.clauses)


@dataclass(frozen=True)
class Handle:
    body: object
    handler: Handler
    span: object = _span


@dataclass(frozen=True)
class Resume:
    arg: object
    span: object = _span


@dataclass(frozen=True)
class Pair:
    left: object
    right: object
    span: object = _span


@dataclass(frozen=True)
class Proj:
    index: int
    arg: object
    span: object = _span


@dataclass(frozen=True)
class If:
    cond: object
    then: object
    else_: object
    span: object = _span


@dataclass(frozen=True)
class Program:
    sigs: tuple
    main: object

    def sig_table(self) -> dict:
        return {s.op: s for s in self.sigs}


def alpha_eq(t1, t2) -> bool:
    """Equality of surface terms up to renaming of bound term variables."""
    return _aeq(t1, t2, {}, {})


def _aeq(a, b, ma: dict, mb: dict) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, Var):
        return ma.get(a.name, ("free", a.name)) == mb.get(b.name, ("free", b.name))
    if isinstance(a, Const):
        return a.value == b.value
    if isinstance(a, Abs):
        k = object()
        return _aeq(a.body, b.body, {**ma, a.var: k}, {**mb, b.var: k})
    if isinstance(a, Let):
        k = object()
        return _aeq(a.bound, b.bound, ma, mb) and _aeq(a.body, b.body, {**ma, a.var: k}, {**mb, b.var: k})
    if isinstance(a, App):
        return _aeq(a.fn, b.fn, ma, mb) and _aeq(a.arg, b.arg, ma, mb)
    if isinstance(a, OpCall):
        return a.op == b.op and _aeq(a.arg, b.arg, ma, mb)
    if isinstance(a, Handle):
        ha, hb = a.handler, b.handler
        if not _aeq(a.body, b.body, ma, mb) or len(ha.clauses) != len(hb.clauses):
            return False
        k = object()
        if not _aeq(ha.ret_body, hb.ret_body, {**ma, ha.ret_var: k}, {**mb, hb.ret_var: k}):
            return False
        for ca, cb in zip(ha.clauses, hb.clauses):
            k = object()
            if ca.op != cb.op or not _aeq(ca.body, cb.body, {**ma, ca.var: k}, {**mb, cb.var: k}):
                return False
        return True
    if isinstance(a, Resume):
        return _aeq(a.arg, b.arg, ma, mb)
    if isinstance(a, Pair):
        return _aeq(a.left, b.left, ma, mb) and _aeq(a.right, b.right, ma, mb)
    if isinstance(a, Proj):
        return a.index == b.index and _aeq(a.arg, b.arg, ma, mb)
    if isinstance(a, If):
        return all(_aeq(x, y, ma, mb) for x, y in ((a.cond, b.cond), (a.then, b.then), (a.else_, b.else_)))
    raise TypeError(f"not a surface term: {a!r}")
