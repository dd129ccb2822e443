"""The explicitly typed intermediate language: terms, contexts, substitutions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import syntax as S
from .errors import SubstitutionError
from .syntax import TVar, TypeScheme, fresh, ftv as ftv_type, subst_ty


# ---------------------------------------------------------------------------
# terms


@dataclass(frozen=True)
class VarApp:
    name: str
    targs: tuple = ()


@dataclass(frozen=True)
class Const:
    value: object


@dataclass(frozen=True)
class Abs:
    var: str
    annot: object  # the full arrow type of the abstraction
    body: object


@dataclass(frozen=True)
class App:
    fn: object
    arg: object


@dataclass(frozen=True)
class Let:
    var: str
    binders: tuple
    annot: Optional[TypeScheme]
    bound: object
    body: object


@dataclass(frozen=True)
class OpCall:
    op: str
    targs: tuple
    arg: object


@dataclass(frozen=True)
class PolyValue:
    binders: tuple
    value: object


@dataclass(frozen=True)
class OpCont:
    op: str
    schemes: tuple
    pv: PolyValue
    ctx: "EvalCtx"


@dataclass(frozen=True)
class OpClause:
    binders: tuple
    op: str
    var: str
    body: object


@dataclass(frozen=True)
class Handler:
    ret_var: str
    ret_body: object
    clauses: tuple = ()

    def __post_init__(self):
        ops = [c.op for c in self.clauses]
        if len(set(ops)) != len(ops):
            raise ValueError("duplicate operation clause")


@dataclass(frozen=True)
class Handle:
    body: object
    handler: Handler


@dataclass(frozen=True)
class Resume:
    binders: tuple
    var: str
    body: object


@dataclass(frozen=True)
class Pair:
    left: object
    right: object


@dataclass(frozen=True)
class Proj:
    index: int
    arg: object


@dataclass(frozen=True)
class If:
    cond: object
    then: object
    else_: object


# ---------------------------------------------------------------------------
# evaluation contexts


@dataclass(frozen=True)
class AppL:
    arg: object


@dataclass(frozen=True)
class AppR:
    fn: object


@dataclass(frozen=True)
class LetFrame:
    var: str
    binders: tuple
    annot: Optional[TypeScheme]
    body: object


@dataclass(frozen=True)
class OpArg:
    op: str
    targs: tuple


@dataclass(frozen=True)
class HandleFrame:
    handler: Handler


@dataclass(frozen=True)
class PairL:
    right: object


@dataclass(frozen=True)
class PairR:
    left: object


@dataclass(frozen=True)
class ProjFrame:
    index: int


@dataclass(frozen=True)
class IfFrame:
    then: object
    else_: object


@dataclass(frozen=True)
class EvalCtx:
    """Frames listed outermost first, innermost last."""

    frames: tuple = ()

    def binders(self) -> tuple:
        out: tuple = ()
        for f in self.frames:
            if isinstance(f, LetFrame):
                out += f.binders
        return out

    def plug(self, e):
        for f in reversed(self.frames):
            e = plug_frame(f, e)
        return e

    def wrap(self, frame) -> "EvalCtx":
        return EvalCtx((frame,) + self.frames)


HOLE = EvalCtx()


def plug_frame(f, e):
    if isinstance(f, AppL):
        return App(e, f.arg)
    if isinstance(f, AppR):
        return App(f.fn, e)
    if isinstance(f, LetFrame):
        return Let(f.var, f.binders, f.annot, e, f.body)
    if isinstance(f, OpArg):
        return OpCall(f.op, f.targs, e)
    if isinstance(f, HandleFrame):
        return Handle(e, f.handler)
    if isinstance(f, PairL):
        return Pair(e, f.right)
    if isinstance(f, PairR):
        return Pair(f.left, e)
    if isinstance(f, ProjFrame):
        return Proj(f.index, e)
    if isinstance(f, IfFrame):
        return If(e, f.then, f.else_)
    raise TypeError(f"not a frame: {f!r}")


IR_NODES = (VarApp, Const, Abs, App, Let, OpCall, OpCont, Handle, Resume, Pair, Proj, If, PolyValue, EvalCtx, Handler)


def is_value(e) -> bool:
    if isinstance(e, (Const, Abs)):
        return True
    if isinstance(e, Pair):
        return is_value(e.left) and is_value(e.right)
    return False


# ---------------------------------------------------------------------------
# handler accessors


def handler_return(h: Handler) -> tuple:
    return h.ret_var, h.ret_body


def handler_ops(h: Handler) -> frozenset:
    return frozenset(c.op for c in h.clauses)


def handler_clause(h: Handler, op: str) -> OpClause:
    for c in h.clauses:
        if c.op == op:
            return c
    raise KeyError(f"handler has no clause for {op}")


# ---------------------------------------------------------------------------
# free variables


def ftv_term(e) -> set:
    out: set = set()
    _ftv(e, out)
    return out


def _ftv_ty_into(t, out: set) -> None:
    out |= ftv_type(t)


def _ftv(e, out: set) -> None:
    if isinstance(e, VarApp):
        for a in e.targs:
            _ftv_ty_into(a, out)
    elif isinstance(e, Const):
        pass
    elif isinstance(e, Abs):
        _ftv_ty_into(e.annot, out)
        _ftv(e.body, out)
    elif isinstance(e, App):
        _ftv(e.fn, out)
        _ftv(e.arg, out)
    elif isinstance(e, Let):
        inner: set = set()
        _ftv(e.bound, inner)
        if e.annot is not None:
            inner |= ftv_type(e.annot.body)
        out |= inner - set(e.binders)
        _ftv(e.body, out)
    elif isinstance(e, OpCall):
        for a in e.targs:
            _ftv_ty_into(a, out)
        _ftv(e.arg, out)
    elif isinstance(e, OpCont):
        for s in e.schemes:
            out |= S.ftv(s)
        _ftv(e.pv, out)
        out |= ftv_ctx(e.ctx)
    elif isinstance(e, PolyValue):
        inner = ftv_term(e.value)
        out |= inner - set(e.binders)
    elif isinstance(e, Handle):
        _ftv(e.body, out)
        _ftv_handler(e.handler, out)
    elif isinstance(e, Resume):
        out |= ftv_term(e.body) - set(e.binders)
    elif isinstance(e, Pair):
        _ftv(e.left, out)
        _ftv(e.right, out)
    elif isinstance(e, Proj):
        _ftv(e.arg, out)
    elif isinstance(e, If):
        _ftv(e.cond, out)
        _ftv(e.then, out)
        _ftv(e.else_, out)
    else:
        raise TypeError(f"not an IR term: {e!r}")


def _ftv_handler(h: Handler, out: set) -> None:
    _ftv(h.ret_body, out)
    for c in h.clauses:
        out |= ftv_term(c.body) - set(c.binders)


def ftv_ctx(K: EvalCtx) -> set:
    out: set = set()
    bound: set = set()
    for f in K.frames:
        inner: set = set()
        if isinstance(f, (AppL, AppR)):
            _ftv(f.arg if isinstance(f, AppL) else f.fn, inner)
        elif isinstance(f, LetFrame):
            _ftv(f.body, inner)
            if f.annot is not None:
                # the annotation lives under the frame's own binders
                out |= ftv_type(f.annot.body) - bound - set(f.binders)
        elif isinstance(f, OpArg):
            for a in f.targs:
                inner |= ftv_type(a)
        elif isinstance(f, HandleFrame):
            _ftv_handler(f.handler, inner)
        elif isinstance(f, PairL):
            _ftv(f.right, inner)
        elif isinstance(f, PairR):
            _ftv(f.left, inner)
        elif isinstance(f, IfFrame):
            _ftv(f.then, inner)
            _ftv(f.else_, inner)
        out |= inner - bound
        if isinstance(f, LetFrame):
            bound = bound | set(f.binders)
    return out


def fv_term(e) -> set:
    """Free term variables."""
    out: set = set()
    _fv(e, out)
    return out


def _fv(e, out: set) -> None:
    if isinstance(e, VarApp):
        out.add(e.name)
    elif isinstance(e, Abs):
        out |= fv_term(e.body) - {e.var}
    elif isinstance(e, Let):
        _fv(e.bound, out)
        out |= fv_term(e.body) - {e.var}
    elif isinstance(e, Resume):
        out |= fv_term(e.body) - {e.var}
    elif isinstance(e, Handle):
        _fv(e.body, out)
        _fv_handler(e.handler, out)
    elif isinstance(e, OpCont):
        _fv(e.pv.value, out)
        for f in e.ctx.frames:
            _fv_frame(f, out)
    else:
        for sub in _children(e):
            _fv(sub, out)


def _fv_handler(h: Handler, out: set) -> None:
    out |= fv_term(h.ret_body) - {h.ret_var}
    for c in h.clauses:
        out |= fv_term(c.body) - {c.var}


def _fv_frame(f, out: set) -> None:
    if isinstance(f, LetFrame):
        out |= fv_term(f.body) - {f.var}
    elif isinstance(f, HandleFrame):
        _fv_handler(f.handler, out)
    else:
        for sub in _frame_children(f):
            _fv(sub, out)


def _children(e) -> tuple:
    if isinstance(e, App):
        return (e.fn, e.arg)
    if isinstance(e, OpCall):
        return (e.arg,)
    if isinstance(e, Pair):
        return (e.left, e.right)
    if isinstance(e, Proj):
        return (e.arg,)
    if isinstance(e, If):
        return (e.cond, e.then, e.else_)
    return ()


def _frame_children(f) -> tuple:
    if isinstance(f, AppL):
        return (f.arg,)
    if isinstance(f, AppR):
        return (f.fn,)
    if isinstance(f, PairL):
        return (f.right,)
    if isinstance(f, PairR):
        return (f.left,)
    if isinstance(f, IfFrame):
        return (f.then, f.else_)
    return ()


# ---------------------------------------------------------------------------
# type substitution


def _range_ftv(m: dict) -> set:
    out: set = set()
    for v in m.values():
        out |= ftv_type(v)
    return out


def _enter(binders: tuple, m: dict, danger: set | None = None):
    """Restrict m under binders, renaming binders that would capture."""
    m2 = {k: v for k, v in m.items() if k not in binders}
    if not m2:
        return binders, m2
    rng = _range_ftv(m2) if danger is None else danger
    if not rng.intersection(binders):
        return binders, m2
    new = list(binders)
    for i, b in enumerate(binders):
        if b in rng:
            nb = fresh(b)
            m2[b] = TVar(nb)
            new[i] = nb
    return tuple(new), m2


def subst_ty_ir(e, pairs):
    """Simultaneous capture-avoiding substitution of types for type variables."""
    m = dict(pairs)
    if not m:
        return e
    return _sty(e, m)


def _ty(t, m):
    return subst_ty(t, m)


def _sty(e, m: dict):
    if not m:
        return e
    if isinstance(e, VarApp):
        return VarApp(e.name, tuple(_ty(a, m) for a in e.targs)) if e.targs else e
    if isinstance(e, Const):
        return e
    if isinstance(e, Abs):
        return Abs(e.var, _ty(e.annot, m), _sty(e.body, m))
    if isinstance(e, App):
        return App(_sty(e.fn, m), _sty(e.arg, m))
    if isinstance(e, Let):
        bs, m2 = _enter(e.binders, m)
        annot = e.annot
        if annot is not None and m2:
            annot = TypeScheme(bs, _ty(annot.body, m2))
        elif annot is not None:
            annot = TypeScheme(bs, annot.body)
        return Let(e.var, bs, annot, _sty(e.bound, m2), _sty(e.body, m))
    if isinstance(e, OpCall):
        return OpCall(e.op, tuple(_ty(a, m) for a in e.targs), _sty(e.arg, m))
    if isinstance(e, OpCont):
        oc = e
        keys_rng = set(m) | _range_ftv(m)
        if keys_rng.intersection(oc.ctx.binders()):
            oc = freshen_opcont(oc)
        return OpCont(
            oc.op,
            tuple(TypeScheme(s.bound, _ty(s.body, m)) for s in oc.schemes),
            PolyValue(oc.pv.binders, _sty(oc.pv.value, m)),
            EvalCtx(tuple(_sty_frame(f, m) for f in oc.ctx.frames)),
        )
    if isinstance(e, PolyValue):
        bs, m2 = _enter(e.binders, m)
        return PolyValue(bs, _sty(e.value, m2))
    if isinstance(e, Handle):
        return Handle(_sty(e.body, m), _sty_handler(e.handler, m))
    if isinstance(e, Resume):
        bs, m2 = _enter(e.binders, m)
        return Resume(bs, e.var, _sty(e.body, m2))
    if isinstance(e, Pair):
        return Pair(_sty(e.left, m), _sty(e.right, m))
    if isinstance(e, Proj):
        return Proj(e.index, _sty(e.arg, m))
    if isinstance(e, If):
        return If(_sty(e.cond, m), _sty(e.then, m), _sty(e.else_, m))
    raise TypeError(f"not an IR term: {e!r}")


def _sty_handler(h: Handler, m: dict) -> Handler:
    clauses = []
    for c in h.clauses:
        bs, m2 = _enter(c.binders, m)
        clauses.append(OpClause(bs, c.op, c.var, _sty(c.body, m2)))
    return Handler(h.ret_var, _sty(h.ret_body, m), tuple(clauses))


def _sty_frame(f, m: dict):
    # callers guarantee frame binders are disjoint from m's keys and range
    if isinstance(f, AppL):
        return AppL(_sty(f.arg, m))
    if isinstance(f, AppR):
        return AppR(_sty(f.fn, m))
    if isinstance(f, LetFrame):
        annot = f.annot
        if annot is not None:
            annot = TypeScheme(annot.bound, _ty(annot.body, m))
        return LetFrame(f.var, f.binders, annot, _sty(f.body, m))
    if isinstance(f, OpArg):
        return OpArg(f.op, tuple(_ty(a, m) for a in f.targs))
    if isinstance(f, HandleFrame):
        return HandleFrame(_sty_handler(f.handler, m))
    if isinstance(f, PairL):
        return PairL(_sty(f.right, m))
    if isinstance(f, PairR):
        return PairR(_sty(f.left, m))
    if isinstance(f, ProjFrame):
        return f
    if isinstance(f, IfFrame):
        return IfFrame(_sty(f.then, m), _sty(f.else_, m))
    raise TypeError(f"not a frame: {f!r}")


def rename_ctx_binders(K: EvalCtx, new_names) -> tuple:
    """Rename the let-binders of K positionally; returns (K', renaming of the hole scope)."""
    new_names = list(new_names)
    frames = []
    m: dict = {}
    i = 0
    for f in K.frames:
        f2 = _sty_frame_scoped(f, m)
        if isinstance(f, LetFrame):
            k = len(f.binders)
            nb = tuple(new_names[i:i + k])
            i += k
            annot = f2.annot
            inner = {**m, **{b: TVar(n) for b, n in zip(f.binders, nb)}}
            if annot is not None:
                annot = TypeScheme(nb, subst_ty(annot.body, inner))
            f2 = LetFrame(f2.var, nb, annot, f2.body)
            m = inner
        frames.append(f2)
    return EvalCtx(tuple(frames)), m


def _sty_frame_scoped(f, m: dict):
    if not m:
        return f
    if isinstance(f, LetFrame):
        # binders are renamed by the caller; the body sees only outer binders
        return LetFrame(f.var, f.binders, f.annot, _sty(f.body, m))
    return _sty_frame(f, m)


def freshen_opcont(oc: OpCont) -> OpCont:
    """Give the captured binders fresh names, jointly in schemes, value and context."""
    old = oc.ctx.binders()
    new = tuple(fresh(b) for b in old)
    K, _ = rename_ctx_binders(oc.ctx, new)
    schemes = tuple(S.rename_scheme(s, new) for s in oc.schemes)
    pv = rename_pv(oc.pv, new)
    return OpCont(oc.op, schemes, pv, K)


def rename_pv(pv: PolyValue, names) -> PolyValue:
    names = tuple(names)
    if names == pv.binders:
        return pv
    if len(names) != len(pv.binders):
        raise SubstitutionError("polymorphic value arity mismatch")
    m = {b: TVar(n) for b, n in zip(pv.binders, names)}
    return PolyValue(names, _sty(pv.value, m))


# ---------------------------------------------------------------------------
# value substitution


def subst_val(e, w: PolyValue, x: str):
    """e[w/x], where occurrences `x Ā` become the body of w instantiated at Ā."""

    def inst(targs):
        if len(targs) != len(w.binders):
            raise SubstitutionError(
                f"arity mismatch substituting for {x}: {len(targs)} type arguments, {len(w.binders)} binders"
            )
        return subst_ty_ir(w.value, zip(w.binders, targs))

    return _sv(e, x, inst, ftv_term(w), fv_term(w.value))


def rename_var(e, old: str, new: str):
    return _sv(e, old, lambda targs: VarApp(new, targs), set(), {new})


def _sv(e, x, inst, wt: set, wv: set):
    if isinstance(e, VarApp):
        return inst(e.targs) if e.name == x else e
    if isinstance(e, Const):
        return e
    if isinstance(e, Abs):
        if e.var == x:
            return e
        var, body = _avoid_var(e.var, e.body, wv)
        return Abs(var, e.annot, _sv(body, x, inst, wt, wv))
    if isinstance(e, App):
        return App(_sv(e.fn, x, inst, wt, wv), _sv(e.arg, x, inst, wt, wv))
    if isinstance(e, Let):
        bs, bound, annot = e.binders, e.bound, e.annot
        if wt.intersection(bs):
            bs = _fresh_clashing(bs, wt)
            bound, annot = _rename_under(bound, annot, e.binders, bs)
        bound = _sv(bound, x, inst, wt, wv)
        if e.var == x:
            return Let(e.var, bs, annot, bound, e.body)
        var, body = _avoid_var(e.var, e.body, wv)
        return Let(var, bs, annot, bound, _sv(body, x, inst, wt, wv))
    if isinstance(e, OpCall):
        return OpCall(e.op, e.targs, _sv(e.arg, x, inst, wt, wv))
    if isinstance(e, OpCont):
        oc = e
        if wt.intersection(oc.ctx.binders()):
            oc = freshen_opcont(oc)
        pv = PolyValue(oc.pv.binders, _sv(oc.pv.value, x, inst, wt, wv))
        frames = tuple(_sv_frame(f, x, inst, wt, wv) for f in oc.ctx.frames)
        return OpCont(oc.op, oc.schemes, pv, EvalCtx(frames))
    if isinstance(e, Handle):
        return Handle(_sv(e.body, x, inst, wt, wv), _sv_handler(e.handler, x, inst, wt, wv))
    if isinstance(e, Resume):
        bs, body = e.binders, e.body
        if wt.intersection(bs):
            bs = _fresh_clashing(bs, wt)
            body = _sty(body, {a: TVar(b) for a, b in zip(e.binders, bs) if a != b})
        if e.var == x:
            return Resume(bs, e.var, body)
        var, body = _avoid_var(e.var, body, wv)
        return Resume(bs, var, _sv(body, x, inst, wt, wv))
    if isinstance(e, Pair):
        return Pair(_sv(e.left, x, inst, wt, wv), _sv(e.right, x, inst, wt, wv))
    if isinstance(e, Proj):
        return Proj(e.index, _sv(e.arg, x, inst, wt, wv))
    if isinstance(e, If):
        return If(_sv(e.cond, x, inst, wt, wv), _sv(e.then, x, inst, wt, wv), _sv(e.else_, x, inst, wt, wv))
    raise TypeError(f"not an IR term: {e!r}")


def _fresh_clashing(bs: tuple, danger: set) -> tuple:
    return tuple(fresh(b) if b in danger else b for b in bs)


def _rename_under(bound, annot, old: tuple, new: tuple):
    m = {a: TVar(b) for a, b in zip(old, new) if a != b}
    bound = _sty(bound, m)
    if annot is not None:
        annot = TypeScheme(new, subst_ty(annot.body, m))
    return bound, annot


def _avoid_var(var: str, body, wv: set):
    if var in wv:
        nv = fresh(var)
        return nv, rename_var(body, var, nv)
    return var, body


def _sv_handler(h: Handler, x, inst, wt, wv) -> Handler:
    if h.ret_var == x:
        ret_var, ret_body = h.ret_var, h.ret_body
    else:
        ret_var, ret_body = _avoid_var(h.ret_var, h.ret_body, wv)
        ret_body = _sv(ret_body, x, inst, wt, wv)
    clauses = []
    for c in h.clauses:
        bs, body = c.binders, c.body
        if wt.intersection(bs):
            bs = _fresh_clashing(bs, wt)
            body = _sty(body, {a: TVar(b) for a, b in zip(c.binders, bs) if a != b})
        if c.var == x:
            clauses.append(OpClause(bs, c.op, c.var, body))
            continue
        var, body = _avoid_var(c.var, body, wv)
        clauses.append(OpClause(bs, c.op, var, _sv(body, x, inst, wt, wv)))
    return Handler(ret_var, ret_body, tuple(clauses))


def _sv_frame(f, x, inst, wt, wv):
    if isinstance(f, LetFrame):
        if f.var == x:
            return f
        var, body = _avoid_var(f.var, f.body, wv)
        return LetFrame(var, f.binders, f.annot, _sv(body, x, inst, wt, wv))
    if isinstance(f, HandleFrame):
        return HandleFrame(_sv_handler(f.handler, x, inst, wt, wv))
    if isinstance(f, AppL):
        return AppL(_sv(f.arg, x, inst, wt, wv))
    if isinstance(f, AppR):
        return AppR(_sv(f.fn, x, inst, wt, wv))
    if isinstance(f, PairL):
        return PairL(_sv(f.right, x, inst, wt, wv))
    if isinstance(f, PairR):
        return PairR(_sv(f.left, x, inst, wt, wv))
    if isinstance(f, IfFrame):
        return IfFrame(_sv(f.then, x, inst, wt, wv), _sv(f.else_, x, inst, wt, wv))
    return f


# ---------------------------------------------------------------------------
# continuation substitution


def cont_subst(e, K: EvalCtx, schemes, pv: PolyValue):
    """Replace every resumption in e by the captured continuation K.

    schemes and pv must be bound by exactly binders(K).
    """
    betas = K.binders()
    if pv.binders != betas or any(s.bound != betas for s in schemes):
        raise SubstitutionError("continuation binders do not match the captured value and schemes")
    danger = ftv_ctx(K) | ftv_term(pv) | set().union(*(S.ftv(s) for s in schemes)) | set(betas)
    return _cs(e, K, [s.body for s in schemes], pv, danger)


def _cs_binders(bs: tuple, body, danger: set):
    if not danger.intersection(bs):
        return bs, body
    new = _fresh_clashing(bs, danger)
    return new, _sty(body, {a: TVar(b) for a, b in zip(bs, new) if a != b})


def _cs(e, K, Cs, pv, danger):
    if isinstance(e, (VarApp, Const)):
        return e
    if isinstance(e, Resume):
        gammas, body = _cs_binders(e.binders, e.body, danger)
        if len(gammas) != len(Cs):
            raise SubstitutionError(
                f"resume binds {len(gammas)} type variables but the operation has {len(Cs)}"
            )
        body = _cs(body, K, Cs, pv, danger)
        body = subst_ty_ir(body, zip(gammas, Cs))
        body = subst_val(body, PolyValue((), pv.value), e.var)
        y = fresh("k")
        betas = K.binders()
        return Let(y, betas, None, body, K.plug(VarApp(y, tuple(TVar(b) for b in betas))))
    if isinstance(e, Abs):
        return Abs(e.var, e.annot, _cs(e.body, K, Cs, pv, danger))
    if isinstance(e, App):
        return App(_cs(e.fn, K, Cs, pv, danger), _cs(e.arg, K, Cs, pv, danger))
    if isinstance(e, Let):
        bs, bound = _cs_binders(e.binders, e.bound, danger)
        annot = e.annot
        if bs != e.binders and annot is not None:
            annot = TypeScheme(bs, subst_ty(annot.body, {a: TVar(b) for a, b in zip(e.binders, bs)}))
        return Let(e.var, bs, annot, _cs(bound, K, Cs, pv, danger), _cs(e.body, K, Cs, pv, danger))
    if isinstance(e, OpCall):
        return OpCall(e.op, e.targs, _cs(e.arg, K, Cs, pv, danger))
    if isinstance(e, OpCont):
        if danger.intersection(e.pv.binders):
            e = freshen_opcont(e)
        inner = e.pv
        return OpCont(e.op, e.schemes, PolyValue(inner.binders, _cs(inner.value, K, Cs, pv, danger)), e.ctx)
    if isinstance(e, Handle):
        h = e.handler
        h2 = Handler(h.ret_var, _cs(h.ret_body, K, Cs, pv, danger), h.clauses)
        return Handle(_cs(e.body, K, Cs, pv, danger), h2)
    if isinstance(e, Pair):
        return Pair(_cs(e.left, K, Cs, pv, danger), _cs(e.right, K, Cs, pv, danger))
    if isinstance(e, Proj):
        return Proj(e.index, _cs(e.arg, K, Cs, pv, danger))
    if isinstance(e, If):
        return If(_cs(e.cond, K, Cs, pv, danger), _cs(e.then, K, Cs, pv, danger), _cs(e.else_, K, Cs, pv, danger))
    raise TypeError(f"not an IR term: {e!r}")


# ---------------------------------------------------------------------------
# serialization


class _Namer:
    """Assigns canonical names to binders in order of appearance."""

    def __init__(self, normalize: bool, anonymous: bool = False):
        self.normalize = normalize or anonymous
        self.anonymous = anonymous
        self.n = 0

    def bind(self, env: dict, names) -> tuple:
        if not self.normalize:
            return dict(env), tuple(names)
        env = dict(env)
        out = []
        for nm in names:
            self.n += 1
            c = f"_{self.n}" if self.anonymous else f"{S.base_name(nm)}{self.n}"
            env[nm] = c
            out.append(c)
        return env, tuple(out)


def show(e, normalize: bool = True, anonymous: bool = False) -> str:
    """Fully parenthesized prefix rendering of an IR term, context or value.

    anonymous drops source names entirely, so equal output means alpha-equivalence.
    """
    p = _Printer(_Namer(normalize, anonymous))
    if isinstance(e, EvalCtx):
        return p.ctx(e, {}, {})
    if isinstance(e, Handler):
        return p.handler(e, {}, {})
    return p.term(e, {}, {})


def show_type(t) -> str:
    from .parser import show_type as st

    return st(t)


class _Printer:
    def __init__(self, namer: _Namer):
        self.namer = namer

    def ty(self, t, tenv: dict) -> str:
        if tenv:
            t = subst_ty(t, {k: TVar(v) for k, v in tenv.items()})
        return show_type(t)

    def scheme(self, s: TypeScheme, tenv: dict) -> str:
        tenv2, bs = self.namer.bind(tenv, s.bound)
        body = self.ty(s.body, tenv2)
        return f"forall {' '.join(bs)}. {body}" if bs else body

    def targs(self, ts, tenv) -> str:
        return "[" + " ".join(self.ty(t, tenv) for t in ts) + "]"

    def term(self, e, tenv: dict, venv: dict) -> str:
        if isinstance(e, VarApp):
            name = venv.get(e.name, e.name)
            return f"({name} {self.targs(e.targs, tenv)})" if e.targs else name
        if isinstance(e, Const):
            return S.show_const(e.value)
        if isinstance(e, Abs):
            venv2, (x,) = self.namer.bind(venv, [e.var])
            a = e.annot
            if isinstance(a, S.Arrow):
                arrow = "->" if not a.eff else "-{" + ", ".join(sorted(a.eff)) + "}->"
                head = f"(fun ({x} : {self.ty(a.dom, tenv)}) {arrow} {self.ty(a.cod, tenv)}."
            else:
                head = f"(fun {x}."
            return f"{head} {self.term(e.body, tenv, venv2)})"
        if isinstance(e, App):
            return f"({self.term(e.fn, tenv, venv)} {self.term(e.arg, tenv, venv)})"
        if isinstance(e, Let):
            tenv2, bs = self.namer.bind(tenv, e.binders)
            bound = self.term(e.bound, tenv2, venv)
            annot = f" : {self.ty(e.annot.body, {**tenv2, **dict(zip(e.annot.bound, bs))})}" if e.annot else ""
            venv2, (x,) = self.namer.bind(venv, [e.var])
            return f"(let {x}{annot} = Λ[{' '.join(bs)}]. {bound} in {self.term(e.body, tenv, venv2)})"
        if isinstance(e, OpCall):
            return f"(#{e.op} {self.targs(e.targs, tenv)} {self.term(e.arg, tenv, venv)})"
        if isinstance(e, OpCont):
            schemes = ", ".join(self.scheme(s, tenv) for s in e.schemes)
            return f"#{e.op}{{{schemes}; {self.poly(e.pv, tenv, venv)}; {self.ctx(e.ctx, tenv, venv)}}}"
        if isinstance(e, PolyValue):
            return self.poly(e, tenv, venv)
        if isinstance(e, Handle):
            return f"(handle {self.term(e.body, tenv, venv)} with {self.handler(e.handler, tenv, venv)})"
        if isinstance(e, Resume):
            tenv2, bs = self.namer.bind(tenv, e.binders)
            venv2, (x,) = self.namer.bind(venv, [e.var])
            return f"(resume [{' '.join(bs)}] {x}. {self.term(e.body, tenv2, venv2)})"
        if isinstance(e, Pair):
            return f"(pair {self.term(e.left, tenv, venv)} {self.term(e.right, tenv, venv)})"
        if isinstance(e, Proj):
            return f"({'fst' if e.index == 1 else 'snd'} {self.term(e.arg, tenv, venv)})"
        if isinstance(e, If):
            return (f"(if {self.term(e.cond, tenv, venv)} {self.term(e.then, tenv, venv)} "
                    f"{self.term(e.else_, tenv, venv)})")
        raise TypeError(f"not an IR term: {e!r}")

    def poly(self, pv: PolyValue, tenv, venv) -> str:
        tenv2, bs = self.namer.bind(tenv, pv.binders)
        return f"Λ[{' '.join(bs)}]. {self.term(pv.value, tenv2, venv)}"

    def handler(self, h: Handler, tenv, venv) -> str:
        venv2, (x,) = self.namer.bind(venv, [h.ret_var])
        parts = [f"return {x} -> {self.term(h.ret_body, tenv, venv2)}"]
        for c in h.clauses:
            tenv2, bs = self.namer.bind(tenv, c.binders)
            venv3, (y,) = self.namer.bind(venv, [c.var])
            parts.append(f"Λ[{' '.join(bs)}]. {c.op}({y}) -> {self.term(c.body, tenv2, venv3)}")
        return "{" + "; ".join(parts) + "}"

    def ctx(self, K: EvalCtx, tenv, venv) -> str:
        out = []
        for f in K.frames:
            if isinstance(f, AppL):
                out.append(f"([] {self.term(f.arg, tenv, venv)})")
            elif isinstance(f, AppR):
                out.append(f"({self.term(f.fn, tenv, venv)} [])")
            elif isinstance(f, LetFrame):
                venv2, (x,) = self.namer.bind(venv, [f.var])
                body = self.term(f.body, tenv, venv2)
                tenv, bs = self.namer.bind(tenv, f.binders)
                out.append(f"(let {x} = Λ[{' '.join(bs)}]. [] in {body})")
            elif isinstance(f, OpArg):
                out.append(f"(#{f.op} {self.targs(f.targs, tenv)} [])")
            elif isinstance(f, HandleFrame):
                out.append(f"(handle [] with {self.handler(f.handler, tenv, venv)})")
            elif isinstance(f, PairL):
                out.append(f"(pair [] {self.term(f.right, tenv, venv)})")
            elif isinstance(f, PairR):
                out.append(f"(pair {self.term(f.left, tenv, venv)} [])")
            elif isinstance(f, ProjFrame):
                out.append(f"({'fst' if f.index == 1 else 'snd'} [])")
            elif isinstance(f, IfFrame):
                out.append(f"(if [] {self.term(f.then, tenv, venv)} {self.term(f.else_, tenv, venv)})")
        return "[" + " | ".join(out) + "]"


def alpha_eq(e1, e2) -> bool:
    """Alpha-equivalence of closed IR terms via canonical printing."""
    return show(e1, anonymous=True) == show(e2, anonymous=True)


def show_value(v) -> str:
    """Surface-style rendering of a final value."""
    if isinstance(v, Const):
        if isinstance(v.value, S.PrimC):
            return "<fun>"
        return S.show_const(v.value)
    if isinstance(v, Pair):
        return f"({show_value(v.left)}, {show_value(v.right)})"
    if isinstance(v, Abs):
        return "<fun>"
    return show(v)
