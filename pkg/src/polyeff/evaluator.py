"""Small-step evaluation of IR terms with bubbling operation capture."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

from . import ir
from . import syntax as S
from .errors import IRTypeError, StepCheckFailure, SubstitutionError
from .ir import (App, Const, EvalCtx, Handle, If, Let, OpCall, OpCont, Pair, PolyValue, Proj, is_value)
from .irtyping import IRChecker
from .syntax import BOT, TVar, TypeScheme, TypingContext, fresh

DEFAULT_FUEL = 100_000
TRACE_CAP = 10_000


@dataclass(frozen=True)
class Value:
    value: object


@dataclass(frozen=True)
class UnhandledOp:
    op: str
    schemes: tuple
    pv: PolyValue
    ctx: EvalCtx


@dataclass(frozen=True)
class Stuck:
    reason: str
    term: object
    redex: object = None


@dataclass(frozen=True)
class FuelExhausted:
    term: object


@dataclass
class StepTrace:
    entries: list = field(default_factory=list)
    steps: int = 0
    truncated: bool = False
    erasure_checks: list = field(default_factory=list)
    cap: Optional[int] = TRACE_CAP

    def record(self, rule: str, term) -> None:
        self.steps += 1
        if self.cap is None or len(self.entries) < self.cap:
            self.entries.append((rule, term))
        else:
            self.truncated = True

    def rules(self) -> list:
        return [r for r, _ in self.entries]


def default_fuel() -> int:
    env = os.environ.get("POLYEFF_FUEL")
    if env:
        try:
            n = int(env)
        except ValueError:
            return DEFAULT_FUEL
        if n > 0:
            return n
    return DEFAULT_FUEL


# ---------------------------------------------------------------------------
# decomposition


def decompose(e) -> Optional[tuple]:
    """Split e into (K, redex) with K[redex] = e; see _decompose."""
    d = _decompose(e)
    return None if d is None else (EvalCtx(tuple(d[0])), d[1])


def _decompose(e) -> Optional[tuple]:
    """Split e into (frames, redex) by leftmost-innermost call-by-value search.

    Returns None when e is a value or a captured operation at the top.
    The redex may be irreducible, in which case the term is stuck.
    """
    if is_value(e) or isinstance(e, OpCont):
        return None
    frames: list = []
    cur = e
    while True:
        if isinstance(cur, App):
            if not is_value(cur.fn):
                if isinstance(cur.fn, OpCont):
                    return frames, cur
                frames.append(ir.AppL(cur.arg))
                cur = cur.fn
                continue
            if not is_value(cur.arg):
                if isinstance(cur.arg, OpCont):
                    return frames, cur
                frames.append(ir.AppR(cur.fn))
                cur = cur.arg
                continue
            return frames, cur
        if isinstance(cur, Let):
            if is_value(cur.bound) or isinstance(cur.bound, OpCont):
                return frames, cur
            frames.append(ir.LetFrame(cur.var, cur.binders, cur.annot, cur.body))
            cur = cur.bound
            continue
        if isinstance(cur, OpCall):
            if is_value(cur.arg) or isinstance(cur.arg, OpCont):
                return frames, cur
            frames.append(ir.OpArg(cur.op, cur.targs))
            cur = cur.arg
            continue
        if isinstance(cur, Handle):
            if is_value(cur.body) or isinstance(cur.body, OpCont):
                return frames, cur
            frames.append(ir.HandleFrame(cur.handler))
            cur = cur.body
            continue
        if isinstance(cur, Pair):
            if not is_value(cur.left):
                if isinstance(cur.left, OpCont):
                    return frames, cur
                frames.append(ir.PairL(cur.right))
                cur = cur.left
                continue
            if isinstance(cur.right, OpCont):
                return frames, cur
            frames.append(ir.PairR(cur.left))
            cur = cur.right
            continue
        if isinstance(cur, Proj):
            if is_value(cur.arg) or isinstance(cur.arg, OpCont):
                return frames, cur
            frames.append(ir.ProjFrame(cur.index))
            cur = cur.arg
            continue
        if isinstance(cur, If):
            if is_value(cur.cond) or isinstance(cur.cond, OpCont):
                return frames, cur
            frames.append(ir.IfFrame(cur.then, cur.else_))
            cur = cur.cond
            continue
        return frames, cur


# ---------------------------------------------------------------------------
# reduction


def _bubble(oc: OpCont, frame) -> OpCont:
    return OpCont(oc.op, oc.schemes, oc.pv, oc.ctx.wrap(frame))


def reduce(e, erasure_log: list | None = None) -> Optional[tuple]:
    """Apply the reduction rule whose left-hand side matches e, if any."""
    if isinstance(e, App):
        f, a = e.fn, e.arg
        if isinstance(f, OpCont):
            return _bubble(f, ir.AppL(a)), "R-OpApp1"
        if is_value(f) and isinstance(a, OpCont):
            return _bubble(a, ir.AppR(f)), "R-OpApp2"
        if isinstance(f, ir.Abs) and is_value(a):
            return ir.subst_val(f.body, PolyValue((), a), f.var), "R-Beta"
        if isinstance(f, Const) and isinstance(a, Const):
            c = S.ConstTable.delta(f.value, a.value)
            return (Const(c), "R-Const") if c is not None else None
        return None

    if isinstance(e, Let):
        if isinstance(e.bound, OpCont):
            oc = e.bound
            if set(e.binders).intersection(oc.ctx.binders()):
                oc = ir.freshen_opcont(oc)
            schemes = tuple(TypeScheme(e.binders + s.bound, s.body) for s in oc.schemes)
            pv = PolyValue(e.binders + oc.pv.binders, oc.pv.value)
            frame = ir.LetFrame(e.var, e.binders, e.annot, e.body)
            return OpCont(oc.op, schemes, pv, oc.ctx.wrap(frame)), "R-OpLet"
        if is_value(e.bound):
            return ir.subst_val(e.body, PolyValue(e.binders, e.bound), e.var), "R-Let"
        return None

    if isinstance(e, OpCall):
        if isinstance(e.arg, OpCont):
            return _bubble(e.arg, ir.OpArg(e.op, e.targs)), "R-OpOp"
        if is_value(e.arg):
            schemes = tuple(TypeScheme((), a) for a in e.targs)
            return OpCont(e.op, schemes, PolyValue((), e.arg), ir.HOLE), "R-Op"
        return None

    if isinstance(e, Handle):
        h = e.handler
        if is_value(e.body):
            return ir.subst_val(h.ret_body, PolyValue((), e.body), h.ret_var), "R-Return"
        if isinstance(e.body, OpCont):
            oc = e.body
            if oc.op not in ir.handler_ops(h):
                return _bubble(oc, ir.HandleFrame(h)), "R-OpHandle"
            return _handle(oc, h, erasure_log), "R-Handle"
        return None

    if isinstance(e, Pair):
        if isinstance(e.left, OpCont):
            return _bubble(e.left, ir.PairL(e.right)), "R-OpPair1"
        if is_value(e.left) and isinstance(e.right, OpCont):
            return _bubble(e.right, ir.PairR(e.left)), "R-OpPair2"
        return None

    if isinstance(e, Proj):
        if isinstance(e.arg, OpCont):
            return _bubble(e.arg, ir.ProjFrame(e.index)), "R-OpProj"
        if isinstance(e.arg, Pair) and is_value(e.arg):
            return (e.arg.left if e.index == 1 else e.arg.right), "R-Proj"
        return None

    if isinstance(e, If):
        if isinstance(e.cond, OpCont):
            return _bubble(e.cond, ir.IfFrame(e.then, e.else_)), "R-OpIf"
        if isinstance(e.cond, Const) and isinstance(e.cond.value, S.BoolC):
            return (e.then if e.cond.value.value else e.else_), "R-If"
        return None

    return None


def _handle(oc: OpCont, h: ir.Handler, erasure_log: list | None):
    clause = ir.handler_clause(h, oc.op)
    if oc.ctx.binders():
        oc = ir.freshen_opcont(oc)
    betas = oc.ctx.binders()
    # private names for the clause's binders so nothing captured can collide
    alphas = tuple(fresh(a) for a in clause.binders)
    body = ir.subst_ty_ir(clause.body, [(a, TVar(b)) for a, b in zip(clause.binders, alphas)])
    K = oc.ctx.wrap(ir.HandleFrame(h))
    body = ir.cont_subst(body, K, oc.schemes, oc.pv)
    erase = [(b, BOT) for b in betas]
    targs = [S.subst_ty(s.body, erase) for s in oc.schemes]
    v = ir.subst_ty_ir(oc.pv.value, erase)
    if erasure_log is not None:
        bset = set(betas)
        ok = all(not (S.ftv(a) & bset) for a in targs) and not (ir.ftv_term(v) & bset)
        erasure_log.append(ok)
    body = ir.subst_ty_ir(body, zip(alphas, targs))
    return ir.subst_val(body, PolyValue((), v), clause.var)


def step(e, erasure_log: list | None = None) -> Optional[tuple]:
    """One evaluation step: (new term, rule name, context of the redex)."""
    d = _decompose(e)
    if d is None:
        return None
    frames, redex = d
    r = reduce(redex, erasure_log)
    if r is None:
        return None
    new, rule = r
    K = EvalCtx(tuple(frames))
    return K.plug(new), rule, K


def stuck_reason(e) -> tuple:
    d = _decompose(e)
    if d is None:
        return "no redex", None
    frames, redex = d
    if isinstance(redex, ir.VarApp):
        return f"free variable {redex.name}", redex
    if isinstance(redex, ir.Resume):
        return "resume outside a handler clause", redex
    if isinstance(redex, App) and isinstance(redex.fn, Const) and isinstance(redex.arg, Const):
        shown = f"{S.show_const(redex.fn.value)} {S.show_const(redex.arg.value)}"
        if frames and isinstance(frames[-1], ir.AppL) and isinstance(redex.fn.value, S.PrimC):
            op = redex.fn.value.op
            arg = frames[-1].arg
            rhs = S.show_const(arg.value) if isinstance(arg, Const) else ir.show(arg)
            shown = f"{S.show_const(redex.arg.value)} {op} {rhs}"
        return f"delta undefined: {shown}", redex
    return f"no rule applies to {ir.show(redex)[:80]}", redex


# ---------------------------------------------------------------------------
# driver


def run(e, fuel: int | None = None, check_steps: bool = False, sigs: dict | None = None,
        trace_cap: Optional[int] = TRACE_CAP) -> tuple:
    """Evaluate e for at most fuel steps; returns (Outcome, StepTrace)."""
    fuel = default_fuel() if fuel is None else fuel
    if fuel <= 0:
        raise ValueError("fuel must be positive")
    trace = StepTrace(cap=trace_cap)
    checker = IRChecker(sigs or {}) if check_steps else None
    ty = eff = None
    if checker is not None:
        try:
            ty, eff = checker.tc_term(TypingContext(), None, e)
        except IRTypeError as exc:
            raise StepCheckFailure(0, e, e, f"initial term is ill-typed: {exc}") from None
    cur = e
    for i in range(1, fuel + 1):
        n_checks = len(trace.erasure_checks)
        try:
            res = step(cur, trace.erasure_checks)
        except SubstitutionError as exc:
            return Stuck(str(exc), cur), trace
        if res is None:
            out = _classify(cur)
            if checker is not None:
                if isinstance(out, Stuck):
                    raise StepCheckFailure(i, cur, cur, f"progress violated: {out.reason}")
                if isinstance(out, UnhandledOp) and out.op not in eff:
                    raise StepCheckFailure(i, cur, cur, f"unhandled {out.op} outside the effect {S.show_effect(eff)}")
            return out, trace
        new, rule, _ = res
        if checker is not None:
            if not all(trace.erasure_checks[n_checks:]):
                raise StepCheckFailure(i, cur, new, "R-Handle: erased value still mentions a captured type variable")
            try:
                ty2, eff2 = checker.tc_term(TypingContext(), None, new)
            except IRTypeError as exc:
                raise StepCheckFailure(i, cur, new, f"{rule} produced an ill-typed term: {exc}") from None
            if ty2 != ty:
                raise StepCheckFailure(i, cur, new, f"{rule} changed the type")
            if not eff2 <= eff:
                raise StepCheckFailure(i, cur, new, f"{rule} grew the effect to {S.show_effect(eff2)}")
            eff = eff2
        trace.record(rule, new)
        cur = new
    if step(cur) is None:
        return _classify(cur), trace
    return FuelExhausted(cur), trace


def _classify(e):
    if is_value(e):
        return Value(e)
    if isinstance(e, OpCont):
        return UnhandledOp(e.op, e.schemes, e.pv, e.ctx)
    reason, redex = stuck_reason(e)
    return Stuck(reason, e, redex)


def show_outcome(out, ty=None) -> str:
    from .parser import show_type

    if isinstance(out, Value):
        text = ir.show_value(out.value)
        return f"{text} : {show_type(ty)}" if ty is not None else text
    if isinstance(out, UnhandledOp):
        return f"unhandled operation {out.op}"
    if isinstance(out, Stuck):
        return f"stuck: {out.reason}"
    return "fuel exhausted"
