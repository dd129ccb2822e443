"""Type inference for surface programs, fused with elaboration to the IR.

Type metavariables are mutable cells carrying a let-level (for
generalization) and the set of rigid variables they may mention (so a
resumption's fresh variables cannot leak out of its argument).  Arrow
effects are effect variables related by inclusion constraints, solved to
their least solution once the whole program has been traversed.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from . import ir
from . import syntax as S
from .errors import Span, TypeCheckError
from .syntax import Arrow, Base, Prod, TVar, TypeScheme, TypingContext, fresh


class Meta:
    __slots__ = ("id", "level", "scope", "ref")

    def __init__(self, id: int, level: int, scope: frozenset):
        self.id = id
        self.level = level
        self.scope = scope
        self.ref = None

    def __repr__(self):
        return f"?{self.id}"


class EffVar:
    __slots__ = ("id",)

    def __init__(self, id: int):
        self.id = id

    def __repr__(self):
        return f"?e{self.id}"


@dataclass(frozen=True)
class ResumptionCtx:
    tyvars: tuple
    param: str
    param_ty: object
    cont_dom: object
    cont_eff: EffVar
    cont_cod: object


@dataclass(frozen=True)
class Inclusion:
    """lhs_vars ∪ lhs_ops ⊑ rhs_var ∪ rhs_ops; a ground check when rhs_var is None."""

    lhs_vars: tuple
    lhs_ops: frozenset
    rhs_var: Optional[EffVar]
    rhs_ops: frozenset
    rule: str
    span: Optional[Span]


@dataclass
class CheckResult:
    type: object
    effect: frozenset
    ir: object
    sigs: dict


def prune(t):
    while isinstance(t, Meta) and t.ref is not None:
        t = t.ref
    return t


class Inferencer:
    def __init__(self, sigs: dict, resume_renaming: bool = True):
        self.sigs = sigs
        self.resume_renaming = resume_renaming
        self.level = 0
        self.constraints: list = []
        self._ids = itertools.count(1)
        self.metas: list = []

    # -- fresh variables

    def fresh_meta(self, ctx: TypingContext) -> Meta:
        m = Meta(next(self._ids), self.level, ctx.tyvars)
        self.metas.append(m)
        return m

    def fresh_evar(self) -> EffVar:
        return EffVar(next(self._ids))

    # -- effect constraints

    def sub(self, lhs, rhs, rule: str, span=None) -> None:
        """Record lhs ⊑ rhs; lhs is a list of effect variables and op sets."""
        vars_ = tuple(x for x in lhs if isinstance(x, EffVar))
        ops: frozenset = frozenset().union(*(x for x in lhs if not isinstance(x, EffVar)))
        if isinstance(rhs, tuple):
            rvar, rops = rhs
        elif isinstance(rhs, EffVar):
            rvar, rops = rhs, frozenset()
        else:
            rvar, rops = None, rhs
        self.constraints.append(Inclusion(vars_, ops, rvar, frozenset(rops), rule, span))

    def solve_effects(self) -> dict:
        sol: dict = {}
        changed = True
        while changed:
            changed = False
            for c in self.constraints:
                if c.rhs_var is None:
                    continue
                val = set(c.lhs_ops)
                for v in c.lhs_vars:
                    val |= sol.get(v, frozenset())
                new = val - c.rhs_ops
                cur = sol.get(c.rhs_var, frozenset())
                if not new <= cur:
                    sol[c.rhs_var] = cur | new
                    changed = True
        for c in self.constraints:
            if c.rhs_var is not None:
                continue
            val = set(c.lhs_ops)
            for v in c.lhs_vars:
                val |= sol.get(v, frozenset())
            extra = val - c.rhs_ops
            if extra:
                raise TypeCheckError(
                    c.rule,
                    f"effect {S.show_effect(extra)} is not allowed where at most {S.show_effect(c.rhs_ops)} is permitted",
                    c.span,
                )
        return {k: frozenset(v) for k, v in sol.items()}

    # -- unification

    def show(self, t) -> str:
        from .parser import show_type

        return show_type(self._display(t))

    def _display(self, t):
        t = prune(t)
        if isinstance(t, Meta):
            return TVar(f"?{t.id}")
        if isinstance(t, Arrow):
            eff = t.eff if isinstance(t.eff, frozenset) else f"?e{t.eff.id}"
            return Arrow(self._display(t.dom), eff, self._display(t.cod))
        if isinstance(t, Prod):
            return Prod(self._display(t.left), self._display(t.right))
        return t

    def unify(self, t1, t2, rule: str, span=None, what: str | None = None) -> None:
        try:
            self._unify(t1, t2, rule, span)
        except _Clash as exc:
            prefix = f"{what}: " if what else ""
            raise TypeCheckError(rule, f"{prefix}{exc}", span) from None

    def _unify(self, t1, t2, rule, span) -> None:
        t1, t2 = prune(t1), prune(t2)
        if t1 is t2:
            return
        if isinstance(t1, Meta):
            self._bind(t1, t2)
            return
        if isinstance(t2, Meta):
            self._bind(t2, t1)
            return
        if isinstance(t1, TVar) and isinstance(t2, TVar):
            if t1.name != t2.name:
                raise _Clash(f"rigid type variables {t1.name} and {t2.name} differ")
            return
        if isinstance(t1, Base) and isinstance(t2, Base):
            if t1.kind != t2.kind:
                raise _Clash(f"cannot unify {t1.kind} with {t2.kind}")
            return
        if isinstance(t1, Arrow) and isinstance(t2, Arrow):
            self._unify(t1.dom, t2.dom, rule, span)
            self._unify(t1.cod, t2.cod, rule, span)
            self._unify_eff(t1.eff, t2.eff, rule, span)
            return
        if isinstance(t1, Prod) and isinstance(t2, Prod):
            self._unify(t1.left, t2.left, rule, span)
            self._unify(t1.right, t2.right, rule, span)
            return
        raise _Clash(f"cannot unify {self.show(t1)} with {self.show(t2)}")

    def _unify_eff(self, e1, e2, rule, span) -> None:
        if isinstance(e1, frozenset) and isinstance(e2, frozenset):
            if e1 != e2:
                raise _Clash(f"effects {S.show_effect(e1)} and {S.show_effect(e2)} differ")
            return
        if e1 is e2:
            return
        self.sub([e1], e2, rule, span)
        self.sub([e2], e1, rule, span)

    def _bind(self, m: Meta, t) -> None:
        stack = [t]
        while stack:
            u = prune(stack.pop())
            if u is m:
                raise _Clash(f"occurs check: {self.show(m)} occurs in {self.show(t)}")
            if isinstance(u, Meta):
                u.level = min(u.level, m.level)
                u.scope = u.scope & m.scope
            elif isinstance(u, TVar):
                if u.name not in m.scope:
                    raise _Clash(f"rigid type variable {u.name} would escape its scope")
            elif isinstance(u, Arrow):
                stack.append(u.dom)
                stack.append(u.cod)
            elif isinstance(u, Prod):
                stack.append(u.left)
                stack.append(u.right)
        m.ref = t

    # -- schemes

    def instantiate(self, s: TypeScheme, ctx: TypingContext) -> tuple:
        metas = tuple(self.fresh_meta(ctx) for _ in s.bound)
        return self._inst(s.body, dict(zip(s.bound, metas))), metas

    def _inst(self, t, m: dict):
        t = prune(t)
        if not m:
            return t
        if isinstance(t, TVar):
            return m.get(t.name, t)
        if isinstance(t, Arrow):
            return Arrow(self._inst(t.dom, m), t.eff, self._inst(t.cod, m))
        if isinstance(t, Prod):
            return Prod(self._inst(t.left, m), self._inst(t.right, m))
        return t

    def generalize(self, t) -> TypeScheme:
        names = []
        seen: set = set()
        stack = [t]
        order = []
        while stack:
            u = prune(stack.pop())
            if isinstance(u, Meta):
                if u.level > self.level and u.id not in seen:
                    seen.add(u.id)
                    order.append(u)
            elif isinstance(u, Arrow):
                stack.append(u.cod)
                stack.append(u.dom)
            elif isinstance(u, Prod):
                stack.append(u.right)
                stack.append(u.left)
        for i, m in enumerate(order):
            name = fresh(_letter(i))
            m.ref = TVar(name)
            names.append(name)
        return TypeScheme(tuple(names), t)

    # -- terms

    def infer(self, ctx: TypingContext, R: Optional[ResumptionCtx], M, Sren: dict):
        span = getattr(M, "span", None)
        if isinstance(M, S.Var):
            s = ctx.lookup(M.name)
            if s is None:
                raise TypeCheckError("TS-Var", f"unbound variable {M.name}", span)
            t, metas = self.instantiate(s, ctx)
            return t, self.fresh_evar(), ir.VarApp(Sren[M.name], metas)

        if isinstance(M, S.Const):
            return S.ConstTable.typing(M.value), self.fresh_evar(), ir.Const(M.value)

        if isinstance(M, S.Abs):
            a = self.fresh_meta(ctx)
            x = fresh(M.var)
            tb, eb, body = self.infer(ctx.bind(M.var, a), R, M.body, {**Sren, M.var: x})
            lat = self.fresh_evar()
            self.sub([eb], lat, "TS-Abs", span)
            ty = Arrow(a, lat, tb)
            return ty, self.fresh_evar(), ir.Abs(x, ty, body)

        if isinstance(M, S.App):
            tf, ef, f = self.infer(ctx, R, M.fn, Sren)
            ta, ea, a = self.infer(ctx, R, M.arg, Sren)
            fn = prune(tf)
            if isinstance(fn, Arrow):
                self.unify(ta, fn.dom, "TS-App", getattr(M.arg, "span", span),
                           f"argument has type {self.show(ta)} but the function expects {self.show(fn.dom)}")
                res, lat = fn.cod, fn.eff
            else:
                res, lat = self.fresh_meta(ctx), self.fresh_evar()
                self.unify(tf, Arrow(ta, lat, res), "TS-App", span, "not a function")
            ev = self.fresh_evar()
            self.sub([ef, ea, lat], ev, "TS-App", span)
            return res, ev, ir.App(f, a)

        if isinstance(M, S.Let):
            self.level += 1
            t1, e1, b1 = self.infer(ctx, R, M.bound, Sren)
            self.level -= 1
            scheme = self.generalize(t1)
            x = fresh(M.var)
            t2, e2, b2 = self.infer(ctx.bind(M.var, scheme), R, M.body, {**Sren, M.var: x})
            ev = self.fresh_evar()
            self.sub([e1, e2], ev, "TS-Let", span)
            return t2, ev, ir.Let(x, scheme.bound, scheme, b1, b2)

        if isinstance(M, S.OpCall):
            sig = self.sigs.get(M.op)
            if sig is None:
                raise TypeCheckError("TS-Op", f"undeclared operation {M.op}", span)
            metas = tuple(self.fresh_meta(ctx) for _ in sig.bound)
            m = dict(zip(sig.bound, metas))
            dom, cod = self._inst(sig.dom, m), self._inst(sig.cod, m)
            t, e, arg = self.infer(ctx, R, M.arg, Sren)
            self.unify(t, dom, "TS-Op", getattr(M.arg, "span", span),
                       f"argument of #{M.op} must have type {self.show(dom)}, found {self.show(t)}")
            ev = self.fresh_evar()
            self.sub([e, frozenset([M.op])], ev, "TS-Op", span)
            return cod, ev, ir.OpCall(M.op, metas, arg)

        if isinstance(M, S.Handle):
            ts, es, body = self.infer(ctx, R, M.body, Sren)
            (eps_ret, ops), out_ty, out_eff, h = self.tc_handler(ctx, R, M.handler, ts, Sren)
            self.sub([es], (eps_ret, ops), "TS-Handle", span)
            return out_ty, out_eff, ir.Handle(body, h)

        if isinstance(M, S.Resume):
            return self._resume(ctx, R, M, Sren, span)

        if isinstance(M, S.Pair):
            tl, el, l = self.infer(ctx, R, M.left, Sren)
            tr, er, r = self.infer(ctx, R, M.right, Sren)
            ev = self.fresh_evar()
            self.sub([el, er], ev, "TS-Pair", span)
            return Prod(tl, tr), ev, ir.Pair(l, r)

        if isinstance(M, S.Proj):
            t, e, a = self.infer(ctx, R, M.arg, Sren)
            p = prune(t)
            if not isinstance(p, Prod):
                p = Prod(self.fresh_meta(ctx), self.fresh_meta(ctx))
                self.unify(t, p, "TS-Proj", span, f"{'fst' if M.index == 1 else 'snd'} expects a pair")
            return (p.left if M.index == 1 else p.right), e, ir.Proj(M.index, a)

        if isinstance(M, S.If):
            tc, ec, c = self.infer(ctx, R, M.cond, Sren)
            self.unify(tc, S.BOOL, "TS-If", getattr(M.cond, "span", span), "condition must be bool")
            t1, e1, a = self.infer(ctx, R, M.then, Sren)
            t2, e2, b = self.infer(ctx, R, M.else_, Sren)
            self.unify(t1, t2, "TS-If", span, "branches have different types")
            ev = self.fresh_evar()
            self.sub([ec, e1, e2], ev, "TS-If", span)
            return t1, ev, ir.If(c, a, b)

        raise TypeError(f"not a surface term: {M!r}")

    def _resume(self, ctx, R, M, Sren, span):
        if R is None:
            raise TypeCheckError("TS-Resume", "resume outside an operation clause", span)
        if self.resume_renaming:
            betas = tuple(fresh(a) for a in R.tyvars)
            inner = ctx.bind_tyvars(betas)
        else:
            betas = R.tyvars
            inner = ctx
        ren = [(a, TVar(b)) for a, b in zip(R.tyvars, betas)]
        y = fresh(R.param)
        inner = inner.bind(R.param, S.subst_ty(R.param_ty, ren))
        t, e, arg = self.infer(inner, R, M.arg, {**Sren, R.param: y})
        expected = S.subst_ty(R.cont_dom, ren)
        self.unify(t, expected, "TS-Resume", span,
                   f"argument must have type B[β̄/ᾱ] = {self.show(expected)}, found {self.show(t)}")
        ev = self.fresh_evar()
        self.sub([e, R.cont_eff], ev, "TS-Resume", span)
        return R.cont_cod, ev, ir.Resume(betas, y, arg)

    def tc_handler(self, ctx, R_outer, H: S.Handler, scrut_ty, Sren):
        span = H.span
        out_eff = self.fresh_evar()
        x = fresh(H.ret_var)
        tr, er, ret = self.infer(ctx.bind(H.ret_var, scrut_ty), R_outer, H.ret_body, {**Sren, H.ret_var: x})
        out_ty = tr
        self.sub([er], out_eff, "THS-Return", span)
        eps_ret = self.fresh_evar()
        self.sub([eps_ret], out_eff, "THS-Return", span)
        clauses = []
        ops: set = set()
        for c in H.clauses:
            cspan = c.span or span
            if c.op in ops:
                raise TypeCheckError("THS-Op", f"duplicate clause for operation {c.op}", cspan)
            ops.add(c.op)
            sig = self.sigs.get(c.op)
            if sig is None:
                raise TypeCheckError("THS-Op", f"undeclared operation {c.op}", cspan)
            alphas = tuple(fresh(a) for a in sig.bound)
            dom, cod = sig.instantiate([TVar(a) for a in alphas])
            y = fresh(c.var)
            cctx = ctx.bind_tyvars(alphas).bind(c.var, dom)
            Rc = ResumptionCtx(alphas, c.var, dom, cod, out_eff, out_ty)
            tc, ec, body = self.infer(cctx, Rc, c.body, {**Sren, c.var: y})
            self.unify(tc, out_ty, "THS-Op", cspan,
                       f"body of the {c.op} clause has type {self.show(tc)} but the return clause has type "
                       f"{self.show(out_ty)}")
            self.sub([ec], out_eff, "THS-Op", cspan)
            clauses.append(ir.OpClause(alphas, c.op, y, body))
        return (eps_ret, frozenset(ops)), out_ty, out_eff, ir.Handler(x, ret, tuple(clauses))

    # -- solved output

    def zonk_type(self, t, sol: dict):
        t = prune(t)
        if isinstance(t, Meta):
            t.ref = S.UNIT
            return S.UNIT
        if isinstance(t, Arrow):
            eff = t.eff if isinstance(t.eff, frozenset) else sol.get(t.eff, frozenset())
            return Arrow(self.zonk_type(t.dom, sol), eff, self.zonk_type(t.cod, sol))
        if isinstance(t, Prod):
            return Prod(self.zonk_type(t.left, sol), self.zonk_type(t.right, sol))
        return t

    def zonk(self, e, sol: dict):
        z = lambda u: self.zonk(u, sol)  # noqa: E731
        zt = lambda t: self.zonk_type(t, sol)  # noqa: E731
        if isinstance(e, ir.VarApp):
            return ir.VarApp(e.name, tuple(zt(a) for a in e.targs))
        if isinstance(e, ir.Const):
            return e
        if isinstance(e, ir.Abs):
            return ir.Abs(e.var, zt(e.annot), z(e.body))
        if isinstance(e, ir.App):
            return ir.App(z(e.fn), z(e.arg))
        if isinstance(e, ir.Let):
            annot = TypeScheme(e.annot.bound, zt(e.annot.body)) if e.annot is not None else None
            return ir.Let(e.var, e.binders, annot, z(e.bound), z(e.body))
        if isinstance(e, ir.OpCall):
            return ir.OpCall(e.op, tuple(zt(a) for a in e.targs), z(e.arg))
        if isinstance(e, ir.Handle):
            h = e.handler
            clauses = tuple(ir.OpClause(c.binders, c.op, c.var, z(c.body)) for c in h.clauses)
            return ir.Handle(z(e.body), ir.Handler(h.ret_var, z(h.ret_body), clauses))
        if isinstance(e, ir.Resume):
            return ir.Resume(e.binders, e.var, z(e.body))
        if isinstance(e, ir.Pair):
            return ir.Pair(z(e.left), z(e.right))
        if isinstance(e, ir.Proj):
            return ir.Proj(e.index, z(e.arg))
        if isinstance(e, ir.If):
            return ir.If(z(e.cond), z(e.then), z(e.else_))
        raise TypeError(f"cannot zonk {e!r}")


class _Clash(Exception):
    pass


def _letter(i: int) -> str:
    return "abcdefghijklmnopqrstuvwxyz"[i % 26]


def check_program(program: S.Program, resume_renaming: bool = True) -> CheckResult:
    """Infer the type and effect of a closed program and elaborate it."""
    sigs = program.sig_table()
    inf = Inferencer(sigs, resume_renaming=resume_renaming)
    t, ev, e = inf.infer(TypingContext(), None, program.main, {})
    sol = inf.solve_effects()
    ty = inf.zonk_type(t, sol)
    elab = inf.zonk(e, sol)
    return CheckResult(ty, sol.get(ev, frozenset()), elab, sigs)


def infer_term(M, sigs: dict | None = None, resume_renaming: bool = True) -> CheckResult:
    return check_program(S.Program(tuple((sigs or {}).values()), M), resume_renaming)
