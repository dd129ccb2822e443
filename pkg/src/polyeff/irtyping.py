"""Checker for elaborated IR terms, evaluation contexts and handlers.

Effects are computed minimally: each rule returns the least effect its
premises force, and inclusions are checked where an annotation fixes an
upper bound.  Type binders that clash with the context are renamed on
entry, so terms produced by copying continuations check up to alpha.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import ir
from . import syntax as S
from .errors import IRTypeError
from .parser import show_scheme, show_type
from .syntax import Arrow, Prod, TVar, TypeScheme, TypingContext, fresh, subst_ty

EMPTY = frozenset()


@dataclass(frozen=True)
class IRResumptionCtx:
    tyvars: tuple
    param_ty: object
    cont_dom: object
    cont_eff: frozenset
    cont_cod: object


class IRChecker:
    def __init__(self, sigs: dict):
        self.sigs = sigs

    # -- helpers

    def wf(self, ctx: TypingContext, t, rule: str) -> None:
        extra = S.ftv(t) - ctx.tyvars
        if extra:
            raise IRTypeError(rule, f"type {show_type(t)} mentions unbound type variables {sorted(extra)}")

    def expect(self, actual, expected, rule: str, what: str) -> None:
        if actual != expected:
            raise IRTypeError(rule, f"{what}: expected {show_type(expected)}, found {show_type(actual)}")

    def enter(self, ctx: TypingContext, binders: tuple):
        """Bind type variables, renaming any that are already in scope."""
        if len(set(binders)) != len(binders):
            raise IRTypeError("WF-TyVar", f"duplicate type binders {binders}")
        clash = ctx.tyvars.intersection(binders)
        if not clash:
            return ctx.bind_tyvars(binders), binders, {}
        new = tuple(fresh(b) if b in clash else b for b in binders)
        ren = {a: TVar(b) for a, b in zip(binders, new) if a != b}
        return ctx.bind_tyvars(new), new, ren

    def sig(self, op: str, rule: str):
        s = self.sigs.get(op)
        if s is None:
            raise IRTypeError(rule, f"undeclared operation {op}")
        return s

    # -- terms

    def tc_term(self, ctx: TypingContext, r: Optional[IRResumptionCtx], e) -> tuple:
        if isinstance(e, ir.VarApp):
            s = ctx.lookup(e.name)
            if s is None:
                raise IRTypeError("T-Var", f"unbound variable {e.name}")
            if len(e.targs) != len(s.bound):
                raise IRTypeError("T-Var", f"{e.name} expects {len(s.bound)} type arguments, got {len(e.targs)}")
            for a in e.targs:
                self.wf(ctx, a, "T-Var")
            return subst_ty(s.body, zip(s.bound, e.targs)), EMPTY

        if isinstance(e, ir.Const):
            return S.ConstTable.typing(e.value), EMPTY

        if isinstance(e, ir.Abs):
            a = e.annot
            if not isinstance(a, Arrow):
                raise IRTypeError("T-Abs", "abstraction lacks an arrow annotation")
            self.wf(ctx, a, "T-Abs")
            tb, eb = self.tc_term(ctx.bind(e.var, a.dom), r, e.body)
            self.expect(tb, a.cod, "T-Abs", "body type")
            if not eb <= a.eff:
                raise IRTypeError("T-Abs", f"body effect {S.show_effect(eb)} exceeds latent effect {S.show_effect(a.eff)}")
            return a, EMPTY

        if isinstance(e, ir.App):
            tf, ef = self.tc_term(ctx, r, e.fn)
            ta, ea = self.tc_term(ctx, r, e.arg)
            if not isinstance(tf, Arrow):
                raise IRTypeError("T-App", f"applying a non-function of type {show_type(tf)}")
            self.expect(ta, tf.dom, "T-App", "argument type")
            return tf.cod, ef | ea | tf.eff

        if isinstance(e, ir.Let):
            inner, bs, ren = self.enter(ctx, e.binders)
            bound = ir.subst_ty_ir(e.bound, ren) if ren else e.bound
            t1, e1 = self.tc_term(inner, r, bound)
            scheme = TypeScheme(bs, t1)
            if e.annot is not None and not S.scheme_alpha_eq(e.annot, scheme):
                raise IRTypeError("T-Let", f"annotation {show_scheme(e.annot)} does not match bound term type {show_type(t1)}")
            t2, e2 = self.tc_term(ctx.bind(e.var, scheme), r, e.body)
            return t2, e1 | e2

        if isinstance(e, ir.OpCall):
            sg = self.sig(e.op, "T-Op")
            if len(e.targs) != len(sg.bound):
                raise IRTypeError("T-Op", f"#{e.op} expects {len(sg.bound)} type arguments, got {len(e.targs)}")
            for a in e.targs:
                self.wf(ctx, a, "T-Op")
            dom, cod = sg.instantiate(e.targs)
            t, eff = self.tc_term(ctx, r, e.arg)
            self.expect(t, dom, "T-Op", f"argument of #{e.op}")
            return cod, eff | {e.op}

        if isinstance(e, ir.OpCont):
            return self.tc_opcont(ctx, e)

        if isinstance(e, ir.Handle):
            ts, es = self.tc_term(ctx, r, e.body)
            return self.tc_handler(ctx, r, e.handler, ts, es)

        if isinstance(e, ir.Resume):
            if r is None:
                raise IRTypeError("T-Resume", "resume outside an operation clause")
            missing = set(r.tyvars) - ctx.tyvars
            if missing:
                raise IRTypeError("T-Resume", f"clause type variables {sorted(missing)} not bound")
            if len(e.binders) != len(r.tyvars):
                raise IRTypeError("T-Resume", f"resume binds {len(e.binders)} type variables, expected {len(r.tyvars)}")
            inner, bs, ren = self.enter(ctx, e.binders)
            body = ir.subst_ty_ir(e.body, ren) if ren else e.body
            m = [(a, TVar(b)) for a, b in zip(r.tyvars, bs)]
            inner = inner.bind(e.var, subst_ty(r.param_ty, m))
            t, eff = self.tc_term(inner, r, body)
            self.expect(t, subst_ty(r.cont_dom, m), "T-Resume", "resume argument")
            return r.cont_cod, eff | r.cont_eff

        if isinstance(e, ir.Pair):
            tl, el = self.tc_term(ctx, r, e.left)
            tr, er = self.tc_term(ctx, r, e.right)
            return Prod(tl, tr), el | er

        if isinstance(e, ir.Proj):
            t, eff = self.tc_term(ctx, r, e.arg)
            if not isinstance(t, Prod):
                raise IRTypeError("T-Proj", f"projection from non-pair type {show_type(t)}")
            return (t.left if e.index == 1 else t.right), eff

        if isinstance(e, ir.If):
            tc, ec = self.tc_term(ctx, r, e.cond)
            self.expect(tc, S.BOOL, "T-If", "condition")
            t1, e1 = self.tc_term(ctx, r, e.then)
            t2, e2 = self.tc_term(ctx, r, e.else_)
            self.expect(t2, t1, "T-If", "else branch")
            return t1, ec | e1 | e2

        raise IRTypeError("T-?", f"not an IR term: {e!r}")

    def tc_opcont(self, ctx: TypingContext, e: ir.OpCont) -> tuple:
        sg = self.sig(e.op, "T-OpCont")
        if len(e.schemes) != len(sg.bound):
            raise IRTypeError("T-OpCont", f"#{e.op} expects {len(sg.bound)} schemes, got {len(e.schemes)}")
        betas = e.ctx.binders()
        if len(set(betas)) != len(betas) or ctx.tyvars.intersection(betas):
            e = ir.freshen_opcont(e)
            betas = e.ctx.binders()
        if e.pv.binders != betas and len(e.pv.binders) == len(betas):
            e = ir.OpCont(e.op, e.schemes, ir.rename_pv(e.pv, betas), e.ctx)
        if e.pv.binders != betas:
            raise IRTypeError("T-OpCont", "captured value and continuation bind different type variables")
        schemes = []
        for s in e.schemes:
            if len(s.bound) != len(betas):
                raise IRTypeError("T-OpCont", "scheme and continuation bind different type variables")
            s = S.rename_scheme(s, betas)
            self.wf(ctx, s, "T-OpCont")
            schemes.append(s)
        Cs = [s.body for s in schemes]
        dom, cod = sg.instantiate(Cs)
        inner = ctx.bind_tyvars(betas)
        tv, _ = self.tc_term(inner, None, e.pv.value)
        self.expect(tv, dom, "T-OpCont", f"captured argument of #{e.op}")
        res, eff = self.tc_ectx(ctx, e.ctx, cod)
        return res, eff | {e.op}

    # -- handlers

    def tc_handler(self, ctx, r, h: ir.Handler, A, eps_in: frozenset) -> tuple:
        ops = [c.op for c in h.clauses]
        if len(set(ops)) != len(ops):
            raise IRTypeError("TH-Op", "duplicate operation clause")
        B, eff_ret = self.tc_term(ctx.bind(h.ret_var, A), r, h.ret_body)
        out = (eps_in - set(ops)) | eff_ret
        prepared = []
        for c in h.clauses:
            sg = self.sig(c.op, "TH-Op")
            if len(c.binders) != len(sg.bound):
                raise IRTypeError("TH-Op", f"clause for {c.op} binds {len(c.binders)} type variables, expected {len(sg.bound)}")
            inner, bs, ren = self.enter(ctx, c.binders)
            body = ir.subst_ty_ir(c.body, ren) if ren else c.body
            dom, cod = sg.instantiate([TVar(b) for b in bs])
            if S.ftv(B).intersection(bs):
                raise IRTypeError("TH-Op", "handler result type mentions clause type variables")
            prepared.append((c, bs, dom, cod, inner.bind(c.var, dom), body))
        while True:
            new = out
            for c, bs, dom, cod, cctx, body in prepared:
                rc = IRResumptionCtx(bs, dom, cod, out, B)
                t, eff = self.tc_term(cctx, rc, body)
                self.expect(t, B, "TH-Op", f"body of the {c.op} clause")
                new = new | eff
            if new == out:
                return B, out
            out = new

    # -- evaluation contexts

    def tc_ectx(self, ctx: TypingContext, K: ir.EvalCtx, hole_ty) -> tuple:
        """Type of K[e] for e of type hole_ty under ctx extended with binders(K)."""
        return self._frames(ctx, K.frames, 0, hole_ty)

    def _frames(self, ctx, frames, i, hole_ty) -> tuple:
        if i == len(frames):
            self.wf(ctx, hole_ty, "TE-Hole")
            return hole_ty, EMPTY
        f = frames[i]
        if isinstance(f, ir.LetFrame):
            if ctx.tyvars.intersection(f.binders) or len(set(f.binders)) != len(f.binders):
                raise IRTypeError("TE-Let", f"continuation binders {f.binders} clash with the context")
            A, e1 = self._frames(ctx.bind_tyvars(f.binders), frames, i + 1, hole_ty)
            scheme = TypeScheme(f.binders, A)
            if f.annot is not None and not S.scheme_alpha_eq(f.annot, scheme):
                raise IRTypeError("TE-Let", f"annotation does not match hole type {show_type(A)}")
            t2, e2 = self.tc_term(ctx.bind(f.var, scheme), None, f.body)
            return t2, e1 | e2
        A, eff = self._frames(ctx, frames, i + 1, hole_ty)
        if isinstance(f, ir.AppL):
            ta, ea = self.tc_term(ctx, None, f.arg)
            if not isinstance(A, Arrow):
                raise IRTypeError("TE-AppL", f"hole has non-function type {show_type(A)}")
            self.expect(ta, A.dom, "TE-AppL", "argument type")
            return A.cod, eff | ea | A.eff
        if isinstance(f, ir.AppR):
            tf, ef = self.tc_term(ctx, None, f.fn)
            if not isinstance(tf, Arrow):
                raise IRTypeError("TE-AppR", f"applying a non-function of type {show_type(tf)}")
            self.expect(A, tf.dom, "TE-AppR", "hole type")
            return tf.cod, eff | ef | tf.eff
        if isinstance(f, ir.OpArg):
            sg = self.sig(f.op, "TE-Op")
            if len(f.targs) != len(sg.bound):
                raise IRTypeError("TE-Op", f"#{f.op} expects {len(sg.bound)} type arguments")
            dom, cod = sg.instantiate(f.targs)
            self.expect(A, dom, "TE-Op", f"argument of #{f.op}")
            return cod, eff | {f.op}
        if isinstance(f, ir.HandleFrame):
            return self.tc_handler(ctx, None, f.handler, A, eff)
        if isinstance(f, ir.PairL):
            tr, er = self.tc_term(ctx, None, f.right)
            return Prod(A, tr), eff | er
        if isinstance(f, ir.PairR):
            tl, el = self.tc_term(ctx, None, f.left)
            return Prod(tl, A), eff | el
        if isinstance(f, ir.ProjFrame):
            if not isinstance(A, Prod):
                raise IRTypeError("TE-Proj", f"projection from non-pair type {show_type(A)}")
            return (A.left if f.index == 1 else A.right), eff
        if isinstance(f, ir.IfFrame):
            self.expect(A, S.BOOL, "TE-If", "condition")
            t1, e1 = self.tc_term(ctx, None, f.then)
            t2, e2 = self.tc_term(ctx, None, f.else_)
            self.expect(t2, t1, "TE-If", "else branch")
            return t1, eff | e1 | e2
        raise IRTypeError("TE-?", f"not a frame: {f!r}")


def tc_term(ctx: TypingContext | None, r, e, sigs: dict) -> tuple:
    return IRChecker(sigs).tc_term(ctx or TypingContext(), r, e)


def tc_handler(ctx, r, h, A, eps_in, sigs: dict) -> tuple:
    return IRChecker(sigs).tc_handler(ctx or TypingContext(), r, h, A, frozenset(eps_in))


def tc_ectx(ctx, K, hole_ty, sigs: dict) -> tuple:
    return IRChecker(sigs).tc_ectx(ctx or TypingContext(), K, hole_ty)
