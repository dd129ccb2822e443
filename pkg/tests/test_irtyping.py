import pytest

from polyeff import ir
from polyeff import syntax as S
from polyeff.errors import IRTypeError
from polyeff.infer import check_program
from polyeff.irtyping import IRResumptionCtx, tc_ectx, tc_handler, tc_term
from polyeff.parser import parse_program
from polyeff.syntax import BOOL, INT, UNIT, Arrow, EffectSignature, Prod, TVar, TypeScheme, TypingContext

E = frozenset()
a = TVar("a")
SIGS = {
    "fail": EffectSignature("fail", ("a",), UNIT, a),
    "choose": EffectSignature("choose", ("a",), Prod(a, a), a),
}


def num(n):
    return ir.Const(S.IntC(n))


def plus(l, r):
    return ir.App(ir.App(ir.Const(S.PrimC("+")), l), r)


IDH = ir.Handler("x", ir.VarApp("x"))
CHOOSE_CLAUSE = ir.OpClause(("a",), "choose", "p", ir.Resume(("b",), "y", ir.Proj(1, ir.VarApp("y"))))


class TestTerms:
    def test_const(self):
        assert tc_term(None, None, num(1), {}) == (INT, E)

    def test_choose_elaboration(self):
        src = open("corpus/eval/choose.pef").read()
        r = check_program(parse_program(src))
        assert tc_term(None, None, r.ir, r.sigs) == (INT, E)

    def test_unhandled_op(self):
        assert tc_term(None, None, ir.OpCall("fail", (INT,), ir.Const(S.UnitC())), SIGS) == (INT, {"fail"})

    def test_effect_is_minimal(self):
        f = ir.Abs("u", Arrow(UNIT, frozenset({"fail"}), INT), ir.OpCall("fail", (INT,), ir.VarApp("u")))
        # an abstraction is a value: its latent effect does not leak
        assert tc_term(None, None, f, SIGS) == (Arrow(UNIT, frozenset({"fail"}), INT), E)

    def test_var_arity(self):
        ctx = TypingContext().bind("id", TypeScheme(("a",), Arrow(a, E, a)))
        assert tc_term(ctx, None, ir.VarApp("id", (INT,)), {}) == (Arrow(INT, E, INT), E)
        with pytest.raises(IRTypeError, match="T-Var"):
            tc_term(ctx, None, ir.VarApp("id"), {})

    def test_unbound_tyvar_in_annotation(self):
        with pytest.raises(IRTypeError):
            tc_term(None, None, ir.Abs("x", Arrow(a, E, a), ir.VarApp("x")), {})

    def test_resume_outside_clause(self):
        with pytest.raises(IRTypeError, match="T-Resume"):
            tc_term(None, None, ir.Resume((), "y", num(1)), {})

    def test_resume_wrong_arity(self):
        r = IRResumptionCtx(("a",), Prod(a, a), a, E, INT)
        ctx = TypingContext().bind_tyvars(["a"])
        with pytest.raises(IRTypeError, match="T-Resume"):
            tc_term(ctx, r, ir.Resume((), "y", num(1)), SIGS)

    def test_resume_argument_at_renamed_type(self):
        r = IRResumptionCtx(("a",), Prod(a, a), a, E, INT)
        ctx = TypingContext().bind_tyvars(["a"])
        ok = ir.Resume(("b",), "y", ir.Proj(1, ir.VarApp("y")))
        assert tc_term(ctx, r, ok, SIGS) == (INT, E)
        with pytest.raises(IRTypeError, match="T-Resume"):
            tc_term(ctx, r, ir.Resume(("b",), "y", num(1)), SIGS)


class TestHandlers:
    def test_identity_at_int(self):
        assert tc_handler(None, None, IDH, INT, {"fail"}, SIGS) == (INT, {"fail"})

    def test_choose_clause(self):
        h = ir.Handler("x", ir.VarApp("x"), (CHOOSE_CLAUSE,))
        assert tc_handler(None, None, h, INT, {"choose"}, SIGS) == (INT, E)

    def test_duplicate_clause(self):
        h = object.__new__(ir.Handler)
        object.__setattr__(h, "ret_var", "x")
        object.__setattr__(h, "ret_body", ir.VarApp("x"))
        object.__setattr__(h, "clauses", (CHOOSE_CLAUSE, CHOOSE_CLAUSE))
        with pytest.raises(IRTypeError, match="TH-Op"):
            tc_handler(None, None, h, INT, E, SIGS)

    def test_result_type_may_not_mention_clause_variables(self):
        bad = ir.OpClause(("a",), "choose", "p", ir.Proj(1, ir.VarApp("p")))
        h = ir.Handler("x", ir.VarApp("x"), (bad,))
        with pytest.raises(IRTypeError, match="TH-Op"):
            tc_handler(None, None, h, INT, E, SIGS)


class TestContexts:
    def test_hole(self):
        assert tc_ectx(None, ir.HOLE, INT, {}) == (INT, E)

    def test_let_frame_quantifies_hole(self):
        K = ir.EvalCtx((ir.LetFrame("x", ("a",), None, plus(ir.VarApp("x", (INT,)), num(1))),))
        assert tc_ectx(None, K, a, {}) == (INT, E)

    def test_let_frame_hole_outside_scope(self):
        K = ir.EvalCtx((ir.LetFrame("x", ("a",), None, plus(ir.VarApp("x", (INT,)), num(1))),))
        with pytest.raises(IRTypeError):
            tc_ectx(None, K, TVar("zz"), {})

    def test_handle_frame(self):
        K = ir.EvalCtx((ir.HandleFrame(IDH),))
        assert tc_ectx(None, K, INT, {}) == (INT, E)

    def test_op_frame(self):
        K = ir.EvalCtx((ir.OpArg("fail", (BOOL,)),))
        assert tc_ectx(None, K, UNIT, SIGS) == (BOOL, {"fail"})


def test_opcont():
    # #choose{∀.int; Λ[]. (1, 2); [(+ 10) []]} : int ! {choose}
    K = ir.EvalCtx((ir.AppR(ir.Const(S.PrimC("+", (10,)))),))
    oc = ir.OpCont("choose", (TypeScheme((), INT),), ir.PolyValue((), ir.Pair(num(1), num(2))), K)
    assert tc_term(None, None, oc, SIGS) == (INT, {"choose"})
    bad = ir.OpCont("choose", (TypeScheme((), BOOL),), oc.pv, K)
    with pytest.raises(IRTypeError, match="T-OpCont"):
        tc_term(None, None, bad, SIGS)
