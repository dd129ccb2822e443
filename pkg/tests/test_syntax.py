import pytest

from polyeff import syntax as S
from polyeff.syntax import (BOOL, INT, UNIT, Arrow, BoolC, ConstTable, EffectSignature, IntC, PrimC, Prod, TVar,
                            TypeScheme, TypingContext, ctx_wf, dom, ftv, subst_ty)

a, b, g = TVar("a"), TVar("b"), TVar("g")
E = frozenset()


class TestFtv:
    def test_binder_excluded(self):
        assert ftv(TypeScheme(("a",), Arrow(a, E, b))) == {"b"}

    def test_base(self):
        assert ftv(BOOL) == set()

    def test_arrow_with_effect_and_product(self):
        assert ftv(Arrow(a, frozenset({"op"}), Prod(a, g))) == {"a", "g"}


class TestSubst:
    def test_arrow(self):
        assert subst_ty(Arrow(a, E, a), [("a", BOOL)]) == Arrow(BOOL, E, BOOL)

    def test_unaffected(self):
        assert subst_ty(a, [("b", INT)]) == a

    def test_simultaneous(self):
        assert subst_ty(Prod(a, b), [("a", INT), ("b", BOOL)]) == Prod(INT, BOOL)

    def test_no_chaining(self):
        # simultaneous: a := b, b := int must not produce int for a
        assert subst_ty(Prod(a, b), [("a", b), ("b", INT)]) == Prod(b, INT)


class TestContexts:
    def test_empty(self):
        assert ctx_wf(TypingContext())

    def test_tyvar_then_var(self):
        assert ctx_wf(TypingContext().bind_tyvars(["a"]).bind("x", Arrow(a, E, a)))

    def test_unbound_tyvar(self):
        assert not ctx_wf(TypingContext().bind("x", Arrow(b, E, b)))

    def test_duplicate_tyvar(self):
        assert not ctx_wf(TypingContext().bind_tyvars(["a", "a"]))

    def test_scheme_binders_are_not_free(self):
        assert ctx_wf(TypingContext().bind("id", TypeScheme(("a",), Arrow(a, E, a))))

    def test_dom(self):
        assert dom(TypingContext()) == set()
        assert dom(TypingContext().bind_tyvars(["a"]).bind("x", a)) == {"a", "x"}
        assert dom(TypingContext().bind("x", INT).bind("y", BOOL)) == {"x", "y"}

    def test_shadowing(self):
        ctx = TypingContext().bind("x", INT).bind("x", BOOL)
        assert ctx.lookup("x").body == BOOL


class TestSchemes:
    def test_duplicate_binders_rejected(self):
        with pytest.raises(ValueError):
            TypeScheme(("a", "a"), a)

    def test_alpha_eq(self):
        assert S.scheme_alpha_eq(TypeScheme(("a",), Arrow(a, E, a)), TypeScheme(("b",), Arrow(b, E, b)))
        assert not S.scheme_alpha_eq(TypeScheme(("a",), Arrow(a, E, a)), TypeScheme(("b",), Arrow(b, E, a)))


class TestSignatures:
    def test_unbound_variable_rejected(self):
        with pytest.raises(ValueError):
            EffectSignature("bad", (), a, INT)

    def test_instantiate(self):
        sig = EffectSignature("choose", ("a",), Prod(a, a), a)
        assert sig.instantiate([INT]) == (Prod(INT, INT), INT)


class TestConstants:
    @pytest.mark.parametrize("op", S.PRIMS)
    def test_prim_types_are_first_order_and_pure(self, op):
        t = ConstTable.typing(PrimC(op))
        while isinstance(t, Arrow):
            assert t.eff == E and isinstance(t.dom, S.Base)
            t = t.cod
        assert isinstance(t, S.Base)

    def test_no_constant_has_type_bot(self):
        for c in [BoolC(True), IntC(0), S.UnitC()] + [PrimC(op) for op in S.PRIMS]:
            assert ConstTable.typing(c) != S.BOT

    def test_delta_partial_application(self):
        plus1 = ConstTable.delta(PrimC("+"), IntC(1))
        assert plus1 == PrimC("+", (1,))
        assert ConstTable.delta(plus1, IntC(2)) == IntC(3)

    def test_delta_respects_typing(self):
        # if delta(c1, c2) is defined then c1 : i -> A, c2 : i and the result has type A
        for op in S.PRIMS:
            for x, y in [(7, 2), (-7, 2), (0, 5)]:
                c1 = ConstTable.delta(PrimC(op), IntC(x))
                t1 = ConstTable.typing(c1)
                r = ConstTable.delta(c1, IntC(y))
                assert t1.dom == ConstTable.typing(IntC(y))
                assert ConstTable.typing(r) == t1.cod

    def test_div_by_zero_undefined(self):
        assert ConstTable.delta(PrimC("div", (100,)), IntC(0)) is None

    def test_div_truncates(self):
        assert ConstTable.delta(PrimC("div", (-7,)), IntC(2)) == IntC(int(-7 / 2))

    def test_ill_typed_delta(self):
        assert ConstTable.delta(PrimC("+", (1,)), BoolC(True)) is None
        assert ConstTable.delta(IntC(1), IntC(2)) is None

    def test_unit_type(self):
        assert ConstTable.typing(S.UnitC()) == UNIT


def test_fresh_names_distinct_and_strip():
    x1, x2 = S.fresh("x"), S.fresh("x")
    assert x1 != x2
    assert S.base_name(x1) == "x" == S.base_name(x2)


def test_handler_rejects_duplicate_clauses():
    c = S.OpClause("fail", "u", S.Const(IntC(0)))
    with pytest.raises(ValueError):
        S.Handler("x", S.Var("x"), (c, c))
