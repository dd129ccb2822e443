"""Property tests for the invariants of each module."""
import string

from hypothesis import HealthCheck, assume, example, given, settings
from hypothesis import strategies as st

from polyeff import evaluator as ev
from polyeff import ir
from polyeff import syntax as S
from polyeff.errors import ParseError
from polyeff.infer import check_program
from polyeff.irtyping import tc_term
from polyeff.parser import parse_program, parse_term, pretty, show_program
from polyeff.syntax import TypingContext, ctx_wf, ftv, subst_ty

from conftest import corpus_files

SETTINGS = settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])

# ---------------------------------------------------------------------------
# types

tyvar_names = st.sampled_from(["a", "b", "c", "d"])
effects = st.frozensets(st.sampled_from(["fail", "choose", "get"]), max_size=2)
types = st.recursive(
    st.one_of(st.builds(S.TVar, tyvar_names), st.sampled_from([S.BOOL, S.INT, S.UNIT, S.BOT])),
    lambda inner: st.one_of(st.builds(S.Arrow, inner, effects, inner), st.builds(S.Prod, inner, inner)),
    max_leaves=8,
)


@SETTINGS
@given(types, st.dictionaries(tyvar_names, types, max_size=3))
def test_subst_ty_homomorphic(t, m):
    pairs = list(m.items())
    if isinstance(t, S.Arrow):
        assert subst_ty(t, pairs) == S.Arrow(subst_ty(t.dom, pairs), t.eff, subst_ty(t.cod, pairs))
    elif isinstance(t, S.Prod):
        assert subst_ty(t, pairs) == S.Prod(subst_ty(t.left, pairs), subst_ty(t.right, pairs))
    elif isinstance(t, S.TVar):
        assert subst_ty(t, pairs) == m.get(t.name, t)
    else:
        assert subst_ty(t, pairs) == t


@SETTINGS
@given(types, st.dictionaries(st.sampled_from(["x", "y"]), types, max_size=2))
def test_subst_ty_identity_on_disjoint(t, m):
    assert subst_ty(t, list(m.items())) == t  # x, y never occur in generated types


@SETTINGS
@given(types)
def test_type_round_trip(t):
    from polyeff.parser import parse_type
    assert parse_type(pretty(t)) == t


entries = st.one_of(
    st.builds(S.TyVarBind, tyvar_names),
    st.builds(S.VarBind, st.sampled_from(["x", "y"]), st.builds(S.mono, types)),
)


@SETTINGS
@given(st.lists(entries, max_size=6), st.integers(0, 6))
def test_ctx_wf_prefix_closed(es, k):
    ctx = TypingContext(es)
    if ctx_wf(ctx):
        assert ctx_wf(TypingContext(es[:k]))


@SETTINGS
@given(st.lists(entries, max_size=6))
def test_ctx_wf_matches_definition(es):
    bound: list = []
    ok = True
    for e in es:
        if isinstance(e, S.TyVarBind):
            ok &= e.name not in bound
            bound.append(e.name)
        else:
            ok &= ftv(e.scheme) <= set(bound)
    assert ctx_wf(TypingContext(es)) == ok


# ---------------------------------------------------------------------------
# well-typed program generator

SIGS = (
    "effect choose : forall a. (a * a) => a\n"
    "effect fail : forall a. unit => a\n"
    "effect get_id : forall a. unit => (a -> a)\n"
    ";;\n"
)


@st.composite
def programs(draw, ty="int", depth=3, vars_=()):
    """Closed, pure surface programs of the given base type, as source text."""
    def sub(t, d=None, vs=None):
        return draw(programs(t, depth - 1 if d is None else d, vars_ if vs is None else vs))

    in_scope = [v for v, t in vars_ if t == ty]
    leaves = ["lit"] + (["var"] * 2 if in_scope else [])
    kinds = leaves if depth <= 0 else leaves + ["op", "if", "let", "pair", "choose", "choose_all", "fail", "get_id", "app"]
    kind = draw(st.sampled_from(kinds))
    if kind == "lit":
        return f"({draw(st.integers(-20, 20))})" if ty == "int" else draw(st.sampled_from(["true", "false"]))
    if kind == "var":
        return draw(st.sampled_from(in_scope))
    if kind == "op":
        if ty == "int":
            return f"({sub('int')} {draw(st.sampled_from(['+', '-', '*']))} {sub('int')})"
        return f"({sub('int')} = {sub('int')})"
    if kind == "if":
        return f"(if {sub('bool')} then {sub(ty)} else {sub(ty)})"
    if kind == "let":
        t = draw(st.sampled_from(["int", "bool"]))
        v = f"v{depth}{t[0]}"
        return f"(let {v} = {sub(t)} in {sub(ty, vs=vars_ + ((v, t),))})"
    if kind == "pair":
        proj = draw(st.sampled_from(["fst", "snd"]))
        other = draw(st.sampled_from(["int", "bool"]))
        parts = (sub(ty), sub(other)) if proj == "fst" else (sub(other), sub(ty))
        return f"({proj} ({parts[0]}, {parts[1]}))"
    if kind == "choose":
        pick = draw(st.sampled_from(["fst", "snd"]))
        return (f"(handle #choose(({sub(ty)}, {sub(ty)})) with "
                f"{{ return x -> x ; choose(p) -> resume ({pick} p) }})")
    if kind == "choose_all" and ty == "int":
        return (f"(handle {sub('int')} + #choose(({sub('int')}, {sub('int')})) with "
                "{ return x -> x ; choose(p) -> let l = resume (fst p) in let r = resume (snd p) in l + r })")
    if kind == "fail":
        return (f"(handle (if {sub('bool')} then #fail(()) else {sub(ty)}) with "
                f"{{ return x -> x ; fail(u) -> {sub(ty, vs=())} }})")
    if kind == "get_id":
        other = "bool" if ty == "int" else "int"
        return (f"(handle (let g = #get_id(()) in let w = g {sub(other)} in g {sub(ty)}) with "
                "{ return x -> x ; get_id(u) -> resume (fun z -> z) })")
    if kind == "app":
        v = f"f{depth}"
        return f"(let {v} = fun y{depth} -> {sub(ty, vs=vars_ + ((f'y{depth}', ty),))} in {v} {sub(ty)})"
    return sub(ty)


def _front(src):
    return check_program(parse_program(SIGS + src))


@SETTINGS
@given(st.sampled_from(["int", "bool"]).flatmap(lambda t: st.tuples(st.just(t), programs(t))))
def test_generated_programs_sound(case):
    ty, src = case
    r = _front(src)
    assert pretty(r.type) == ty and r.effect == frozenset()
    # elaboration preserves the type
    assert tc_term(None, None, r.ir, r.sigs) == (r.type, frozenset())
    # every step preserves the type, never grows the effect, never gets stuck
    out, trace = ev.run(r.ir, fuel=20000, check_steps=True, sigs=r.sigs)
    assert isinstance(out, ev.Value)
    assert all(trace.erasure_checks)


@SETTINGS
@given(programs("int"))
def test_surface_round_trip(src):
    p = parse_program(SIGS + src)
    q = parse_program(show_program(p))
    assert S.alpha_eq(p.main, q.main)


@SETTINGS
@given(programs("int"))
def test_inference_deterministic(src):
    assert ir.alpha_eq(_front(src).ir, _front(src).ir)


@SETTINGS
@given(programs("int"), st.integers(1, 60), st.integers(0, 200))
def test_fuel_monotone(src, fuel, extra):
    r = _front(src)
    out1, _ = ev.run(r.ir, fuel=fuel)
    assume(not isinstance(out1, ev.FuelExhausted))
    out2, _ = ev.run(r.ir, fuel=fuel + extra)
    assert out1 == out2


@SETTINGS
@given(programs("int"), st.integers(0, 40))
def test_decompose_plug_and_determinism(src, n):
    e = _front(src).ir
    for _ in range(n):
        s = ev.step(e)
        if s is None:
            break
        e = s[0]
    d = ev.decompose(e)
    if d is not None:
        K, redex = d
        assert K.plug(redex) == e
    # R-Handle draws fresh names, so two steps agree up to alpha
    s1, s2 = ev.step(e), ev.step(e)
    assert (s1 is None) == (s2 is None)
    if s1 is not None:
        assert s1[1] == s2[1] and ir.alpha_eq(s1[0], s2[0])


@SETTINGS
@given(st.sampled_from([p for p in corpus_files("eval")]), st.integers(0, 60))
def test_decompose_plug_on_corpus(path, n):
    r = check_program(parse_program(path.read_text()))
    e = r.ir
    for _ in range(n):
        s = ev.step(e)
        if s is None:
            break
        e = s[0]
        K, redex = ev.decompose(e) or (None, None)
        if K is not None:
            assert K.plug(redex) == e


@SETTINGS
@given(st.text(alphabet=string.printable + "λβ→", max_size=40))
@example("(")
@example("")
def test_diagnostic_spans_within_input(text):
    try:
        parse_program(text)
    except ParseError as exc:
        for d in exc.diagnostics:
            # an empty input admits only the empty span
            assert 0 <= d.span.start <= d.span.end <= len(text)
            assert d.span.start < d.span.end or not text
            assert d.line >= 1 and d.col >= 1


# ---------------------------------------------------------------------------
# arbitrary (mostly ill-typed) surface terms: whatever the checker accepts must be sound

_OPS = ["choose", "fail", "get_id", "ask", "put"]
_ARB_SIGS = parse_program(
    "effect choose : forall a. (a * a) => a\neffect fail : forall a. unit => a\n"
    "effect get_id : forall a. unit => (a -> a)\neffect ask : unit => int\n"
    "effect put : forall a. a => unit\n;; 1"
).sigs
_names = st.sampled_from(["x", "y", "z"])
_leaves = st.one_of(
    st.builds(S.Var, _names),
    st.builds(lambda n: S.Const(S.IntC(n)), st.integers(0, 3)),
    st.builds(lambda b: S.Const(S.BoolC(b)), st.booleans()),
    st.just(S.Const(S.UnitC())),
    st.just(S.Const(S.PrimC("+"))),
)


def _extend(t):
    clause = st.builds(S.OpClause, st.sampled_from(_OPS), _names, t)
    handler = st.builds(lambda v, b, cs: S.Handler(v, b, tuple({c.op: c for c in cs}.values())),
                        _names, t, st.lists(clause, max_size=2))
    return st.one_of(
        st.builds(S.Abs, _names, t), st.builds(S.App, t, t), st.builds(S.Let, _names, t, t),
        st.builds(S.OpCall, st.sampled_from(_OPS), t), st.builds(S.Handle, t, handler),
        st.builds(S.Resume, t), st.builds(S.Pair, t, t),
        st.builds(S.Proj, st.sampled_from([1, 2]), t), st.builds(S.If, t, t, t),
    )


@settings(max_examples=600, deadline=None, suppress_health_check=list(HealthCheck))
@given(st.recursive(_leaves, _extend, max_leaves=14))
def test_arbitrary_terms_accepted_only_if_sound(M):
    from polyeff.errors import TypeCheckError

    try:
        r = check_program(S.Program(_ARB_SIGS, M))
    except TypeCheckError:
        return
    assert tc_term(None, None, r.ir, r.sigs) == (r.type, r.effect)
    out, _ = ev.run(r.ir, fuel=3000, check_steps=True, sigs=r.sigs)
    assert isinstance(out, (ev.Value, ev.UnhandledOp, ev.FuelExhausted))
