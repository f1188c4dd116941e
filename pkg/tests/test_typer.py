import pytest

from dppl.ast import (
    Arrow, Coeffect, Effect, Real, TupleT, DistT, UNIT, promote_type, skeleton,
)
from dppl.parser import parse, parse_type
from dppl.typer import TypeCheckError, check_program, infer_type, join, meet, subtype
from termgen import generate

A, P, N = (Real(c) for c in (Coeffect.A, Coeffect.P, Coeffect.N))
DET, RND = Effect.DET, Effect.RND


def ty(s):
    return parse_type(s)


def judge(src, env=None):
    j = infer_type(env or {}, parse(src))
    return str(j.type), j.effect


# -- subtyping ------------------------------------------------------------------

def test_subtype_examples():
    assert subtype(N, A)
    assert not subtype(A, N)
    assert not subtype(Arrow(N, DET, N), Arrow(A, DET, N))


def test_subtype_arrows_and_effects():
    assert subtype(Arrow(A, DET, N), Arrow(N, RND, A))
    assert not subtype(Arrow(A, RND, A), Arrow(A, DET, A))
    assert subtype(TupleT((N, P)), TupleT((P, A)))
    assert not subtype(TupleT((N,)), TupleT((N, N)))
    assert subtype(DistT(N), DistT(A))


TYPES = [A, P, N, UNIT, TupleT((A, N)), TupleT((P, P)), Arrow(A, DET, A), Arrow(N, DET, N),
         Arrow(P, RND, A), Arrow(A, DET, N), DistT(N), DistT(P)]


@pytest.mark.parametrize("t1", TYPES, ids=str)
def test_subtype_is_reflexive_and_transitive(t1):
    assert subtype(t1, t1)
    for t2 in TYPES:
        for t3 in TYPES:
            if subtype(t1, t2) and subtype(t2, t3):
                assert subtype(t1, t3)


def test_join_and_meet_examples():
    assert join(A, N) == A
    assert meet(A, N) == N
    for t in TYPES:
        assert join(t, t) == t and meet(t, t) == t
    with pytest.raises(TypeCheckError):
        join(A, UNIT)
    with pytest.raises(TypeCheckError):
        meet(Arrow(A, DET, A), TupleT((A, A)))


def test_join_is_an_upper_bound_and_meet_a_lower_bound():
    for t1 in TYPES:
        for t2 in TYPES:
            try:
                j = join(t1, t2)
            except TypeCheckError:
                continue
            assert subtype(t1, j) and subtype(t2, j)
            m = meet(t1, t2)
            assert subtype(m, t1) and subtype(m, t2)


def test_arrow_join_is_contravariant_in_the_argument():
    assert join(Arrow(A, DET, N), Arrow(N, RND, P)) == Arrow(N, RND, P)


# -- judgments ------------------------------------------------------------------

def test_quadratic_is_analytic():
    assert judge("lam x: RealA. x*x + x") == ("RealA ->det RealA", DET)
    assert judge("let y = lam x: RealA. x * x + x in diffA y 3.0")[0] == "RealA ->det RealA"


def test_analytic_comparand_is_rejected():
    with pytest.raises(TypeCheckError) as info:
        infer_type({}, parse("lam x: RealA. if x then x else 0 - x"))
    assert info.value.rule == "T-If"
    assert "expected RealP, found RealA" in str(info.value)


def test_piecewise_abs_is_accepted():
    assert judge("lam x: RealP. if x then x else 0 - x") == ("RealP ->det RealP", DET)


def test_wiener_sample_in_analytic_context():
    src = "lam x: RealN. lam y: RealA. wiener(0.5, x + 1.0) + y"
    assert judge(src) == ("RealN ->det RealA ->det RealA", DET)


def test_assume_is_random():
    assert judge("assume Gaussian(0.0, 1.0)") == ("RealN", RND)
    assert judge("assume Wiener()") == ("RealN ->det RealN", RND)
    assert judge("weight 1.0") == ("()", RND)


def test_diff_of_random_function_is_rejected():
    with pytest.raises(TypeCheckError):
        infer_type({}, parse("diffA (lam x: RealA. assume Gaussian(x, 1.0)) 0.0"))
    with pytest.raises(TypeCheckError) as info:
        infer_type({}, parse("diffA (lam x: RealA. let u = weight 1.0 in x) 0.0"))
    assert info.value.rule == "T-Diff"


def test_infer_hides_randomness():
    assert judge("infer (lam u: (). assume Gaussian(0.0, 1.0))") == ("Dist RealN", DET)


def test_infer_demands_a_unit_thunk():
    with pytest.raises(TypeCheckError) as info:
        infer_type({}, parse("infer (lam u: RealN. assume Gaussian(0.0, 1.0))"))
    assert info.value.rule == "T-Infer"


def test_literals_are_nondifferentiable_constants():
    assert judge("sin(1.0)") == ("RealN", DET)
    assert judge("(1.0, lam x: RealA. x)") == ("(RealN, RealA ->det RealA)", DET)


def test_piecewise_derivative_of_beta_density():
    assert judge("diffP (lam x: RealP. pdfBeta(2.0, 2.0, x)) 0.5")[0] == "RealA ->det RealP"


def test_solve_modifiers():
    rhs = "(lam (x, y): (RealN, RealA). x - y)"
    assert judge(f"solve {rhs} 0.0 1.0") == ("RealN", DET)
    assert judge(f"lam z: RealA. solve {rhs} z 1.0")[0] == "RealA ->det RealA"
    with pytest.raises(TypeCheckError) as info:
        infer_type({}, parse(f"lam z: RealA. solve {rhs} 0.0 z"))
    assert info.value.rule == "T-Solve"
    ok = "lam z: RealP. solve (lam (x, y): (RealP, RealA). x - y) 0.0 z"
    assert judge(ok)[0] == "RealP ->det RealP"


def test_solve_of_random_rhs_is_rejected():
    with pytest.raises(TypeCheckError) as info:
        infer_type({}, parse("solve (lam (x, y): (RealN, RealA). assume Gaussian(0.0, 1.0)) 0.0 1.0"))
    assert info.value.rule == "T-Solve"


def test_promotion_follows_free_variables():
    env = {"a": A, "n": N}
    assert str(infer_type(env, parse("n * 2.0")).type) == "RealN"
    assert str(infer_type(env, parse("a * n")).type) == "RealA"
    assert str(infer_type(env, parse("(n, 1.0)")).type) == "(RealN, RealN)"


def test_unbound_variable():
    with pytest.raises(TypeCheckError) as info:
        infer_type({}, parse("x + 1.0"))
    assert info.value.rule == "T-Var"


def test_check_program_top_level_effect():
    with pytest.raises(TypeCheckError) as info:
        check_program(parse("weight 1.0"))
    assert info.value.rule == "T-Top"
    assert str(check_program(parse("weight 1.0"), allow_random=True)) == "()"
    eq2 = parse("let y = lam x: RealA. x * x + x in diffA y 2.0")
    assert str(check_program(eq2)) == "RealA ->det RealA"
    assert str(check_program(parse("infer (lam u: (). assume Gaussian(0.0, 1.0))"))) == \
        "Dist RealN"


def test_error_positions_come_from_the_source():
    from dppl.parser import parse_with_positions

    t, pos = parse_with_positions("let f = lam x: RealA. x in\n  f (2.0, 3.0)")
    with pytest.raises(TypeCheckError) as info:
        check_program(t, positions=pos)
    assert info.value.position is not None and info.value.position[0] == 2
    t, pos = parse_with_positions("\n weight 1.0")
    with pytest.raises(TypeCheckError) as info:
        check_program(t, positions=pos)
    assert info.value.rule == "T-Top" and info.value.position == (2, 2)


# -- properties over generated terms ------------------------------------------------

TERMS = generate(150, seed=11, max_depth=5)


def _rename(t):
    """Rename every binder to a fresh name."""
    from dppl.ast import Abs, children, fresh_name, free_vars, rebuild, subst, Var

    if isinstance(t, Abs):
        body = _rename(t.body)
        new = fresh_name(t.param + "_r", free_vars(body) | {t.param})
        return Abs(new, t.annot, subst(body, t.param, Var(new)))
    kids = children(t)
    return rebuild(t, [_rename(k) for k in kids]) if kids else t


def test_typing_is_invariant_under_alpha_renaming():
    for t, ty_, eff in TERMS:
        r = _rename(t)
        assert skeleton(r) == skeleton(t)
        j = infer_type({}, r)
        assert (j.type, j.effect) == (ty_, eff)


def test_closed_terms_are_maximally_promoted():
    for _, ty_, _ in TERMS:
        assert promote_type(Coeffect.N, ty_) == ty_


def test_type_strings_reparse():
    for _, ty_, _ in TERMS:
        assert parse_type(str(ty_)) == ty_
