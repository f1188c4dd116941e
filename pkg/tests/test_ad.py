import math

import pytest
from hypothesis import given, settings, strategies as st

from dppl import ad
from dppl.ad import DualReal, NonDifferentiable
from dppl.eval import Generated
from dppl.infer import run_with_seed
from dppl.parser import parse
from dppl.runtime import Runtime
from dppl.case_studies import num
from oracles import (
    ABS_DERIV_AT_0, ABS_DERIV_AT_MINUS_2, ABS_FN, FD_REL_TOL, FD_STEP, NESTED_DIFF,
    NESTED_DIFF_TOL, NESTED_DIFF_VALUE, SINCOS_DERIV_AT_03, SINCOS_FN, SQUARE_PLUS,
    SQUARE_PLUS_DERIV_AT_3,
)


def run(src, engine="machine"):
    return run_with_seed(parse(src), Generated(0), Runtime(engine=engine)).value


def real(src, engine="machine"):
    return run(src, engine).r


def deriv(fn, x, d="A", engine="machine"):
    return real(f"diff1{d} ({fn}) {num(x)}", engine)


def fd(fn, x):
    f = lambda z: real(f"({fn}) {num(z)}")
    return (f(x + FD_STEP) - f(x - FD_STEP)) / (2 * FD_STEP)


# -- dual arithmetic ---------------------------------------------------------------

def test_product_rule_with_a_constant():
    t = ad.fresh_tag()
    assert ad.mul(DualReal(t, 2.0, 1.0), 3.0) == DualReal(t, 6.0, 3.0)


def test_sin_at_zero():
    t = ad.fresh_tag()
    assert ad.sin(DualReal(t, 0.0, 1.0)) == DualReal(t, 0.0, 1.0)


def test_plain_floats_stay_plain():
    assert ad.add(1.0, 2.0) == 3.0 and type(ad.mul(2.0, 3.0)) is float


def test_distinct_tags_do_not_mix():
    a, b = ad.fresh_tag(), ad.fresh_tag()
    x = DualReal(a, 2.0, 1.0)
    y = DualReal(b, 3.0, 1.0)
    xy = ad.mul(x, y)
    assert ad.tangent_of(xy, b) == DualReal(a, 2.0, 1.0)
    assert ad.tangent_of(ad.tangent_of(xy, b), a) == 1.0
    assert xy.primal == DualReal(a, 6.0, 3.0)


def test_jvp_allocates_fresh_tags():
    seen = []

    def apply(f, x):
        seen.append(x.tag)
        return f(x)

    sq = lambda x: ad.mul(x, x)
    assert ad.jvp(apply, sq, 3.0, 1.0) == 6.0
    assert ad.jvp(apply, sq, 3.0, 1.0) == 6.0
    assert seen[0] != seen[1]


def test_require_plain():
    with pytest.raises(NonDifferentiable):
        ad.require_plain(DualReal(ad.fresh_tag(), 1.0, 1.0), "wiener")


# -- derivatives of programs ------------------------------------------------------

@pytest.mark.parametrize("engine", ["machine", "smallstep"])
def test_known_derivatives(engine):
    assert deriv(SQUARE_PLUS, 3.0, engine=engine) == SQUARE_PLUS_DERIV_AT_3
    assert deriv(ABS_FN, -2.0, "P", engine) == ABS_DERIV_AT_MINUS_2
    assert deriv(ABS_FN, 0.0, "P", engine) == ABS_DERIV_AT_0
    assert deriv(ABS_FN, 2.0, "P", engine) == 1.0
    assert deriv(SINCOS_FN, 0.3, engine=engine) == pytest.approx(SINCOS_DERIV_AT_03, abs=1e-12)


@pytest.mark.parametrize("engine", ["machine", "smallstep"])
def test_nested_derivatives_keep_perturbations_apart(engine):
    assert abs(real(NESTED_DIFF, engine) - NESTED_DIFF_VALUE) <= NESTED_DIFF_TOL


def test_second_derivative():
    src = "diff1A (lam x: RealA. diff1A (lam y: RealA. y * y * y) x) 2.0"
    assert real(src) == pytest.approx(12.0)


def test_derivatives_agree_with_finite_differences():
    for fn, x in [(SQUARE_PLUS, 3.0), (SINCOS_FN, 0.3),
                  ("lam x: RealA. sin(x * x) / (1.0 + cos(x))", 0.7),
                  ("lam x: RealA. pdfGaussian(x, 1.5, 0.4)", -0.2),
                  ("lam x: RealP. pdfBeta(2.0, 3.0, x)", 0.35)]:
        d = "P" if "RealP" in fn else "A"
        got, ref = deriv(fn, x, d), fd(fn, x)
        assert abs(got - ref) <= FD_REL_TOL * max(1.0, abs(ref))


def test_gradient_and_jacobian_shapes():
    assert real("(diffA (lam (a, b): (RealA, RealA). a * b) (2.0, 3.0)) (1.0, 0.0)") == 3.0
    assert real("(diffA (lam (a, b): (RealA, RealA). a * b) (2.0, 3.0)) (0.0, 1.0)") == 2.0
    v = run("(diffA (lam a: RealA. (a * a, sin(a))) 2.0) 1.0")
    assert v.elems[0].r == 4.0 and v.elems[1].r == pytest.approx(math.cos(2.0))


def test_beta_density_derivative():
    assert real("(diffP (lam a: RealP. pdfBeta(2.0, 2.0, a)) 0.3) 1.0") == pytest.approx(2.4)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-2, 2))
def test_derivative_is_linear_in_the_tangent(a, b, x):
    f = "diffA (lam (p, q): (RealA, RealA). sin(p) * q + p * p)"
    pt = f"({num(x)}, {num(1.5)})"
    lhs = real(f"({f} {pt}) ({num(a)}, {num(b)})")
    ea = real(f"({f} {pt}) (1.0, 0.0)")
    eb = real(f"({f} {pt}) (0.0, 1.0)")
    assert lhs == pytest.approx(a * ea + b * eb, rel=1e-12, abs=1e-12)


def test_local_closures_inside_the_differentiated_function():
    assert real("(diffA (lam x: RealA. (lam y: RealA. x * y) 3.0) 2.0) 1.0") == 3.0
    assert real("(diffA (lam x: RealA. let g = lam y: RealA. y * x in g x) 2.0) 1.0") == 4.0


def test_sampled_wiener_path_cannot_carry_a_tangent():
    # the program type-checks (closures do not constrain promotion) yet the
    # tangent reaches the Wiener sample at run time
    src = "diff1A (lam y: RealA. let g = lam u: RealN. y in wiener(0.5, g 1.0)) 0.3"
    from dppl.typer import check_program

    check_program(parse(src))
    with pytest.raises(NonDifferentiable):
        run(src)
