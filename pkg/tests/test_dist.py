import math
import random
import statistics

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from dppl.dist import (
    InvalidDistribution, WienerPath, derive, pdf_beta, pdf_gaussian, quantile,
    realization_key, uniform, wiener_path,
)
from oracles import (
    BETA22_PDF_HALF, QUANTILE_INVERSION_TOL, STD_NORMAL_PDF_0, STD_NORMAL_Q975,
    STD_NORMAL_Q975_TOL, WIENER_CORR_TOL, WIENER_DELTA, WIENER_KEYS, WIENER_VAR_REL_TOL,
)

mpmath.mp.dps = 40
probs = st.floats(1e-6, 1 - 1e-6)


def gauss_cdf(mu, sigma, x):
    return float(mpmath.ncdf(x, mu, sigma))


def beta_cdf(a, b, x):
    return float(mpmath.betainc(a, b, 0, x, regularized=True))


def test_quantile_examples():
    assert quantile("Gaussian", (0.0, 1.0), 0.5) == 0.0
    assert abs(quantile("Gaussian", (0.0, 1.0), 0.975) - STD_NORMAL_Q975) <= STD_NORMAL_Q975_TOL
    assert quantile("Beta", (2.0, 2.0), 0.5) == pytest.approx(0.5, abs=1e-14)


def test_quantile_endpoints():
    assert quantile("Beta", (2.0, 3.0), 0.0) == 0.0
    assert quantile("Beta", (2.0, 3.0), 1.0) == 1.0
    assert quantile("Gaussian", (0.0, 1.0), 0.0) < -1e300
    assert quantile("Gaussian", (0.0, 1.0), 1.0) > 1e300


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5), st.floats(0.05, 10), probs)
def test_gaussian_quantile_inverts_the_cdf(mu, sigma, p):
    assert abs(gauss_cdf(mu, sigma, quantile("Gaussian", (mu, sigma), p)) - p) <= \
        QUANTILE_INVERSION_TOL


@settings(max_examples=200, deadline=None)
@given(st.floats(0.2, 20), st.floats(0.2, 20), probs)
def test_beta_quantile_inverts_the_cdf(a, b, p):
    assert abs(beta_cdf(a, b, quantile("Beta", (a, b), p)) - p) <= QUANTILE_INVERSION_TOL


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([("Gaussian", (0.3, 2.0)), ("Beta", (0.7, 3.0))]), probs, probs)
def test_quantile_is_monotone(dist, p, q):
    name, params = dist
    lo, hi = sorted((p, q))
    assert quantile(name, params, lo) <= quantile(name, params, hi)


@pytest.mark.parametrize("name, params", [
    ("Gaussian", (0.0, 0.0)), ("Gaussian", (0.0, -1.0)), ("Gaussian", (math.nan, 1.0)),
    ("Beta", (0.0, 1.0)), ("Beta", (2.0, -1.0)), ("Beta", (math.inf, 1.0)),
])
def test_invalid_parameters(name, params):
    with pytest.raises(InvalidDistribution, match="invalid distribution parameters"):
        quantile(name, params, 0.5)


def test_density_examples():
    assert pdf_gaussian(0.0, 1.0, 0.0) == pytest.approx(STD_NORMAL_PDF_0, abs=1e-15)
    assert pdf_beta(2.0, 2.0, 0.5) == pytest.approx(BETA22_PDF_HALF, rel=1e-14)
    assert pdf_beta(2.0, 2.0, -0.1) == 0.0
    assert pdf_beta(2.0, 2.0, 1.0) == 0.0
    assert pdf_gaussian(0.0, 0.0, 0.0) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 4), st.floats(-6, 6))
def test_gaussian_density_matches_mpmath(mu, sigma, x):
    assert pdf_gaussian(mu, sigma, x) == pytest.approx(float(mpmath.npdf(x, mu, sigma)),
                                                       rel=1e-12, abs=1e-300)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.3, 8), st.floats(0.3, 8), st.floats(0.01, 0.99))
def test_beta_density_matches_mpmath(a, b, x):
    ref = x ** (a - 1) * (1 - x) ** (b - 1) / float(mpmath.beta(a, b))
    assert pdf_beta(a, b, x) == pytest.approx(ref, rel=1e-11)


# -- pseudo-random function ----------------------------------------------------------

def test_uniforms_are_open_unit_interval_and_reproducible():
    xs = [uniform(7, k) for k in range(10_000)]
    assert all(0.0 < x < 1.0 for x in xs)
    assert xs == [uniform(7, k) for k in range(10_000)]
    assert abs(statistics.fmean(xs) - 0.5) < 0.01
    assert abs(statistics.pvariance(xs) - 1 / 12) < 0.003


def test_derived_keys_differ():
    assert derive(1, "a") != derive(1, "b")
    assert derive(1, 0) != derive(2, 0)
    assert derive(1, 0) != derive(1, "0")
    assert realization_key(0.5) != realization_key(0.5000000000000001)


# -- Wiener realizations ---------------------------------------------------------------

def test_wiener_starts_at_zero():
    assert WienerPath(3)(0.0) == 0.0
    assert wiener_path(0.25)(0.0) == 0.0


def test_wiener_query_order_does_not_matter():
    xs = [0.1, 2.75, -1.3, 0.5, 10.01, 0.3333, -0.2, 3.0]
    rng = random.Random(5)
    forward = [WienerPath(99)(x) for x in xs]
    p = WienerPath(99)
    shuffled = list(range(len(xs)))
    rng.shuffle(shuffled)
    values = {i: p(xs[i]) for i in shuffled}
    assert [values[i] for i in range(len(xs))] == forward
    assert [p(x) for x in xs] == forward


def test_wiener_paths_are_continuous():
    p = WienerPath(12)
    assert abs(p(0.5) - p(0.5 + 1e-9)) < 1e-3


def test_wiener_is_shared_per_index():
    assert wiener_path(0.3) is wiener_path(0.3)
    assert wiener_path(0.3)(1.7) == WienerPath(realization_key(0.3))(1.7)


def _increments(t, delta):
    return [WienerPath(derive(2024, k), depth=12)(t + delta) -
            WienerPath(derive(2024, k), depth=12)(t) for k in range(WIENER_KEYS)]


@pytest.mark.parametrize("t", [0.0, 0.6, 3.1, -1.4])
def test_wiener_increment_variance(t):
    inc = _increments(t, WIENER_DELTA)
    var = statistics.pvariance(inc)
    assert abs(var - WIENER_DELTA) <= WIENER_VAR_REL_TOL * WIENER_DELTA
    assert abs(statistics.fmean(inc)) < 0.02


def test_disjoint_increments_are_uncorrelated():
    a, b = [], []
    for k in range(WIENER_KEYS):
        p = WienerPath(derive(77, k), depth=12)
        w0, w1, w2 = p(0.3), p(0.55), p(0.8)
        a.append(w1 - w0)
        b.append(w2 - w1)
    assert abs(statistics.correlation(a, b)) <= WIENER_CORR_TOL
