import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cantor_targets.dimension import (
    ExponentialFamily,
    PeriodicFamily,
    PolynomialFamily,
    bowen_parameter,
    corollary_limit,
    dimension_limsup,
    family_formula,
    parse_family,
    pressure_estimate,
    ratio_profile,
    stolz_check,
    tail_window,
)
from cantor_targets.errors import PreconditionUnmet, UnsupportedFamily

LOG2 = math.log(2)
PERIODIC_C1 = 0.47254038231302425  # log sqrt6 / (log sqrt6 + 1), from the closed form


class TestPressure:
    @pytest.mark.parametrize("c", [0.0, 0.5, 1.0, 3.0])
    @pytest.mark.parametrize("s", [0.0, 0.3, 0.9])
    def test_constant_sequences(self, c, s):
        value, profile = pressure_estimate("const:2", f"const:{c}", s, 200)
        assert value == pytest.approx((1 - s) * LOG2 - s * c, abs=1e-13)
        assert np.allclose(profile.values, value, atol=1e-13)

    def test_s_zero(self):
        value, _ = pressure_estimate("expr:n+1", "const:5", 0.0, 500)
        assert value >= LOG2
        N = np.arange(250, 501)
        expected = max(math.lgamma(n + 2) / n for n in N)
        assert value == pytest.approx(expected, rel=1e-12)

    def test_balanced_zero(self):
        value, _ = pressure_estimate("const:2", "const:log(2)", 0.5, 100)
        assert abs(value) < 1e-15

    def test_affine_and_decreasing(self):
        _, p0 = pressure_estimate("periodic:2,3", "expr:log(n+1)", 0.0, 400)
        _, p1 = pressure_estimate("periodic:2,3", "expr:log(n+1)", 1.0, 400)
        _, ph = pressure_estimate("periodic:2,3", "expr:log(n+1)", 0.5, 400)
        assert np.allclose(ph.values, (p0.values + p1.values) / 2, rtol=1e-13)
        vals = [pressure_estimate("periodic:2,3", "expr:log(n+1)", s, 400)[0] for s in np.linspace(0, 1, 11)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_window_and_s_validation(self):
        with pytest.raises(ValueError):
            pressure_estimate("const:2", "const:1", 1.5, 100)
        with pytest.raises(ValueError):
            tail_window(9)
        with pytest.raises(ValueError):
            tail_window(100, 1.0)
        assert tail_window(1000, 0.5) == (500, 1000)
        assert tail_window(11, 0.3) == (4, 11)

    def test_profile_samples(self):
        _, prof = pressure_estimate("const:3", "const:1", 0.2, 20)
        assert sorted(prof.samples()) == list(range(10, 21))


class TestBowen:
    def test_balanced(self):
        est = bowen_parameter("const:2", "const:log(2)", 1000)
        assert abs(est.value - 0.5) <= 1e-6 and est.method == "bowen_bisection"

    def test_zero_weights(self):
        assert abs(bowen_parameter("expr:n+1", "const:0", 1000).value - 1) <= 1e-6

    def test_periodic(self):
        est = bowen_parameter("periodic:2,3", "const:1", 10_000, tol=1e-9)
        assert abs(est.value - PERIODIC_C1) <= 1e-8

    def test_tol(self):
        with pytest.raises(ValueError):
            bowen_parameter("const:2", "const:1", 100, tol=0)
        coarse = bowen_parameter("const:2", "const:1", 100, tol=1e-2)
        assert coarse.iterations == 7


class TestLimsup:
    def test_zero_weights_exactly_one(self):
        assert dimension_limsup("expr:n+1", "const:0", 100).value == 1.0

    def test_exponential_cancellation(self):
        est = dimension_limsup("expr:2^n", "expr:log(2)*n", 1000)
        assert est.value == pytest.approx(0.5, abs=1e-14)

    def test_polynomial_slow(self):
        vals = [dimension_limsup("expr:n+1", "expr:log(n)", N).value for N in (10**3, 10**4, 10**5)]
        gaps = [abs(v - 0.5) for v in vals]
        assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 0.02

    def test_periodic_formula(self):
        est = dimension_limsup("periodic:2,3", "const:1", 10_000)
        assert est.value == pytest.approx(PERIODIC_C1, abs=1e-12)
        assert est.argmax % 2 == 0 and est.residual < 1e-12

    def test_ratio_profile_matches(self):
        prof = ratio_profile("periodic:2,3", "const:1", 100)
        assert prof.values.max() == dimension_limsup("periodic:2,3", "const:1", 100).value

    def test_residual_flags_drift(self):
        # a sequence whose g_n still moves in the window gets a visible residual
        est = dimension_limsup("expr:n+1", "expr:log(n)", 100)
        assert est.residual > 1e-4


class TestCorollary:
    def test_constant(self):
        est = corollary_limit("const:5", "const:2", 200)
        assert est.limit_ratio == pytest.approx(2 / math.log(5))
        assert est.value == pytest.approx(math.log(5) / (math.log(5) + 2))
        assert not est.no_limit

    def test_divergent(self):
        est = corollary_limit("const:2", "expr:n", 1000)
        assert est.value == 0.0 and est.limit_ratio == math.inf

    def test_oscillation(self):
        est = corollary_limit("periodic:2,3", "const:1", 1000)
        assert est.no_limit
        assert est.residual == pytest.approx(1 / (1 + 1 / math.log(3)) - 1 / (1 + 1 / LOG2))

    def test_slowly_growing_ratio_not_divergent(self):
        # alpha_n / log q_n = log n / log(n+1) -> 1
        est = corollary_limit("expr:n+1", "expr:log(n)", 10_000)
        assert est.limit_ratio < 1 and est.value == pytest.approx(0.5, abs=0.01)


class TestFamilies:
    def test_periodic(self):
        v = family_formula(PeriodicFamily((2, 3), 1))
        assert float(v) == pytest.approx(PERIODIC_C1, abs=1e-16)
        assert v.value.radius < 1e-70

    def test_poly(self):
        assert float(family_formula(PolynomialFamily(Fraction(1, 6), 1))) == pytest.approx((1 / 6) / (1 / 6 + 1))

    def test_exp(self):
        assert float(family_formula(ExponentialFamily(2, "log(2)"))) == pytest.approx(0.5, abs=1e-16)

    @pytest.mark.parametrize(
        "text,expected",
        [
            ("periodic:2,3;c=1", PERIODIC_C1),
            ("eventually:5|2,3;c=1", PERIODIC_C1),
            ("poly:k=1/6;c=1", 1 / 7),
            ("exp:b=2;c=log(2)", 0.5),
            ("exp:b=3;c=0", 1.0),
        ],
    )
    def test_parse(self, text, expected):
        assert float(family_formula(parse_family(text))) == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("text", ["periodic:2,3", "poly:c=1", "cubic:k=1;c=1", "exp:b=1;c=1", "periodic:1;c=1",
                                      "periodic:2;c=-1"])
    def test_unsupported(self, text):
        with pytest.raises(UnsupportedFamily):
            family_formula(parse_family(text))

    def test_tends_to_zero(self):
        vals = [float(family_formula(ExponentialFamily(2, c))) for c in (1, 10, 100, 1000)]
        assert all(b < a for a, b in zip(vals, vals[1:])) and vals[-1] < 1e-3


class TestStolz:
    def test_constant(self):
        r = stolz_check("const:1", "const:2", 100)
        assert r.term_ratio == r.sum_ratio == 0.5 and r.gap == 0

    def test_equal(self):
        r = stolz_check("expr:n", "expr:n", 100)
        assert r.term_ratio == r.sum_ratio == 1.0

    def test_log_over_one(self):
        r = stolz_check("expr:log(n)", "const:1", 1000)
        assert r.term_ratio == pytest.approx(math.log(1000))
        assert r.sum_ratio == pytest.approx(math.lgamma(1001) / 1000)
        assert r.term_ratio_growing and r.gap > 0.9

    def test_positive_denominator(self):
        with pytest.raises(PreconditionUnmet):
            stolz_check("const:1", "const:0", 100)


SPEC_PAIRS = [("const:2", "const:1"), ("periodic:2,3", "const:1/2"), ("expr:n+1", "expr:log(n)"),
              ("expr:2^n", "expr:n"), ("eventually:7|3,5", "periodic:1,2"), ("const:3", "const:0")]


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(SPEC_PAIRS), st.integers(10, 4000))
def test_range_and_bracketing(pair, N):
    Q, A = pair
    est = dimension_limsup(Q, A, N)
    assert 0 <= est.value <= 1
    lo, hi = est.value - est.residual - 1e-6, est.value + est.residual + 1e-6
    if lo > 0:
        assert pressure_estimate(Q, A, lo, N)[0] > 0
    if hi < 1:
        assert pressure_estimate(Q, A, hi, N)[0] < 0
