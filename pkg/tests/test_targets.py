import math
from fractions import Fraction

import pytest
from flint import arb, ctx
from hypothesis import given, settings
from hypothesis import strategies as st

from cantor_targets.errors import NotQAdic
from cantor_targets.expansion import iterate, nearest_integer_distance
from cantor_targets.sequences import BASE, WEIGHT, CumulativeCache
from cantor_targets.targets import Verdict, height, hit_levels, hit_test, make_level, psi, witness_search

F = Fraction


def log_ball(expr_fn):
    with ctx.workprec(300):
        return expr_fn()


def close(value, exact, tol=1e-60):
    with ctx.workprec(300):
        return value.overlaps(exact) and abs(float((value.ball - exact).mid())) < tol


class TestLevels:
    def test_dyadic(self):
        lv = make_level("const:2", "const:0", 3)
        assert close(lv.log_radius, log_ball(lambda: -3 * arb(2).log()))
        assert lv.disjoint is False  # alpha = 0: radius 1/Q_n, arcs touch

    def test_periodic(self):
        assert close(make_level("periodic:2,3", "const:1", 2).log_radius, log_ball(lambda: -2 - arb(6).log()))

    def test_exponential(self):
        lv = make_level("expr:2^n", "expr:n*log(2)", 2)
        assert close(lv.log_radius, log_ball(lambda: -6 * arb(2).log()))
        assert lv.disjoint is True

    def test_radius_identity(self):
        lv = make_level("expr:n+1", "expr:log(n)", 9)
        assert close(lv.log_radius, log_ball(lambda: -(lv.alpha_n.ball + lv.log_Qn.ball)))

    def test_capped_product_still_has_a_level(self):
        q = CumulativeCache.from_text("expr:2^n", BASE, cap_bits=128)
        lv = make_level(q, "const:1", 100)
        assert lv.log_Qn.mid == pytest.approx(5050 * math.log(2))

    def test_psi(self):
        assert close(psi("const:2", "const:0", 1), log_ball(lambda: -arb(2).log()))
        assert close(psi("periodic:2,3", "const:1", 2), log_ball(lambda: -2 - arb(6).log()))
        radii = [psi("expr:n+1", "expr:log(n)/3", n).mid for n in range(1, 40)]
        assert all(b < a for a, b in zip(radii, radii[1:]))

    def test_level_index(self):
        with pytest.raises(ValueError):
            make_level("const:2", "const:0", 0)


class TestHits:
    def test_grid_point(self):
        v = hit_test(F(1, 6), "periodic:2,3", "const:1", 2)
        assert v.status is Verdict.HIT and v.hit

    def test_miss(self):
        v = hit_test(F(1, 4), "periodic:2,3", "const:1", 2)
        assert v.status is Verdict.MISS
        # margin = log(1/2) + 2
        assert close(v.margin, log_ball(lambda: 2 - arb(2).log()), 1e-30)

    def test_zero_hits_everywhere(self):
        levels = hit_levels(0, "expr:n+1", "const:1", 10)
        assert [n for n, _ in levels] == list(range(1, 11))

    def test_no_hits(self):
        assert hit_levels(F(1, 5), "periodic:2,3", "const:3", 4) == []

    def test_five_sixths(self):
        # the level-1 orbit point 2/3 is at distance 1/3 <= e^{-1}, so n = 1 is a hit too
        levels = hit_levels(F(5, 6), "periodic:2,3", "const:1", 4)
        assert [n for n, _ in levels] == [1, 2, 3, 4]
        assert nearest_integer_distance(iterate(F(5, 6), "periodic:2,3", 1)) == F(1, 3)
        assert 1 / 3 <= math.exp(-1)

    def test_uncertain_on_exact_boundary(self):
        # ||2 * 1/4|| = 1/2 = e^{-log 2}: both sides are equal, so no precision can separate them
        v = hit_test(F(1, 4), "const:2", "const:log(2)", 1, max_precision=512)
        assert v.status is Verdict.UNCERTAIN and v.precision == 512

    def test_near_boundary_resolved_by_escalation(self):
        # T(y) = 10 y is 1/e rounded up at 60 digits, a miss invisible at 64 bits
        just_above = F(367879441171442321595523770161460867445811131031767834507837, 10**60)
        v = hit_test(just_above / 10, "const:10", "const:1", 1, precision=64)
        assert v.status is Verdict.MISS and v.precision > 64

    def test_margin_scaling_identity(self):
        x = F(2, 7)
        v = hit_test(x, "periodic:2,3", "const:1/2", 3)
        d = nearest_integer_distance(iterate(x, "periodic:2,3", 3))
        with ctx.workprec(300):
            assert close(v.margin, arb(d.numerator).log() - arb(d.denominator).log() + arb(3) / 2, 1e-30)

    def test_degenerate_radius(self):
        # alpha = 0: the orbit distance is at most 1/2 <= e^0, so every point is hit
        for k in range(7):
            assert hit_test(F(k, 7), "const:2", "const:0", 3).hit


class TestHeight:
    @pytest.mark.parametrize("w,h", [(F(1, 2), 1), (F(1, 3), 2), (F(0), 1), (F(5, 36), 4), (F(1, 4), 3)])
    def test_examples(self, w, h):
        assert height(w, "periodic:2,3") == h

    def test_not_qadic(self):
        with pytest.raises(NotQAdic, match="not a Q-adic"):
            height(F(1, 5), "periodic:2,3")

    def test_scan_horizon(self):
        with pytest.raises(NotQAdic, match="scan horizon"):
            height(F(1, 1009), "expr:n+1", n_scan=100)
        assert height(F(1, 1009), "expr:n+1", n_scan=2000) == 1008


class TestWitness:
    def test_grid_point(self):
        r = witness_search(F(1, 6), "periodic:2,3", "const:1", 2)
        assert r.found and r.witness == F(1, 6) and r.distance == 0 and r.height == 2

    def test_absent(self):
        r = witness_search(F(1, 4), "periodic:2,3", "const:1", 2)
        assert r.found is False and r.witness is None and r.distance == F(1, 12)

    def test_zero_alpha_always_has_witness(self):
        for k in range(11):
            assert witness_search(F(k, 11), "expr:n+1", "const:0", 4).found


specs = st.sampled_from([("const:2", "const:1"), ("periodic:2,3", "const:1"), ("expr:n+1", "expr:log(n+1)/2"),
                         ("const:3", "const:1/2")])


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 300), st.integers(0, 299), specs, st.integers(1, 10))
def test_equivalence_and_scaling(q, p, pair, n):
    x = F(p % q, q)
    Q, A = pair
    v = hit_test(x, Q, A, n)
    w = witness_search(x, Q, A, n)
    assert (v.status is Verdict.HIT) == (w.found is True)
    assert (v.status is Verdict.MISS) == (w.found is False)
