import math
from fractions import Fraction

import numpy as np
import pytest
from flint import arb, ctx
from hypothesis import given, settings
from hypothesis import strategies as st

from cantor_targets.errors import DomainError, ParseError
from cantor_targets.expr import evaluate, evaluate_array, parse_expression, to_text, uses_n


def ev(text, n=1, **kw):
    return evaluate(parse_expression(text), n, **kw)


@pytest.mark.parametrize(
    "text,n,value",
    [
        ("1+2*3", 1, 7),
        ("2^3^2", 1, 512),
        ("2**3", 1, 8),
        ("-2^2", 1, -4),
        ("(-2)^2", 1, 4),
        ("n/3", 2, Fraction(2, 3)),
        ("floor(n/3)", 8, 2),
        ("ceil(n/3)", 8, 3),
        ("sqrt(16)", 1, 4),
        ("cbrt(27)", 1, 3),
        ("sqrt(n^2)", 12, 12),
        ("abs(3-n)", 10, 7),
        ("0.25*n", 2, Fraction(1, 2)),
        ("1e3", 1, 1000),
        ("2^(-1)", 1, Fraction(1, 2)),
    ],
)
def test_exact_values(text, n, value):
    assert ev(text, n) == value


def test_transcendental_balls():
    with ctx.workprec(256):
        assert ev("log(6)").overlaps(arb(6).log())
        assert ev("exp(1)").overlaps(arb(1).exp())
        assert ev("pi").overlaps(arb.pi())
        assert ev("e").overlaps(arb(1).exp())
        assert ev("cos(n)", 3).overlaps(arb(3).cos())
    assert ev("log(6)").rad() < 2.0**-240


def test_floor_on_exact_boundary_of_transcendental():
    # log(exp(2)) is exactly 2, but balls never shrink to a point, so the floor stays undecided
    with pytest.raises(DomainError):
        ev("floor(log(exp(2)))", max_prec=1024)


def test_floor_resolved_by_escalation():
    # pi*10^30 needs more than 53 bits to floor correctly
    assert ev("floor(pi*10^30)") == 3141592653589793238462643383279


def test_floor_result_flag():
    assert ev("sqrt(n)", 10, floor_result=True) == 3


@pytest.mark.parametrize("text", ["log(0)", "log(n-1)", "sqrt(-1)", "1/(n-1)"])
def test_domain_errors(text):
    with pytest.raises((DomainError, ZeroDivisionError)):
        ev(text, 1)


@pytest.mark.parametrize(
    "text,pos",
    [("2+", 2), ("foo(n)", 0), ("(n", 2), ("n)", 1), ("2 $ 3", 2), ("", 0), ("log n", 4)],
)
def test_parse_errors(text, pos):
    with pytest.raises(ParseError) as info:
        parse_expression(text)
    assert info.value.position == pos


def test_uses_n_and_round_trip():
    node = parse_expression("2+floor(sqrt(n+sqrt(n)*cos(n))/cbrt(n))")
    assert uses_n(node)
    assert not uses_n(parse_expression("log(2)*pi"))
    again = parse_expression(to_text(node))
    assert all(evaluate(again, k, floor_result=True) == evaluate(node, k, floor_result=True) for k in range(1, 30))


def test_array_path_flags_near_integer_floors():
    node = parse_expression("floor(sqrt(n))")
    n = np.arange(1, 200)
    vals, suspect = evaluate_array(node, n, floor_result=True)
    # perfect squares are exactly on the boundary and must be flagged
    squares = {k * k for k in range(1, 15)}
    assert all(suspect[i] for i, k in enumerate(n) if k in squares)
    ok = ~suspect
    assert (vals[ok] == np.floor(np.sqrt(n[ok]))).all()


def test_array_path_integral_expressions_not_flagged():
    vals, suspect = evaluate_array(parse_expression("floor(n)+n^2"), np.arange(1, 100))
    assert suspect.dtype == bool and not suspect.any()
    assert vals.tolist() == [k + k * k for k in range(1, 100)]


def test_mask_is_boolean_for_every_shape():
    for text in EXPRESSIONS + ["n^2", "(n-3)^(1/2)", "floor(n/2)^3"]:
        _, suspect = evaluate_array(parse_expression(text), np.arange(4, 40), floor_result=True)
        assert suspect.dtype == bool, text


def test_array_overflow_flagged():
    _, suspect = evaluate_array(parse_expression("2^n"), np.array([10, 60, 2000]), floor_result=True)
    # 2^10 is flagged too: a floor of a non-integral-typed value sitting on an integer
    assert suspect.tolist() == [True, True, True]
    _, suspect = evaluate_array(parse_expression("n^3"), np.array([10, 10**6]), floor_result=True)
    assert suspect.tolist() == [False, True]


EXPRESSIONS = ["n+1", "2^n", "floor(sqrt(n))+2", "2+floor(sqrt(n+sqrt(n)*cos(n))/cbrt(n))", "ceil(log(n+1)*3)",
               "floor(n*pi)", "floor(exp(n/7))+2"]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(EXPRESSIONS), st.integers(1, 5000))
def test_array_path_agrees_with_exact_where_trusted(text, n):
    node = parse_expression(text)
    vals, suspect = evaluate_array(node, np.array([n]), floor_result=True)
    if not suspect[0]:
        assert int(vals[0]) == evaluate(node, n, floor_result=True)
