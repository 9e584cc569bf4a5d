from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hololab.expr import (ArityError, ExprSyntaxError, UnknownIdentifierError, Var, central_difference,
                          compile_exprs, differentiate, parse, simplify, to_string)

CATALOG_EXPRS = [
    "sin(x1)^2",
    "4/(1+x1^2+x2^2)^2",
    "(x1*x1 + x2*x2 + 1 - x1)/ (1 + x1^2 + x2^2)^2",
    "exp(-x1) * cosh(x2) - sinh(x1*x2)",
    "sqrt(2)*x1*log(2 + x2)",
    "tan(x1/3) + cos(x2)^-2",
    "-x1^2 + 3*x2^3/7",
]


def test_precedence_power_before_unary_minus():
    e = parse("-x1^2")
    assert e.evaluate([3.0]) == -9.0
    assert parse("(-x1)^2").evaluate([3.0]) == 9.0
    assert parse("2^-1").evaluate([0.0]) == 0.5


def test_aliases_and_constants():
    e = parse("sin(theta)^2 + pi", aliases={"theta": 0})
    assert math.isclose(e.evaluate([math.pi / 6]), 0.25 + math.pi)


def test_interning_makes_equal_trees_identical():
    assert parse("x1*x2 + 1") is parse("x1*x2 + 1")


@pytest.mark.parametrize("text, err", [
    ("x1 +", ExprSyntaxError), ("foo(x1)", UnknownIdentifierError), ("sin x1", ArityError),
    ("x1^1.5", ExprSyntaxError), ("x1 $ 2", ExprSyntaxError), ("atan2(x1, x2)", ArityError),
])
def test_parse_errors(text, err):
    with pytest.raises(err):
        parse(text)


def test_dimension_guard():
    with pytest.raises(UnknownIdentifierError):
        parse("x3", dim=2)


def test_syntax_error_reports_position():
    with pytest.raises(ExprSyntaxError) as info:
        parse("x1 + * x2")
    assert info.value.position == 5


@pytest.mark.parametrize("text", CATALOG_EXPRS)
def test_derivative_matches_central_difference(text, rng):
    e = parse(text)
    for _ in range(10):
        p = rng.uniform(-0.9, 0.9, size=2)
        for i in range(2):
            exact = differentiate(e, i).evaluate(p)
            fd = central_difference(e, i, p, h=1e-6)
            assert abs(exact - fd) < 1e-6 * (1 + abs(exact))


@pytest.mark.parametrize("text", CATALOG_EXPRS)
def test_print_parse_round_trip(text, rng):
    e = parse(text)
    again = parse(to_string(e))
    p = rng.uniform(-0.9, 0.9, size=2)
    assert math.isclose(e.evaluate(p), again.evaluate(p), rel_tol=1e-12, abs_tol=1e-12)
    assert parse(to_string(again)) is again


def test_simplify_identities():
    x = Var(0)
    assert simplify(parse("0*x1 + x1*1")) is x
    assert differentiate(parse("7"), 0).evaluate([0.0]) == 0.0


def test_compile_batches_and_shares_subtrees():
    fn = compile_exprs([parse("sin(x1)*x2"), parse("sin(x1)")])
    pts = np.array([[0.1, 0.2, 0.3], [1.0, 2.0, 3.0]])
    out = fn(pts)
    assert out.shape == (2, 3)
    np.testing.assert_allclose(out[0], np.sin(pts[0]) * pts[1])


# random polynomial-trig expressions built as text
_atoms = st.sampled_from(["x1", "x2", "1.5", "2", "sin(x1)", "cos(x2)", "exp(x1/4)"])


@st.composite
def _texts(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(_atoms)
    op = draw(st.sampled_from(["+", "-", "*"]))
    a, b = draw(_texts(depth=depth - 1)), draw(_texts(depth=depth - 1))
    text = f"({a}) {op} ({b})"
    if draw(st.booleans()):
        text = f"({text})^{draw(st.integers(1, 3))}"
    return text


@given(_texts(), st.floats(-0.8, 0.8), st.floats(-0.8, 0.8), st.integers(0, 1))
def test_property_derivative_oracle(text, a, b, i):
    e = parse(text)
    p = np.array([a, b])
    exact = differentiate(e, i).evaluate(p)
    fd = central_difference(e, i, p, h=1e-6)
    assert abs(exact - fd) < 1e-6 * (1 + abs(exact) + abs(e.evaluate(p)))


@given(_texts(), st.floats(-0.8, 0.8), st.floats(-0.8, 0.8))
def test_property_round_trip(text, a, b):
    e = parse(text)
    again = parse(to_string(e))
    assert math.isclose(e.evaluate([a, b]), again.evaluate([a, b]), rel_tol=1e-10, abs_tol=1e-10)
