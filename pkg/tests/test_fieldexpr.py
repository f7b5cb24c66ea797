import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advmems.fieldexpr import (
    BinOp,
    Call,
    EvaluationError,
    ExprError,
    ExprSyntaxError,
    Neg,
    Num,
    UnknownIdentifierError,
    Var,
    check_variables,
    evaluate,
    parse_expression,
    sample_scalar,
    sample_vector,
    to_string,
    variables,
)
from advmems.grid import build_grid


def test_constant_zero():
    assert parse_expression("0") == Num(0.0)


def test_function_over_product():
    assert parse_expression("sin(pi*y)") == Call("sin", BinOp("*", Var("pi"), Var("y")))


def test_examples_evaluate():
    assert evaluate(parse_expression("2*x^2+1"), {"x": 3}) == 19
    assert evaluate(parse_expression("pi"), {}) == 3.141592653589793
    assert evaluate(parse_expression("exp(0)"), {}) == 1
    assert abs(evaluate(parse_expression("sin(pi*0.5)"), {}) - 1.0) <= 1e-15


@pytest.mark.parametrize(
    "text, value",
    [
        ("-2^2", -4.0),
        ("2^3^2", 512.0),
        ("8/2/2", 2.0),
        ("2-3-4", -5.0),
        ("2*3+4*5", 26.0),
        ("(2+3)*4", 20.0),
        ("--3", 3.0),
        ("2^-1", 0.5),
        ("-x*2", -6.0),
        ("sqrt(16) + log(exp(2)) - cos(0)", 5.0),
        ("1.5e2 + .5", 150.5),
    ],
)
def test_precedence_and_associativity(text, value):
    assert evaluate(parse_expression(text), {"x": 3.0}) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize(
    "text, column",
    [("2*+3", 3), ("(x", 3), ("x)", 2), ("sin x", 5), ("1 $ 2", 3), ("2*", 3), ("", 1)],
)
def test_syntax_errors_report_column(text, column):
    with pytest.raises(ExprSyntaxError) as err:
        parse_expression(text)
    assert err.value.column == column
    assert f"column {column}" in str(err.value)


@pytest.mark.parametrize("text, column", [("z + 1", 1), ("1 + tan(x)", 5), ("foo", 1)])
def test_unknown_identifiers(text, column):
    with pytest.raises(UnknownIdentifierError) as err:
        parse_expression(text)
    assert err.value.column == column


def test_exponent_must_be_constant():
    with pytest.raises(ExprSyntaxError):
        parse_expression("2^x")
    assert evaluate(parse_expression("x^(1+1)"), {"x": 3.0}) == 9.0


@pytest.mark.parametrize(
    "text, point, fragment",
    [
        ("log(x)", {"x": 0.0}, "log"),
        ("log(x - 1)", {"x": 0.5}, "log"),
        ("1/x", {"x": 0.0}, "division"),
        ("sqrt(x)", {"x": -1.0}, "sqrt"),
        ("exp(x)", {"x": 1000.0}, "non-finite"),
        ("x + y", {"x": 1.0}, "missing"),
    ],
)
def test_evaluation_errors_name_the_node(text, point, fragment):
    e = parse_expression(text)
    with pytest.raises(EvaluationError) as err:
        evaluate(e, point)
    assert fragment in str(err.value)
    assert err.value.node is not None


def test_vectorized_evaluation_matches_pointwise():
    e = parse_expression("sin(pi*x) * exp(-y) + x^2")
    xs = np.linspace(0, 1, 7)
    ys = np.linspace(-1, 1, 7)
    vec = evaluate(e, {"x": xs, "y": ys})
    pts = [evaluate(e, {"x": a, "y": b}) for a, b in zip(xs, ys)]
    assert np.array_equal(vec, pts)


def test_variable_legality():
    check_variables(parse_expression("x + r"), "interval")
    check_variables(parse_expression("r^2"), "radial")
    check_variables(parse_expression("x*y + pi"), "rectangle")
    for text, kind in [("y", "interval"), ("x", "radial"), ("r", "rectangle")]:
        with pytest.raises(ExprError):
            check_variables(parse_expression(text), kind)


def test_sampling_on_grids():
    g = build_grid("rectangle", m=9)
    c = sample_vector(g, ["sin(pi*y)", "0"])
    assert c.values.shape == (81, 2)
    assert np.allclose(c.values[:, 0], np.sin(np.pi * g.coords()["y"]))
    assert np.all(c.values[:, 1] == 0)
    with pytest.raises(ExprError):
        sample_vector(g, ["1"])
    f = sample_scalar(build_grid("radial", N=3, m=9), "1 - r^2")
    assert f.values[0] == 1.0 and f.values[-1] == 0.0


# --------------------------------------------------------------------------
# round trip

names = st.sampled_from(["x", "y", "r", "pi"])
numbers = st.floats(min_value=0, max_value=1e6, allow_nan=False, allow_infinity=False)
funcs = st.sampled_from(["sin", "cos", "exp", "log", "sqrt"])


def _constant(tree):
    return not variables(tree)


trees = st.recursive(
    st.one_of(numbers.map(Num), names.map(Var)),
    lambda kids: st.one_of(
        kids.map(Neg),
        st.tuples(st.sampled_from("+-*/"), kids, kids).map(lambda t: BinOp(*t)),
        st.tuples(kids, kids.filter(_constant)).map(lambda t: BinOp("^", *t)),
        st.tuples(funcs, kids).map(lambda t: Call(*t)),
    ),
    max_leaves=12,
)


@given(trees)
@settings(max_examples=300, deadline=None)
def test_print_parse_round_trip(tree):
    assert parse_expression(to_string(tree)) == tree


@given(trees)
@settings(max_examples=200, deadline=None)
def test_parse_print_parse_idempotent(tree):
    once = parse_expression(to_string(tree))
    twice = parse_expression(to_string(once))
    assert once == twice
    assert to_string(once) == to_string(twice)


@given(trees, st.floats(0.1, 0.9), st.floats(0.1, 0.9))
@settings(max_examples=200, deadline=None)
def test_evaluation_deterministic(tree, x, y):
    pt = {"x": x, "y": y, "r": x}
    try:
        a = evaluate(tree, pt)
    except EvaluationError:
        with pytest.raises(EvaluationError):
            evaluate(tree, pt)
        return
    b = evaluate(tree, dict(pt))
    assert a == b or (math.isnan(a) and math.isnan(b))
