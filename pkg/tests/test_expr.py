import math

import numpy as np
import pytest

from modules.expr import (
    BinOp,
    ExprEvaluationError,
    ExprSyntaxError,
    Neg,
    Num,
    UnknownIdentifierError,
    UnsupportedDerivativeError,
    Var,
    compile_formula,
    derivative,
    eval_expr,
    parse,
)


@pytest.mark.parametrize("source, x, expected", [
    ("1 + 2 * 3", 0.0, 7.0),
    ("(1 + 2) * 3", 0.0, 9.0),
    ("-x^2", 3.0, -9.0),
    ("2^3^2", 0.0, 512.0),
    ("2^-1", 0.0, 0.5),
    ("x / 4 / 2", 16.0, 2.0),
    ("10 - 4 - 3", 0.0, 3.0),
    ("sqrt(2 * x)", 8.0, 4.0),
    ("exp(log(x))", 2.5, 2.5),
    ("1e-3 * x", 2.0, 2e-3),
    ("tanh(0) + cos(0) + abs(-x)", 2.0, 3.0),
])
def test_precedence_and_functions(source, x, expected):
    assert eval_expr(parse(source), x) == pytest.approx(expected)


def test_unary_minus_binds_looser_than_power():
    assert parse("-x^2") == Neg(BinOp("^", Var("x"), Num(2.0)))


def test_time_variable():
    f = compile_formula("x * t + 1")
    assert f(2.0, 3.0) == pytest.approx(7.0)
    assert f(2.0) == pytest.approx(1.0)
    assert parse("x * t").variables() == {"x", "t"}
    assert not parse("sin(t)").depends_on("x")


def test_vectorised_evaluation():
    out = parse("sqrt(x) + t").evaluate(np.array([4.0, 9.0]), 1.0)
    assert isinstance(out, np.ndarray)
    assert out.tolist() == [3.0, 4.0]
    assert isinstance(parse("x").evaluate(2.0), float)


@pytest.mark.parametrize("source, position", [
    ("2x", 1),
    ("(x + 1", 6),
    ("x +* 2", 3),
    ("x $ 2", 2),
    ("", 0),
])
def test_syntax_errors_carry_position(source, position):
    with pytest.raises(ExprSyntaxError) as err:
        parse(source)
    assert err.value.position == position
    assert f"position {position}" in str(err.value)


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as err:
        parse("1 + y")
    assert err.value.name == "y"
    assert err.value.position == 4


@pytest.mark.parametrize("source, x", [
    ("sqrt(x)", -1.0),
    ("log(x)", 0.0),
    ("1 / x", 0.0),
    ("x ^ (1/3)", -8.0),
    ("exp(x)", 1000.0),
])
def test_evaluation_errors(source, x):
    with pytest.raises(ExprEvaluationError) as err:
        parse(source).evaluate(x, 0.5)
    assert err.value.x == x
    assert err.value.t == 0.5
    assert isinstance(err.value, ArithmeticError)


def test_evaluation_error_reports_first_bad_point():
    with pytest.raises(ExprEvaluationError) as err:
        parse("sqrt(x)").evaluate(np.array([1.0, -2.0, -3.0]))
    assert err.value.x == -2.0


@pytest.mark.parametrize("source, x, expected", [
    ("x^3", 2.0, 12.0),
    ("sin(x) * x", 1.0, math.cos(1.0) + math.sin(1.0)),
    ("sqrt(2 * x)", 2.0, 0.5),
    ("x^x", 2.0, 4.0 * (math.log(2.0) + 1.0)),
    ("exp(-x^2)", 1.0, -2.0 * math.exp(-1.0)),
    ("1 / x", 2.0, -0.25),
    ("tanh(x)", 0.5, 1.0 - math.tanh(0.5) ** 2),
    ("t * x", 1.0, 0.0),
])
def test_derivatives(source, x, expected):
    assert derivative(parse(source)).evaluate(x, 0.0) == pytest.approx(expected)


SMOOTH_CORPUS = [
    "x^3 - 2*x", "sin(x) * cos(x)", "exp(-x^2)", "log(1 + x^2)", "sqrt(2 * x)",
    "tanh(3*x)", "1 / (1 + x)", "x^x", "x * exp(-x)", "sin(x^2) + cos(2*x)",
    "(x - 1)^4", "exp(sin(x))", "log(x) / x", "sqrt(1 + x^2) * t", "1 + 0.9 * tanh(3 * x)",
    "x^2 * t - x / (t + 1)", "2^x", "cos(x)^2", "-x^3 / 3 + x", "exp(-x) * sin(3 * x)",
]


@pytest.mark.parametrize("index, source", list(enumerate(SMOOTH_CORPUS)))
def test_derivative_matches_central_differences(index, source):
    expr = parse(source)
    xs = np.random.default_rng(index).uniform(0.2, 2.0, 100)
    h, t = 1e-5, 0.7
    numeric = (expr.evaluate(xs + h, t) - expr.evaluate(xs - h, t)) / (2 * h)
    exact = derivative(expr).evaluate(xs, t)
    assert np.all(np.abs(exact - numeric) <= 1e-6 * np.maximum(1.0, np.abs(exact)))


def test_derivative_folds_constants():
    assert derivative(parse("3 * x")) == Num(3.0)
    assert derivative(parse("x + 5")) == Num(1.0)
    assert derivative(parse("t^2"), "t").evaluate(0.0, 3.0) == pytest.approx(6.0)


def test_abs_has_no_derivative():
    with pytest.raises(UnsupportedDerivativeError):
        derivative(parse("abs(x) + 1"))


@pytest.mark.parametrize("source", ["-2", "-x^2 + 3*x", "sin(x)/(1+t)", "2^3^2", "-(x - -1)"])
def test_printer_reparses_to_same_tree(source):
    tree = parse(source)
    assert parse(tree.to_source()) == tree
