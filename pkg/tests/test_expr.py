"""Parser, evaluator and symbolic derivative tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odeasym.expr import (Binary, EvalDomainError, ExprSyntaxError, Num,
                          ScalarFunction, Unary, Var, differentiate,
                          evaluate, parse_expr)

# expressions used across the package; also the round-trip corpus
CORPUS = [
    "0", "1", "t", "2*t", "1+t", "(1+t)^2", "sqrt(1+t)", "exp(-2*t)",
    "exp(t)", "sin(t)", "cos(t)", "2*t*sin(t^2)", "sin(t^2)",
    "sqrt(1+t)*log(2+t)", "exp(sqrt(1+t))", "1/(1+t)^2", "1/(1+t)",
    "exp(2*t)*cos(t)", "t^3-2*t^2+t-7", "abs(t-2)", "t^-2",
    "-(1+t)", "-t^2", "2^t", "exp(exp(t))", "1e-3*t+2.5E+1",
]


def test_parse_structure_product_of_sine():
    tree = parse_expr("2*t*sin(t^2)").root
    expected = Binary("mul", Binary("mul", Num(2.0), Var()),
                      Unary("sin", Binary("pow", Var(), Num(2.0))))
    assert tree == expected


def test_parse_structure_power_of_sum():
    assert parse_expr("(1+t)^2").root == \
        Binary("pow", Binary("add", Num(1.0), Var()), Num(2.0))


def test_nested_exp_evaluates_to_e_at_zero():
    assert evaluate(parse_expr("exp(exp(t))"), 0.0) == pytest.approx(
        math.e, abs=1e-12)


def test_left_associativity_and_precedence():
    assert evaluate(parse_expr("1-2-3"), 0.0) == -4.0
    assert evaluate(parse_expr("2/4/2"), 0.0) == 0.25
    assert evaluate(parse_expr("2+3*4"), 0.0) == 14.0
    # pow binds tighter than unary minus
    assert evaluate(parse_expr("-2^2"), 0.0) == -4.0
    assert evaluate(parse_expr("2^-1"), 0.0) == 0.5
    # pow is right-associative
    assert evaluate(parse_expr("2^3^2"), 0.0) == 512.0


@pytest.mark.parametrize("text,t,expected", [
    ("t", 3.5, 3.5),
    ("2*t*sin(t^2)", 0.0, 0.0),
    ("(1+t)^2", 9.0, 100.0),
])
def test_eval_examples(text, t, expected):
    assert evaluate(parse_expr(text), t) == pytest.approx(expected, abs=1e-12)


def test_eval_vectorised_matches_scalar():
    f = parse_expr("sqrt(1+t)*log(2+t)")
    pts = np.linspace(0.0, 20.0, 37)
    vec = evaluate(f, pts)
    assert vec.shape == pts.shape
    for p, v in zip(pts, vec):
        assert v == pytest.approx(evaluate(f, float(p)), rel=1e-15)


def test_syntax_error_carries_offset():
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr("sin(")
    assert err.value.offset == 4
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr("2*+3")
    assert err.value.offset == 2


def test_unknown_identifier_rejected():
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr("2*x")
    assert err.value.offset == 2
    with pytest.raises(ExprSyntaxError):
        parse_expr("tan(t)")


def test_empty_expression_rejected():
    with pytest.raises(ExprSyntaxError):
        parse_expr("   ")


def test_domain_errors_identify_node():
    with pytest.raises(EvalDomainError) as err:
        evaluate(parse_expr("log(t-1)"), 0.5)
    assert "log" in str(err.value)
    with pytest.raises(EvalDomainError):
        evaluate(parse_expr("sqrt(t-2)"), 0.0)
    with pytest.raises(EvalDomainError):
        evaluate(parse_expr("1/t"), 0.0)


def test_round_trip_on_corpus():
    assert len(CORPUS) >= 20
    for text in CORPUS:
        tree = parse_expr(text)
        again = parse_expr(str(tree))
        assert again.root == tree.root, text


_leaf = st.one_of(
    st.just(Var()),
    st.builds(Num, st.floats(min_value=0.0, max_value=1e6,
                             allow_nan=False, allow_infinity=False)),
)
_expr_tree = st.recursive(
    _leaf,
    lambda children: st.one_of(
        st.builds(Unary, st.sampled_from(
            ["neg", "exp", "log", "sin", "cos", "sqrt", "abs", "sign"]),
            children),
        st.builds(Binary, st.sampled_from(
            ["add", "sub", "mul", "div", "pow"]), children, children),
    ),
    max_leaves=12,
)


@given(_expr_tree)
@settings(max_examples=300, deadline=None)
def test_print_parse_round_trip_property(tree):
    printed = str(tree)
    assert parse_expr(printed).root == tree


@pytest.mark.parametrize("text,dtext", [
    ("t^2", "2*t"),
    ("exp(t)", "exp(t)"),
])
def test_derivative_known_forms(text, dtext):
    assert str(differentiate(parse_expr(text))) == dtext


def test_power_rule_value():
    d = differentiate(parse_expr("t^2"))
    assert evaluate(d, 3.0) == pytest.approx(6.0, abs=1e-14)


def test_chain_rule_value():
    d = differentiate(parse_expr("sin(t^2)"))
    assert evaluate(d, 1.0) == pytest.approx(2.0 * math.cos(1.0), abs=1e-12)


def test_abs_kink_convention():
    d = differentiate(parse_expr("abs(t)"))
    assert evaluate(d, 0.0) == 0.0
    assert evaluate(d, 2.0) == 1.0
    assert evaluate(d, -2.0) == -1.0


def central_difference(f, t, h=1e-5):
    return (evaluate(f, t + h) - evaluate(f, t - h)) / (2.0 * h)


def test_derivative_matches_central_differences_on_corpus():
    rng = np.random.default_rng(7)
    for text in CORPUS:
        f = parse_expr(text)
        df = differentiate(f)
        # doubly-exponential growth overflows doubles beyond t ~ 6.5
        hi = 1.5 if "exp(exp" in text else 8.0
        pts = rng.uniform(0.1, hi, size=100)
        if "abs" in text:
            # stay away from the kink where central differences disagree
            pts = pts[np.abs(pts - 2.0) > 1e-3]
        for t in pts:
            approx = central_difference(f, float(t))
            exact = evaluate(df, float(t))
            assert exact == pytest.approx(
                approx, rel=1e-5, abs=1e-5 * (1.0 + abs(exact))), (text, t)


def test_scalar_function_wrapper():
    f = ScalarFunction.from_expression("2*t", label="double")
    assert f.label == "double"
    assert f(3.0) == 6.0
    assert np.allclose(f(np.array([1.0, 2.0])), [2.0, 4.0])
    df = f.derivative()
    assert df(10.0) == 2.0
    g = ScalarFunction.from_callable(lambda t: t + 1, label="shift")
    with pytest.raises(ValueError):
        g.derivative()
