import math

import numpy as np
import pytest

from nonholo.expr import (ONE, ZERO, DomainError, ParseError, UnboundVariableError, UnknownIdentifierError,
                          Binary, Const, Var, const, differentiate, evaluate, evaluate_batch, parse, var)

COORDS = ["x1", "x2", "v", "y4"]


def P(text):
    return parse(text, COORDS)


def test_parse_variable_is_var_node():
    e = P("x1")
    assert isinstance(e, Var) and e.name == "x1"


def test_parse_and_evaluate_examples():
    assert evaluate(P("2*v + sin(x2)"), {"x2": 0.0, "v": 3.0}) == 6.0
    assert evaluate(P("(1/2)*exp(v)"), {"v": 0.0}) == 0.5
    assert evaluate(P("x1^2 * x2"), {"x1": 3.0, "x2": 2.0}) == 18.0


def test_unknown_identifier_names_it():
    with pytest.raises(UnknownIdentifierError) as ei:
        P("q + 1")
    assert ei.value.name == "q"


def test_syntax_error_reports_byte_offset():
    with pytest.raises(ParseError) as ei:
        P("x1 + * 2")
    assert ei.value.offset == 5


def test_precedence_and_associativity():
    pt = {"x1": 2.0, "x2": 3.0}
    assert evaluate(P("x1^x2^2"), pt) == 2.0 ** 9  # right-associative
    assert evaluate(P("-x1^2"), pt) == -4.0  # ^ binds tighter than unary minus
    assert evaluate(P("x2 - x1 - 1"), pt) == 0.0  # left-associative
    assert evaluate(P("x2 / x1 / 3"), pt) == 0.5
    assert evaluate(P("1 + 2*x1^2"), pt) == 9.0


def test_domain_errors_are_raised_not_nan():
    for text, pt in (("ln(v)", {"v": -1.0}), ("sqrt(v)", {"v": -2.0}), ("1/v", {"v": 0.0})):
        with pytest.raises(DomainError) as ei:
            evaluate(P(text), pt)
        assert ei.value.point is not None


def test_batch_domain_error():
    with pytest.raises(DomainError):
        evaluate_batch([P("ln(v)")], {"v": np.array([1.0, -1.0])})


def test_unbound_variable():
    with pytest.raises(UnboundVariableError):
        evaluate(P("x1 + v"), {"x1": 1.0})


def test_power_rule_and_independent_variable():
    assert evaluate(differentiate(P("v^3"), "v"), {"v": 2.0}) == 12.0
    assert differentiate(P("x1"), "v") is ZERO


def test_derivative_matches_finite_difference():
    e = P("sin(x1*x2)")
    d = differentiate(e, "x1")
    pt = {"x1": 0.7, "x2": 1.3}
    h = 1e-5
    fd = (evaluate(e, {**pt, "x1": 0.7 + h}) - evaluate(e, {**pt, "x1": 0.7 - h})) / (2 * h)
    assert abs(evaluate(d, pt) - fd) < 1e-8


NODE_CASES = ["exp(x1*x2)", "ln(1 + x1^2)", "sin(x1 - 2*x2)", "cos(x1*x2)", "tan(0.3*x1)", "tanh(x1 - x2)",
              "sqrt(2 + x1*x2)", "abs(x1 - 3)", "x1/(2 + x2^2)", "x1^x2", "(1 + x1)^2.5", "-x1*x2",
              "cosh(x1)*sinh(x2)", "sech(x1 + x2)"]


@pytest.mark.parametrize("text", NODE_CASES)
def test_derivative_matches_fourth_order_differences(text, rng):
    e = P(text)
    for name in ("x1", "x2"):
        d = differentiate(e, name)
        for _ in range(100):
            pt = {"x1": rng.uniform(0.2, 1.0), "x2": rng.uniform(0.2, 1.0)}
            h = 1e-3
            f = [evaluate(e, {**pt, name: pt[name] + k * h}) for k in (-2, -1, 1, 2)]
            fd = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)
            ex = evaluate(d, pt)
            assert abs(ex - fd) <= 1e-7 * max(1.0, abs(ex))


def test_linearity_of_differentiation(rng):
    e1, e2 = P("x1^2*sin(x2)"), P("exp(x1)*x2")
    a, b = 1.7, -0.4
    d = differentiate(a * e1 + b * e2, "x1")
    d1, d2 = differentiate(e1, "x1"), differentiate(e2, "x1")
    for _ in range(100):
        pt = {"x1": rng.uniform(-1, 1), "x2": rng.uniform(-1, 1)}
        assert abs(evaluate(d, pt) - (a * evaluate(d1, pt) + b * evaluate(d2, pt))) < 1e-12


def test_mixed_partials_commute(rng):
    e = P("sin(x1*x2^2)*exp(x1 - x2) + ln(2 + x1*x2)")
    dab = differentiate(differentiate(e, "x1"), "x2")
    dba = differentiate(differentiate(e, "x2"), "x1")
    for _ in range(50):
        pt = {"x1": rng.uniform(0, 1), "x2": rng.uniform(0, 1)}
        assert abs(evaluate(dab, pt) - evaluate(dba, pt)) < 1e-10


def test_abs_derivative_flagged_at_zero_only_when_evaluated():
    d = differentiate(P("abs(x1)"), "x1")
    assert evaluate(d, {"x1": -2.0}) == -1.0
    with pytest.raises(DomainError):
        evaluate(d, {"x1": 0.0})


def test_hash_consing_and_minimal_simplification():
    assert P("x1*1") is var("x1")
    assert P("x1*0") is ZERO
    assert P("x1 + 0") is var("x1")
    assert P("2*3") is const(6.0)
    assert isinstance(P("x1 + x2"), Binary)
    assert P("x1 + x2") is P("x1 + x2")
    assert const(1.0) is ONE and isinstance(ONE, Const)


@pytest.mark.parametrize("text", NODE_CASES + ["2*v + sin(x2)", "-(x1 - -x2)", "x1^-2"])
def test_round_trip_printing(text):
    e = P(text)
    assert parse(str(e), COORDS) is e


def test_batch_evaluation_matches_scalar(rng):
    e = P("sech(x1)*x2^3 - ln(1 + v^2)")
    pts = {"x1": rng.uniform(-1, 1, 20), "x2": rng.uniform(-1, 1, 20), "v": rng.uniform(-1, 1, 20)}
    batch = evaluate_batch([e], pts)[0]
    for k in range(20):
        assert batch[k] == pytest.approx(evaluate(e, {c: pts[c][k] for c in pts}), rel=1e-14, abs=1e-15)


def test_pi_and_aliases():
    assert evaluate(P("pi"), {}) == math.pi
    assert evaluate(P("log(v)"), {"v": math.e}) == pytest.approx(1.0)
    assert evaluate(P("v**2"), {"v": 3.0}) == 9.0
