from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings

from einstein_limits.expr import (
    Add,
    Const,
    Coordinate,
    DomainError,
    Exp,
    Mul,
    Neg,
    Parameter,
    ParseError,
    Pow,
    UnboundNameError,
    compile_expr,
    compile_many,
    cos,
    differentiate,
    evaluate,
    exp,
    log,
    parse,
    simplify,
    sin,
    sqrt,
    substitute,
    to_string,
)

from strategies import bindings, expressions

R = Coordinate("Rhat", positive=True)
K = Parameter("K")
T = Coordinate("t", positive=True)
P = Parameter("p")


# --- parse -------------------------------------------------------------------


def test_parse_rational_power():
    assert parse("t^(4/3)") == Pow(Parameter("t"), Const(Fraction(4, 3)))


def test_parse_exp_of_difference():
    e = parse("exp(2*(eta - U))")
    assert isinstance(e, Exp)
    assert e.arg == Mul((Const(2), Add((Parameter("eta"), Neg(Parameter("U"))))))


def test_parse_reports_offset():
    with pytest.raises(ParseError) as info:
        parse("x + ")
    assert info.value.offset == 4
    assert "offset 4" in str(info.value)


@pytest.mark.parametrize("text", ["tan(x)", "foo(1)"])
def test_parse_rejects_unknown_function(text):
    with pytest.raises(ParseError, match="unknown function"):
        parse(text)


@pytest.mark.parametrize("text", ["(x", "x)", "2 ** 3", "x $ y", ""])
def test_parse_syntax_errors(text):
    with pytest.raises(ParseError):
        parse(text)


def test_coordinates_and_parameters_are_distinguished():
    e = parse("t*p", coordinates=["t"])
    kinds = {type(a).__name__ for a in e.args}
    assert kinds == {"Coordinate", "Parameter"}


def test_power_is_right_associative_and_binds_tighter():
    assert evaluate(parse("2^3^2"), {}) == 512.0
    assert evaluate(parse("-2^2"), {}) == -4.0
    assert evaluate(parse("3*x^2/10"), {"x": 2.0}) == pytest.approx(1.2)


def test_division_chains_left_to_right():
    assert evaluate(parse("x/4/3"), {"x": 12.0}) == 1.0
    assert evaluate(parse("1/2/2"), {}) == 0.25


def test_decimals_and_exponents():
    assert evaluate(parse("1.5e2 + .5"), {}) == 150.5


# --- differentiate ----------------------------------------------------------


def test_power_rule_with_symbolic_exponent():
    d = differentiate(T ** (2 * P), "t")
    assert simplify(d - 2 * P * T ** (2 * P - 1)) == Const(0)


def test_log_derivative_matches_hat_eta():
    assert differentiate(log(R / K), R) == simplify(Pow(R, Const(-1)))
    eta = Const(Fraction(1, 2)) * log(K ** -2 * R ** 2)
    assert differentiate(eta, R) == simplify(Pow(R, Const(-1)))


def test_derivative_of_parameter_is_zero():
    assert differentiate(Parameter("C_U"), "theta") == Const(0)


def test_trig_and_exp_derivatives():
    x = Coordinate("x")
    assert simplify(differentiate(sin(x) * cos(x), x) - (cos(x) ** 2 - sin(x) ** 2)) == Const(0)
    assert differentiate(exp(3 * x), x) == simplify(3 * exp(3 * x))


@settings(max_examples=50)
@given(expressions, bindings)
def test_derivative_matches_central_difference(e, b):
    f = compile_expr(e, ["x", "y"])
    d = differentiate(e, "x")
    h = 1e-6
    fd = (f(b["x"] + h, b["y"]) - f(b["x"] - h, b["y"])) / (2 * h)
    exact = evaluate(d, b)
    assert abs(exact - fd) <= 1e-5 * (1 + abs(exact))


# --- simplify ---------------------------------------------------------------


def test_exp_log_cancellation():
    e = simplify(exp(2 * log(R / K)))
    assert e == simplify(R ** 2 / K ** 2)
    # oracle: numeric agreement with R^2/K^2 at 20 random bindings
    rng = np.random.default_rng(7)
    for _ in range(20):
        r, k = rng.uniform(0.1, 5.0), rng.uniform(0.1, 5.0) * rng.choice([-1, 1])
        assert evaluate(e, {"Rhat": r, "K": k}) == pytest.approx(r * r / (k * k), rel=1e-13)


def test_exponent_cancellation():
    assert simplify(T ** (2 * P) * T ** (-2 * P)) == Const(1)


def test_additive_inverse():
    x = Coordinate("x")
    assert simplify(Add((x, Neg(x)))) == Const(0)


def test_pythagorean_identity():
    th = Coordinate("theta")
    assert simplify(sin(th) ** 2 + cos(th) ** 2) == Const(1)
    assert simplify(3 * sin(th) ** 2 + 3 * cos(th) ** 2 - 3) == Const(0)


def test_exact_rationals_do_not_round():
    e = simplify(Const(Fraction(2, 3)) + Const(Fraction(2, 3)) + Const(Fraction(-1, 3)))
    assert e == Const(1)
    assert simplify(Const(Fraction(4, 9)) + Const(Fraction(4, 9)) + Const(Fraction(1, 9))) == Const(1)


def test_decimals_contaminate():
    e = simplify(Const(0.1) + Const(Fraction(1, 5)))
    assert isinstance(e.value, float)


def test_radicals_combine():
    k = Parameter("K")
    e = simplify(4 / (k * sqrt(Const(5))) * Const(Fraction(5, 4)) ** Const(Fraction(1, 2)))
    assert e == simplify(2 / k)


def test_sums_cancel_against_themselves():
    x, y = Coordinate("x"), Coordinate("y")
    assert simplify((x + y) / (x + y)) == Const(1)


@settings(max_examples=60)
@given(expressions, bindings)
def test_simplify_preserves_value(e, b):
    before = evaluate(e, b)
    after = evaluate(simplify(e), b)
    assert abs(before - after) <= 1e-12 * (1 + abs(before)) * max(1.0, e.count_nodes() / 10)


@settings(max_examples=60)
@given(expressions)
def test_simplify_is_idempotent(e):
    s = simplify(e)
    assert simplify(s) == s


# --- printing ---------------------------------------------------------------


@settings(max_examples=80)
@given(expressions)
def test_print_parse_round_trip(e):
    text = to_string(e)
    back = parse(text, coordinates=["x", "y"], positive=["x", "y"])
    assert simplify(back) == simplify(e)


@settings(max_examples=40)
@given(expressions, bindings)
def test_round_trip_preserves_value(e, b):
    back = parse(to_string(e), coordinates=["x", "y"], positive=["x", "y"])
    v = evaluate(e, b)
    assert evaluate(back, b) == pytest.approx(v, rel=1e-12, abs=1e-12)


def test_print_forms():
    x, y = Coordinate("x"), Coordinate("y")
    assert to_string(Add((x, Neg(Mul((Const(2), y)))))) == "x - 2*y"
    assert to_string(Pow(x, Const(Fraction(4, 3)))) == "x^(4/3)"
    assert to_string(Mul((x, Pow(y, Const(-1))))) == "x/y"


# --- evaluate ---------------------------------------------------------------


def test_eval_rational_power_is_exact():
    assert evaluate(parse("t^(4/3)"), {"t": 8}) == 16.0


def test_eval_backreaction_value():
    assert evaluate(parse("5/(4*Rhat)"), {"Rhat": 1}) == 1.25


def test_eval_domain_error_names_subexpression():
    with pytest.raises(DomainError) as info:
        evaluate(parse("1 + log(x)"), {"x": -1.0})
    assert to_string(info.value.subexpression) == "log(x)"


@pytest.mark.parametrize("text,b", [("x^(-1)", {"x": 0.0}), ("sqrt(x)", {"x": -1.0}), ("x^(1/2)", {"x": -4.0})])
def test_eval_other_domain_errors(text, b):
    with pytest.raises(DomainError):
        evaluate(parse(text), b)


def test_eval_unbound_name():
    with pytest.raises(UnboundNameError) as info:
        evaluate(parse("x + y"), {"x": 1.0})
    assert info.value.name == "y"


@settings(max_examples=30)
@given(expressions, bindings)
def test_evaluation_is_deterministic_and_compiled_agrees(e, b):
    first = evaluate(e, b)
    assert evaluate(e, b) == first
    compiled = compile_expr(e, ["x", "y"])(b["x"], b["y"])
    assert compiled == pytest.approx(first, rel=1e-12, abs=1e-12)


def test_compiled_domain_error_is_located():
    fn = compile_many([parse("log(x)")], ["x"])
    with pytest.raises(DomainError):
        fn(np.array([1.0, -2.0]))


# --- substitute -------------------------------------------------------------


def test_substitute_time_rescaling():
    u, ti = Coordinate("u", positive=True), Parameter("t_i", positive=True)
    e = substitute(T ** Const(Fraction(3, 2)), {"t": u * ti})
    assert e == Pow(Mul((u, ti)), Const(Fraction(3, 2)))


def test_substitute_empty_is_identity():
    x = Coordinate("x")
    assert substitute(x, {}) is x


def test_substitute_square_root():
    u = Coordinate("u", positive=True)
    e = simplify(substitute(Coordinate("R", positive=True) ** 2, {"R": sqrt(u)}))
    assert e == u
    assert evaluate(e, {"u": 2.7}) == pytest.approx(2.7)


def test_substitution_is_simultaneous():
    x, y = Coordinate("x"), Coordinate("y")
    e = substitute(x - y, {"x": y, "y": x})
    assert simplify(e - (y - x)) == Const(0)


def test_expressions_are_immutable_and_hashable():
    x = Coordinate("x")
    with pytest.raises(AttributeError):
        x.name = "z"
    assert len({parse("x+1"), parse("x+1")}) == 1
