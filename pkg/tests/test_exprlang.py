import math
import random

import pytest

from dodslab import exprlang as el
from dodslab.errors import (DomainError, ExprSyntaxError, UnboundVariable,
                            UnknownIdentifier)


def test_parse_well_formed():
    expr = el.parse("(y - y_)/(x - x_)", ["x", "y", "x_", "y_"])
    assert el.variables_of(expr) == {"x", "y", "x_", "y_"}


def test_parse_difference_form():
    # invariant written in difference variables
    expr = el.parse("exp(dy/dx)/dx", ["dx", "dy"])
    assert el.evaluate(expr, {"dx": 1.0, "dy": 1.0}) == pytest.approx(math.e)


def test_parse_malformed_offset():
    with pytest.raises(ExprSyntaxError) as err:
        el.parse("x +* y", ["x", "y"])
    assert err.value.offset == 3


def test_parse_unknown_identifier():
    with pytest.raises(UnknownIdentifier):
        el.parse("x + q", ["x"])
    with pytest.raises(UnknownIdentifier):
        el.parse("foo(x)", ["x"])


def test_empty_source_rejected():
    with pytest.raises(ExprSyntaxError):
        el.parse("   ", ["x"])


def test_eval_direct_arithmetic():
    expr = el.parse("(y - y_)/(x - x_)", ["x", "y", "x_", "y_"])
    assert el.evaluate(expr, {"x": 1, "y": 2, "x_": 0.5, "y_": 1}) == 2.0


def test_eval_constant_fold():
    assert el.evaluate(el.parse("exp(1)/1", []), {}) == pytest.approx(
        2.718281828459045, abs=0)


def test_eval_checked_domain_error():
    expr = el.parse("log(x)", ["x"])
    with pytest.raises(DomainError):
        el.evaluate(expr, {"x": -1.0}, checked=True)
    # unchecked propagates a NaN instead
    assert math.isnan(el.evaluate(expr, {"x": -1.0}))


def test_checked_division_by_zero():
    expr = el.parse("1/x", ["x"])
    with pytest.raises(DomainError):
        el.evaluate(expr, {"x": 0.0}, checked=True)
    assert math.isinf(el.evaluate(expr, {"x": 0.0}))


def test_unbound_variable():
    with pytest.raises(UnboundVariable):
        el.evaluate(el.parse("x + y", ["x", "y"]), {"x": 1.0})


def test_precedence_and_associativity():
    assert el.evaluate(el.parse("-x^2", ["x"]), {"x": 3.0}) == -9.0
    assert el.evaluate(el.parse("2^3^2", []), {}) == 512.0
    assert el.evaluate(el.parse("2^-2", []), {}) == 0.25
    assert el.evaluate(el.parse("-x*y", ["x", "y"]), {"x": 2.0, "y": 5.0}) == -10.0
    assert el.evaluate(el.parse("1 - 2 - 3", []), {}) == -4.0


def test_power_domain_rules():
    # integer exponents on a negative base are fine
    assert el.evaluate(el.parse("(-2)^3", []), {}) == -8.0
    assert el.evaluate(el.parse("x^2", ["x"]), {"x": -3.0}) == 9.0
    with pytest.raises(DomainError):
        el.evaluate(el.parse("x^0.5", ["x"]), {"x": -1.0})
    with pytest.raises(DomainError):
        el.evaluate(el.parse("x^(-1)", ["x"]), {"x": 0.0})


def test_diff_eval_polynomial():
    assert el.diff_eval(el.parse("x^2", ["x"]), {"x": 3.0}, "x") == (9.0, 6.0)


def test_diff_eval_product_rule():
    value, partial = el.diff_eval(el.parse("x*y", ["x", "y"]),
                                  {"x": 2.0, "y": 5.0}, "y")
    assert (value, partial) == (10.0, 2.0)


def test_diff_eval_chain_rule():
    # hand derivation: d/dx exp(2x) at 1/2 is 2e
    value, partial = el.diff_eval(el.parse("exp(2*x)", ["x"]), {"x": 0.5}, "x")
    assert value == pytest.approx(math.e, rel=1e-15)
    assert partial == pytest.approx(2.0 * math.e, rel=1e-15)


def test_dual_product_rule_exact():
    a = el.Dual(3.0, 2.0)
    b = el.Dual(5.0, 7.0)
    p = a * b
    assert p.partial == a.value * b.partial + a.partial * b.value


def test_diff2_eval():
    v, d1, d2 = el.diff2_eval(el.parse("sin(x)*x", ["x"]), {"x": 0.7}, "x")
    assert v == pytest.approx(0.7 * math.sin(0.7))
    assert d1 == pytest.approx(math.sin(0.7) + 0.7 * math.cos(0.7))
    assert d2 == pytest.approx(2.0 * math.cos(0.7) - 0.7 * math.sin(0.7))


# --- random expression generator -------------------------------------------

FUN1 = ["exp", "log", "sin", "cos", "atan", "sqrt", "abs"]


def random_expr(rng, variables, depth):
    roll = rng.random()
    if depth <= 0 or roll < 0.25:
        if rng.random() < 0.5 and variables:
            return rng.choice(variables)
        return repr(round(rng.uniform(0.2, 3.0), 3))
    if roll < 0.75:
        op = rng.choice(["+", "-", "*", "/"])
        return (f"({random_expr(rng, variables, depth - 1)} {op} "
                f"{random_expr(rng, variables, depth - 1)})")
    if roll < 0.85:
        return (f"({random_expr(rng, variables, depth - 1)})"
                f"^{rng.choice([2, 3])}")
    fn = rng.choice(FUN1)
    return f"{fn}({random_expr(rng, variables, depth - 1)})"


def test_ad_matches_central_differences_1000():
    rng = random.Random(20240817)
    variables = ["x", "y", "z"]
    checked = 0
    while checked < 1000:
        src = random_expr(rng, variables, rng.randint(1, 4))
        expr = el.parse(src, variables)
        env = {v: rng.uniform(0.3, 2.0) for v in variables}
        direction = rng.choice(variables)
        try:
            value, partial = el.diff_eval(expr, env, direction)
        except DomainError:
            continue
        if not (math.isfinite(value) and math.isfinite(partial)):
            continue
        if abs(partial) > 1e5 or abs(value) > 1e6:
            continue
        h = 1e-6
        env_p = dict(env)
        env_m = dict(env)
        env_p[direction] += h
        env_m[direction] -= h
        try:
            fd = (el.evaluate(expr, env_p) - el.evaluate(expr, env_m)) / (2 * h)
        except DomainError:
            continue
        if not math.isfinite(fd):
            continue
        assert abs(partial - fd) <= 1e-6 * (1.0 + abs(partial)), src
        checked += 1
    assert checked == 1000


def test_unparse_round_trip_100_points():
    rng = random.Random(77)
    variables = ["x", "y"]
    for _ in range(60):
        src = random_expr(rng, variables, rng.randint(1, 4))
        expr = el.parse(src, variables)
        back = el.parse(el.unparse(expr), variables)
        for _ in range(100):
            env = {v: rng.uniform(0.2, 2.5) for v in variables}
            try:
                a = el.evaluate(expr, env)
            except DomainError:
                continue
            b = el.evaluate(back, env)
            if math.isnan(a):
                assert math.isnan(b)
            else:
                assert a == b, f"{src!r} vs {el.unparse(expr)!r}"


def test_evaluation_is_pure_bitwise():
    expr = el.parse("sin(x)*exp(y/3) - x^3 + atan2(y, x)", ["x", "y"])
    env = {"x": 1.2345678, "y": -0.87654321}
    first = el.evaluate(expr, env)
    for _ in range(5):
        assert el.evaluate(expr, env) == first
    fn = el.compile_scalar(expr, ["x", "y"])
    assert fn(env["x"], env["y"]) == first


def test_compiled_matches_interpreter():
    rng = random.Random(3)
    variables = ["x", "y"]
    for _ in range(40):
        src = random_expr(rng, variables, 3)
        expr = el.parse(src, variables)
        fn = el.compile_scalar(expr, variables)
        for _ in range(10):
            env = {v: rng.uniform(0.3, 2.0) for v in variables}
            try:
                a = el.evaluate(expr, env)
            except DomainError:
                continue
            b = fn(env["x"], env["y"])
            assert (a == b) or (math.isnan(a) and math.isnan(b))


def test_substitute_and_builders():
    expr = el.parse("C*x + b", ["x", "C", "b"])
    bound = el.substitute(expr, {"C": 2.5, "b": el.parse("x^2", ["x"])})
    assert el.evaluate(bound, {"x": 2.0}) == 2.5 * 2.0 + 4.0
    built = el.add(el.mul(el.num(3), el.var("x")), el.num(1))
    assert el.evaluate(built, {"x": 2.0}) == 7.0


def test_named_constants_fold():
    assert el.evaluate(el.parse("pi", []), {}) == math.pi
    assert el.evaluate(el.parse("e^2", []), {}) == pytest.approx(math.e ** 2)


def test_atan2_two_arguments():
    expr = el.parse("atan2(y, x)", ["x", "y"])
    assert el.evaluate(expr, {"x": -1.0, "y": 0.5}) == math.atan2(0.5, -1.0)
    v, d = el.diff_eval(expr, {"x": 1.0, "y": 1.0}, "y")
    assert d == pytest.approx(0.5)
