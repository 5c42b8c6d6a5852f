import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stopgame.errors import DomainError, ExprSyntaxError, UnknownIdentifier
from stopgame.expr import (Binary, Call, Const, Unary, Var, eval_dual, parse,
                           to_source)


def test_parse_pow_sub_tree():
    ast = parse("x^2 - 1")
    assert isinstance(ast, Binary) and ast.op == "-"
    assert isinstance(ast.lhs, Binary) and ast.lhs.op == "^"
    assert eval_dual(ast, 0.0, 2.0).value == 3.0


def test_parse_exp_product():
    ast = parse("exp(-t)*x")
    assert eval_dual(ast, 0.0, 5.0).value == pytest.approx(5.0)


def test_parse_error_offset():
    with pytest.raises(ExprSyntaxError) as err:
        parse("x +")
    assert err.value.offset == 3


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier):
        parse("x + y")


def test_empty_source():
    with pytest.raises(ExprSyntaxError):
        parse("   ")


def test_call_arity():
    with pytest.raises(ExprSyntaxError):
        parse("min(x)")


def test_eval_dual_square():
    out = eval_dual(parse("x^2"), 0.0, 3.0)
    assert out.value == 9.0 and out.dx == 6.0 and out.dt == 0.0


def test_eval_dual_product_rule():
    out = eval_dual(parse("x*x - 1"), 0.0, 1.0)
    assert out.value == 0.0 and out.dx == 2.0


def test_sqrt_domain_error():
    with pytest.raises(DomainError):
        eval_dual(parse("sqrt(x)"), 0.0, -1.0)


def test_division_by_zero_carries_subexpr():
    with pytest.raises(DomainError) as err:
        eval_dual(parse("1 / (x - 1)"), 0.0, 1.0)
    assert "x - 1" in (err.value.subexpr or "")


def test_pow_integer_exponent_negative_base():
    out = eval_dual(parse("x^3"), 0.0, -2.0)
    assert out.value == -8.0 and out.dx == 12.0


def test_pow_fractional_needs_positive_base():
    with pytest.raises(DomainError):
        eval_dual(parse("x^0.5"), 0.0, -4.0)


def test_min_max_pick_branch_derivative():
    out = eval_dual(parse("min(x, 2*x)"), 0.0, -1.0)
    assert out.value == -2.0 and out.dx == 2.0
    out = eval_dual(parse("max(x, t)"), 3.0, 1.0)
    assert out.value == 3.0 and out.dt == 1.0 and out.dx == 0.0


def test_vectorized_eval():
    xs = np.linspace(0.5, 2.0, 7)
    out = eval_dual(parse("x^2 + t"), 0.25, xs)
    assert np.allclose(out.value, xs**2 + 0.25)
    assert np.allclose(out.dx, 2 * xs)


def test_unary_minus_precedence():
    # -x^2 parses as -(x^2)
    assert eval_dual(parse("-x^2"), 0.0, 3.0).value == -9.0


def test_power_right_associative():
    assert eval_dual(parse("2^3^2"), 0.0, 0.0).value == 512.0


# --- random-expression generator (safe domain) -------------------------------

def _random_ast(rng, depth=0):
    leaf_p = 0.35 + 0.2 * depth
    if rng.random() < leaf_p or depth >= 4:
        choice = rng.integers(0, 3)
        if choice == 0:
            return Const(float(np.round(rng.uniform(0.1, 3.0), 3)))
        return Var("x" if choice == 1 else "t")
    kind = rng.integers(0, 6)
    if kind == 0:
        return Unary("-", _random_ast(rng, depth + 1))
    if kind == 1:
        return Call("exp", (Binary("*", Const(0.3), _random_ast(rng, depth + 1)),))
    if kind == 2:
        # keep log/sqrt arguments positive: 1 + (.)^2
        inner = Binary("+", Const(1.0),
                       Binary("^", _random_ast(rng, depth + 1), Const(2.0)))
        return Call("log" if rng.random() < 0.5 else "sqrt", (inner,))
    if kind == 3:
        return Call("min" if rng.random() < 0.5 else "max",
                    (_random_ast(rng, depth + 1), _random_ast(rng, depth + 1)))
    op = "+-*"[rng.integers(0, 3)]
    return Binary(op, _random_ast(rng, depth + 1), _random_ast(rng, depth + 1))


def test_roundtrip_and_fd_agreement_100_random_expressions():
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 100:
        ast = _random_ast(rng)
        assert parse(to_source(ast)) == ast, to_source(ast)
        t = float(rng.uniform(0.1, 1.0))
        x = float(rng.uniform(0.2, 2.0))
        try:
            out = eval_dual(ast, t, x)
        except DomainError:
            continue
        step = 1e-6 * (1 + abs(x))
        try:
            fd = (eval_dual(ast, t, x + step).value
                  - eval_dual(ast, t, x - step).value) / (2 * step)
        except DomainError:
            continue
        if not (np.isfinite(fd) and np.isfinite(out.dx)):
            continue
        # skip kink points of min/max where the two-sided difference lies
        if abs(fd - out.dx) > 0.5 * (1 + abs(out.dx)):
            continue
        assert abs(out.dx - fd) <= 1e-5 * (1 + abs(out.dx)), to_source(ast)
        checked += 1


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=40))
def test_parsing_is_total(source):
    try:
        parse(source)
    except ExprSyntaxError:
        pass  # located error is the contract; anything else is a bug


@settings(max_examples=150, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.05, 3.0))
def test_dual_arithmetic_chain_rule(t, x):
    out = eval_dual(parse("exp(0.5*x) * (t + x^2)"), t, x)
    exact = math.exp(0.5 * x) * (0.5 * (t + x * x) + 2 * x)
    assert out.dx == pytest.approx(exact, rel=1e-12)
    assert out.dt == pytest.approx(math.exp(0.5 * x), rel=1e-12)
