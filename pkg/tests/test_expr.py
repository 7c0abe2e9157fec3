"""Expression language: grammar, errors, evaluation, round-trip property."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delayvar.errors import (
    DerivativeOrderTooHigh,
    EvaluationDomain,
    ExprSyntaxError,
    UnknownVariable,
)
from delayvar.expr import Bin, Binding, Call, Neg, Num, Var, bind_eval, parse, to_str


def test_power_parses_right_associative():
    ast = parse("qd^2")
    assert ast == Bin("^", Var("qd"), Num(2.0))
    assert parse("q^2^3") == Bin("^", Var("q"), Bin("^", Num(2.0), Num(3.0)))


def test_unary_minus_binds_below_power():
    # -q^2 is -(q^2); q^-2 allows a negated exponent
    assert parse("-q^2") == Neg(Bin("^", Var("q"), Num(2.0)))
    assert parse("q^-2") == Bin("^", Var("q"), Neg(Num(2.0)))


def test_parenthesized_round_trip():
    ast = parse("(qdd + qdd_tau)^2")
    assert parse(to_str(ast)) == ast


def test_syntax_error_offset():
    with pytest.raises(ExprSyntaxError) as err:
        parse("q@2")
    assert err.value.position == 1


def test_no_implicit_multiplication():
    with pytest.raises(ExprSyntaxError):
        parse("2t")


def test_constants_fold():
    assert parse("pi") == Num(math.pi)
    assert math.isclose(bind_eval(parse("cos(pi)"), Binding(1, 1), [0.0] * 5), -1.0)


def test_bind_eval_examples():
    binding = Binding(2, 1)
    # slots: t, q, qd, qdd, q_tau, qd_tau, qdd_tau
    args = [0.0, 0.0, 0.0, -27.0, 0.0, 0.0, 3.0]
    assert bind_eval(parse("(qdd + qdd_tau)^2"), binding, args) == pytest.approx(576.0, abs=1e-12)
    assert bind_eval(parse("qd^2"), Binding(1, 1), [0.0, 0.0, 3.0, 0.0, 0.0]) == 9.0


def test_derivative_order_too_high():
    with pytest.raises(DerivativeOrderTooHigh):
        bind_eval(parse("d3q0"), Binding(2, 1), [0.0] * 7)


def test_unknown_variable():
    with pytest.raises(UnknownVariable):
        bind_eval(parse("zz"), Binding(1, 1), [0.0] * 5)


def test_canonical_names_and_sugar_agree():
    binding = Binding(2, 1)
    args = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    assert bind_eval(parse("d2q0_tau"), binding, args) == bind_eval(parse("qdd_tau"), binding, args)
    assert bind_eval(parse("d0q0"), binding, args) == 1.0


def test_evaluation_domain_error():
    with pytest.raises(EvaluationDomain):
        bind_eval(parse("log(q)"), Binding(1, 1), [0.0, -1.0, 0.0, 0.0, 0.0])
    with pytest.raises(EvaluationDomain):
        bind_eval(parse("1/q"), Binding(1, 1), [0.0, 0.0, 0.0, 0.0, 0.0])


def test_array_evaluation():
    binding = Binding(1, 1)
    args = [np.zeros(3), np.array([1.0, 2.0, 3.0]), np.ones(3), np.zeros(3), np.zeros(3)]
    out = bind_eval(parse("q^2 + qd"), binding, args)
    assert np.allclose(out, [2.0, 5.0, 10.0])


# ---------------------------------------------------------------------------
# random-AST round trip and reference-evaluator agreement

_NAMES = ["t", "q", "qd", "q_tau", "qd_tau"]


def _asts(depth: int):
    leaf = st.one_of(
        st.floats(min_value=0.0, max_value=100.0, allow_nan=False).map(Num),
        st.sampled_from(_NAMES).map(Var),
    )
    if depth == 0:
        return leaf
    sub = _asts(depth - 1)
    return st.one_of(
        leaf,
        sub.map(Neg),
        st.tuples(st.sampled_from("+-*/"), sub, sub).map(lambda t: Bin(*t)),
        st.tuples(st.sampled_from(["sin", "cos", "exp"]), sub).map(lambda t: Call(*t)),
        # keep exponents small integers so evaluation stays finite
        st.tuples(sub, st.integers(min_value=0, max_value=3)).map(
            lambda t: Bin("^", t[0], Num(float(t[1])))),
    )


@settings(max_examples=1000, deadline=None)
@given(_asts(3))
def test_round_trip_property(ast):
    assert parse(to_str(ast)) == ast


def _reference_eval(node, env):
    """Independent recursive evaluator over a name -> value environment."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_reference_eval(node.operand, env)
    if isinstance(node, Call):
        return getattr(math, node.fn if node.fn != "abs" else "fabs")(
            _reference_eval(node.arg, env))
    a = _reference_eval(node.left, env)
    b = _reference_eval(node.right, env)
    return {"+": a + b, "-": a - b, "*": a * b, "/": a / b, "^": a ** b}[node.op]


@settings(max_examples=300, deadline=None)
@given(_asts(3), st.lists(st.floats(min_value=-2.0, max_value=2.0, allow_nan=False),
                          min_size=5, max_size=5))
def test_agrees_with_reference_evaluator(ast, values):
    binding = Binding(1, 1)
    env = dict(zip(_NAMES, values))
    args = [env["t"], env["q"], env["qd"], env["q_tau"], env["qd_tau"]]
    try:
        expected = _reference_eval(ast, env)
    except (ZeroDivisionError, OverflowError, ValueError):
        return
    if not math.isfinite(expected) or abs(expected) > 1e12:
        return
    got = bind_eval(ast, binding, args)
    assert got == pytest.approx(expected, rel=1e-12, abs=1e-12)
