import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lambrecon.exprparse import (
    Binary,
    Const,
    EvalDomainError,
    ExprSyntaxError,
    NonConstantExponentError,
    Num,
    Unary,
    UnknownIdentifierError,
    Var,
    eval_jet,
    parse,
    to_text,
)

from oracles import fd5_first, fd5_second


class TestParse:
    def test_power_binds_tighter_than_division(self):
        assert parse("x^2/2") == Binary("/", Binary("^", Var(), Num(2.0)), Num(2.0))

    def test_gaussian_argument_shape(self):
        # unary minus sits between ^ and * / in precedence, so the minus
        # captures x^2 and the division applies afterwards
        expected = Unary(
            "exp",
            Binary("/", Unary("neg", Binary("^", Var(), Num(2.0))), Num(2.0)),
        )
        assert parse("exp(-x^2/2)") == expected

    def test_unbalanced_paren_reports_offset(self):
        with pytest.raises(ExprSyntaxError) as err:
            parse("cos(")
        assert err.value.offset == 4
        assert len(err.value.expected) > 0

    def test_empty_input(self):
        with pytest.raises(ExprSyntaxError):
            parse("")
        with pytest.raises(ExprSyntaxError):
            parse("   ")

    def test_unknown_identifier(self):
        with pytest.raises(UnknownIdentifierError):
            parse("y + 1")
        with pytest.raises(UnknownIdentifierError):
            parse("foo(2)")

    def test_no_implicit_multiplication(self):
        with pytest.raises(ExprSyntaxError):
            parse("2x")

    def test_non_constant_exponent_rejected(self):
        with pytest.raises(NonConstantExponentError):
            parse("2^x")
        with pytest.raises(NonConstantExponentError):
            parse("x^(x+1)")
        # parenthesized constant expressions are fine
        parse("x^(1/4)")
        parse("x^-2")

    def test_left_associativity(self):
        assert parse("1-2-3") == Binary("-", Binary("-", Num(1.0), Num(2.0)), Num(3.0))
        assert parse("8/4/2") == Binary("/", Binary("/", Num(8.0), Num(4.0)), Num(2.0))

    def test_power_right_associative(self):
        assert parse("2^3^2") == Binary("^", Num(2.0), Binary("^", Num(3.0), Num(2.0)))
        assert eval_jet(parse("2^3^2"), 0.0).value == 512.0

    def test_unary_minus_precedence(self):
        # -x^2 is -(x^2)
        assert eval_jet(parse("-x^2"), 2.0).value == -4.0
        # but (-x)^2 is 4
        assert eval_jet(parse("(-x)^2"), 2.0).value == 4.0

    def test_named_constants(self):
        assert parse("pi") == Const("pi")
        assert eval_jet(parse("pi"), 0.0).value == math.pi
        assert eval_jet(parse("e"), 0.0).value == math.e

    def test_neg_as_function_name(self):
        assert parse("neg(x)") == parse("-x")

    def test_trailing_garbage(self):
        with pytest.raises(ExprSyntaxError) as err:
            parse("x + 1 )")
        assert err.value.offset == 6


class TestEvalJet:
    def test_polynomial(self):
        j = eval_jet(parse("x^2/2"), 1.3)
        assert j.value == pytest.approx(0.845, abs=1e-15)
        assert j.d1 == pytest.approx(1.3, abs=1e-15)
        assert j.d2 == pytest.approx(1.0, abs=1e-15)

    def test_gaussian_at_zero(self):
        j = eval_jet(parse("exp(-x^2/2)"), 0.0)
        assert j.value == 1.0
        assert j.d1 == 0.0
        assert j.d2 == -1.0

    def test_cosine_against_finite_differences(self):
        # h per derivative order: at h=1e-5 the d2 stencil sits on its
        # rounding floor (~2e-6), so the oracle for d2 uses h=1e-3 instead
        expr = parse("cos(pi*x/2)")
        x = 0.4
        j = eval_jet(expr, x)
        h1 = 1e-5
        vals = [eval_jet(expr, x + k * h1).value for k in (-2, -1, 0, 1, 2)]
        assert abs(j.d1 - fd5_first(vals, h1)) <= 1e-8
        h2 = 1e-3
        vals = [eval_jet(expr, x + k * h2).value for k in (-2, -1, 0, 1, 2)]
        assert abs(j.d2 - fd5_second(vals, h2)) <= 1e-8

    def test_division_rule(self):
        # f = 1/(1+x^2): f' = -2x/(1+x^2)^2, f'' = (6x^2-2)/(1+x^2)^3
        expr = parse("1/(1+x^2)")
        x = 0.7
        d = 1.0 + x * x
        j = eval_jet(expr, x)
        assert j.value == pytest.approx(1 / d, rel=1e-15)
        assert j.d1 == pytest.approx(-2 * x / d**2, rel=1e-14)
        assert j.d2 == pytest.approx((6 * x * x - 2) / d**3, rel=1e-14)

    @pytest.mark.parametrize(
        "source,x",
        [
            ("sqrt(x)", -1.0),
            ("log(x)", 0.0),
            ("log(x)", -2.0),
            ("1/x", 0.0),
            ("x^(1/2)", -4.0),
        ],
    )
    def test_domain_errors(self, source, x):
        with pytest.raises(EvalDomainError) as err:
            eval_jet(parse(source), x)
        lo, hi = err.value.span
        assert 0 <= lo < hi <= len(source)

    def test_deterministic(self):
        expr = parse("exp(sin(x)*cos(x))/(1+x^2)")
        a = eval_jet(expr, 0.8391)
        b = eval_jet(expr, 0.8391)
        assert (a.value, a.d1, a.d2) == (b.value, b.d1, b.d2)

    def test_array_matches_scalar_loop(self):
        expr = parse("exp(-x^2/2)*cos(pi*x/2) + sqrt(x+4)")
        xs = np.linspace(-2.0, 2.0, 37)
        j = eval_jet(expr, xs)
        for i, x in enumerate(xs):
            ji = eval_jet(expr, float(x))
            assert j.value[i] == ji.value
            assert j.d1[i] == ji.d1
            assert j.d2[i] == ji.d2


# --- randomized derivative property -----------------------------------------

_LEAF_FUNCS = ("exp", "sin", "cos", "tan", "neg", "sqrt", "log")
_BIN_OPS = ("+", "-", "*", "/")


def _random_expr(rng: random.Random, depth: int):
    if depth <= 0 or rng.random() < 0.3:
        r = rng.random()
        if r < 0.5:
            return Var()
        if r < 0.85:
            return Num(round(rng.uniform(0.2, 3.0), 4))
        return Const(rng.choice(("pi", "e")))
    if rng.random() < 0.45:
        return Unary(rng.choice(_LEAF_FUNCS), _random_expr(rng, depth - 1))
    if rng.random() < 0.2:
        power = Num(float(rng.choice((2, 3, 0.5, -1, -2))))
        return Binary("^", _random_expr(rng, depth - 1), power)
    return Binary(
        rng.choice(_BIN_OPS),
        _random_expr(rng, depth - 1),
        _random_expr(rng, depth - 1),
    )


def test_random_expressions_match_finite_differences():
    """d1 and d2 agree with 5-point central differences to 1e-7 relative on
    1000 points per expression, wherever the FD oracle itself is converged
    (Richardson self-consistency at h and h/2)."""
    rng = random.Random(20260810)
    tol = 1e-7
    tested = 0
    attempts = 0
    while tested < 25 and attempts < 400:
        attempts += 1
        expr = _random_expr(rng, depth=4)
        pool = np.array([rng.uniform(-3.0, 3.0) for _ in range(6000)])
        h = 1e-2
        offsets = np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) * h
        try:
            jets = eval_jet(expr, pool)
            stencil = eval_jet(expr, pool[:, None] + offsets[None, :]).value
            stencil_half = eval_jet(expr, pool[:, None] + 0.5 * offsets[None, :]).value
        except EvalDomainError:
            continue
        f = stencil[:, 2]
        ok = (
            np.all(np.abs(stencil) < 100.0, axis=1)
            & np.all(np.abs(stencil_half) < 100.0, axis=1)
            & (np.abs(jets.d1) < 100.0)
            & (np.abs(jets.d2) < 100.0)
        )
        d1_h = (stencil[:, 0] - 8 * stencil[:, 1] + 8 * stencil[:, 3] - stencil[:, 4]) / (12 * h)
        d1_h2 = (
            stencil_half[:, 0] - 8 * stencil_half[:, 1] + 8 * stencil_half[:, 3] - stencil_half[:, 4]
        ) / (6 * h)
        d2_h = (
            -stencil[:, 0] + 16 * stencil[:, 1] - 30 * f + 16 * stencil[:, 3] - stencil[:, 4]
        ) / (12 * h * h)
        d2_h2 = (
            -stencil_half[:, 0]
            + 16 * stencil_half[:, 1]
            - 30 * f
            + 16 * stencil_half[:, 3]
            - stencil_half[:, 4]
        ) / (3 * h * h)
        den1 = np.maximum(1.0, np.abs(d1_h2))
        den2 = np.maximum(1.0, np.abs(d2_h2))
        converged = (
            ok
            & (np.abs(d1_h - d1_h2) <= 0.1 * tol * den1)
            & (np.abs(d2_h - d2_h2) <= 0.1 * tol * den2)
        )
        if np.count_nonzero(converged) < 1000:
            continue
        idx = np.flatnonzero(converged)[:1000]
        assert np.all(np.abs(jets.d1[idx] - d1_h2[idx]) <= tol * den1[idx]), to_text(expr)
        assert np.all(np.abs(jets.d2[idx] - d2_h2[idx]) <= tol * den2[idx]), to_text(expr)
        tested += 1
    assert tested == 25


# --- print/parse round trip ---------------------------------------------------

_const_leaf = st.one_of(
    st.floats(min_value=0.001, max_value=1000.0, allow_nan=False).map(Num),
    st.sampled_from(("pi", "e")).map(Const),
)

_const_expr = st.recursive(
    _const_leaf,
    lambda children: st.one_of(
        st.tuples(st.sampled_from(_LEAF_FUNCS), children).map(lambda t: Unary(*t)),
        st.tuples(st.sampled_from(("+", "-", "*", "/", "^")), children, children).map(
            lambda t: Binary(*t)
        ),
    ),
    max_leaves=4,
)

_expr = st.recursive(
    st.one_of(_const_leaf, st.just(Var())),
    lambda children: st.one_of(
        st.tuples(st.sampled_from(_LEAF_FUNCS), children).map(lambda t: Unary(*t)),
        st.tuples(st.sampled_from(_BIN_OPS), children, children).map(lambda t: Binary(*t)),
        st.tuples(children, _const_expr).map(lambda t: Binary("^", *t)),
    ),
    max_leaves=12,
)


@given(_expr)
@settings(max_examples=300, deadline=None)
def test_print_parse_round_trip(expr):
    assert parse(to_text(expr)) == expr


@pytest.mark.parametrize(
    "source",
    [
        "x^2/2",
        "exp(-x^2/2)",
        "cos(pi*x/2)",
        "1/(1+x^2)",
        "2^3^2 - x/3*4",
        "-x^2 - -x",
        "sqrt(x+4)*log(x+5)/tan(1)",
    ],
)
def test_parse_print_parse_idempotent(source):
    ast = parse(source)
    assert parse(to_text(ast)) == ast
