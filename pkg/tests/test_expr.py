"""Expression language: grammar, round trip, evaluation oracle."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import siilab as s
from siilab.expr import BinOp, Compare, Func, Ind, Num, VarT, VarX


class TestParsing:
    def test_number(self):
        assert s.parse_expression("1") == Num(1.0)
        assert s.parse_expression("2.5e-3") == Num(0.0025)

    def test_variables(self):
        assert s.parse_expression("x") == VarX()
        assert s.parse_expression("t") == VarT()

    def test_indicator_ast(self):
        got = s.parse_expression("2*x + ind(x == 0)")
        want = BinOp("+", BinOp("*", Num(2.0), VarX()),
                     Ind(Compare("==", VarX(), Num(0.0))))
        assert got == want

    def test_sigma_indicator(self):
        got = s.parse_expression("ind(x > 0)")
        assert got == Ind(Compare(">", VarX(), Num(0.0)))

    def test_precedence(self):
        got = s.parse_expression("1 + 2 * 3")
        assert got == BinOp("+", Num(1.0), BinOp("*", Num(2.0), Num(3.0)))
        got = s.parse_expression("(1 + 2) * 3")
        assert got == BinOp("*", BinOp("+", Num(1.0), Num(2.0)), Num(3.0))

    def test_left_associativity(self):
        got = s.parse_expression("8 - 3 - 2")
        assert got == BinOp("-", BinOp("-", Num(8.0), Num(3.0)), Num(2.0))

    def test_functions(self):
        got = s.parse_expression("sin(x) * tanh(t)")
        assert got == BinOp("*", Func("sin", VarX()), Func("tanh", VarT()))

    def test_unary_minus(self):
        assert s.parse_expression("-2") == Num(-2.0)
        assert s.parse_expression("-x") == BinOp("-", Num(0.0), VarX())
        assert s.parse_expression("ind(x > -1)") == Ind(
            Compare(">", VarX(), Num(-1.0)))

    def test_syntax_error_column(self):
        with pytest.raises(s.ExpressionSyntaxError) as err:
            s.parse_expression("ind(x >)")
        assert err.value.column == 8

    def test_unknown_name(self):
        with pytest.raises(s.ExpressionSyntaxError):
            s.parse_expression("foo(x)")

    def test_trailing_garbage(self):
        with pytest.raises(s.ExpressionSyntaxError):
            s.parse_expression("1 + 2 )")

    def test_comparison_only_inside_ind(self):
        with pytest.raises(s.ExpressionSyntaxError):
            s.parse_expression("x > 0")


# -- random AST machinery ------------------------------------------------------

def random_ast(rng, depth=0):
    choices = ["num", "x", "t"]
    if depth < 4:
        choices += ["bin", "bin", "func", "ind"]
    kind = rng.choice(choices)
    if kind == "num":
        return Num(float(np.round(rng.uniform(-5, 5), 3)))
    if kind == "x":
        return VarX()
    if kind == "t":
        return VarT()
    if kind == "func":
        return Func(rng.choice(["sin", "cos", "tanh", "abs"]),
                    random_ast(rng, depth + 1))
    if kind == "ind":
        op = rng.choice([">", ">=", "==", "<", "<="])
        return Ind(Compare(op, random_ast(rng, depth + 1),
                           random_ast(rng, depth + 1)))
    op = rng.choice(["+", "-", "*", "/"])
    return BinOp(op, random_ast(rng, depth + 1), random_ast(rng, depth + 1))


def walk_oracle(node, x, t):
    """Plain recursive evaluation with python scalars."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, VarX):
        return x
    if isinstance(node, VarT):
        return t
    if isinstance(node, Func):
        fn = {"sin": math.sin, "cos": math.cos, "tanh": math.tanh, "abs": abs}[node.name]
        return fn(walk_oracle(node.arg, x, t))
    if isinstance(node, Ind):
        c = node.comparison
        lhs = walk_oracle(c.left, x, t)
        rhs = walk_oracle(c.right, x, t)
        table = {">": lhs > rhs, ">=": lhs >= rhs, "==": lhs == rhs,
                 "<": lhs < rhs, "<=": lhs <= rhs}
        return 1.0 if table[c.op] else 0.0
    lhs = walk_oracle(node.left, x, t)
    rhs = walk_oracle(node.right, x, t)
    if node.op == "+":
        return lhs + rhs
    if node.op == "-":
        return lhs - rhs
    if node.op == "*":
        return lhs * rhs
    return lhs / rhs


class TestRoundTrip:
    def test_canonical_examples(self):
        for text in ["1.0", "x", "2.0 * x + ind(x == 0.0)",
                     "sin(x) / (t + 1.0)", "0.0 - x"]:
            ast = s.parse_expression(text)
            assert s.parse_expression(s.to_source(ast)) == ast

    def test_random_asts(self):
        rng = np.random.default_rng(12345)
        for _ in range(1000):
            ast = random_ast(rng)
            printed = s.to_source(ast)
            assert s.parse_expression(printed) == ast, printed


@st.composite
def ast_strategy(draw, depth=0):
    options = ["num", "x", "t"]
    if depth < 3:
        options += ["bin", "func", "ind"]
    kind = draw(st.sampled_from(options))
    if kind == "num":
        return Num(draw(st.floats(-100, 100, allow_nan=False)))
    if kind == "x":
        return VarX()
    if kind == "t":
        return VarT()
    if kind == "func":
        return Func(draw(st.sampled_from(["sin", "cos", "tanh", "abs"])),
                    draw(ast_strategy(depth=depth + 1)))
    if kind == "ind":
        return Ind(Compare(draw(st.sampled_from([">", ">=", "==", "<", "<="])),
                           draw(ast_strategy(depth=depth + 1)),
                           draw(ast_strategy(depth=depth + 1))))
    return BinOp(draw(st.sampled_from(["+", "-", "*", "/"])),
                 draw(ast_strategy(depth=depth + 1)),
                 draw(ast_strategy(depth=depth + 1)))


class TestRoundTripProperty:
    @settings(max_examples=300, deadline=None)
    @given(ast_strategy())
    def test_parse_print_identity(self, ast):
        assert s.parse_expression(s.to_source(ast)) == ast


class TestEvaluation:
    def test_oracle_agreement(self):
        rng = np.random.default_rng(777)
        n_checked = 0
        for _ in range(1000):
            ast = random_ast(rng)
            compiled = s.compile_expression(ast)
            x = float(np.round(rng.uniform(-3, 3), 4))
            t = float(np.round(rng.uniform(0, 2), 4))
            try:
                want = walk_oracle(ast, x, t)
                ok_oracle = math.isfinite(want)
            except ZeroDivisionError:
                ok_oracle = False
            try:
                got = s.evaluate(compiled, x, t)
                ok_eval = True
            except s.ExpressionEvalError:
                ok_eval = False
            assert ok_eval == ok_oracle, s.to_source(ast)
            if ok_eval:
                assert got == pytest.approx(want, rel=1e-12, abs=1e-12), s.to_source(ast)
                n_checked += 1
        assert n_checked > 500  # most random trees evaluate cleanly

    def test_vectorized_matches_scalar(self):
        ast = s.parse_expression("2 * x + ind(x > 0) * sin(t)")
        compiled = s.compile_expression(ast)
        xs = np.linspace(-2, 2, 9)
        vec = s.evaluate(compiled, xs, 0.7)
        for xi, vi in zip(xs, vec):
            assert vi == pytest.approx(s.evaluate(compiled, float(xi), 0.7))

    def test_division_by_zero_is_runtime_error(self):
        ast = s.parse_expression("1 / x")  # parses fine
        with pytest.raises(s.ExpressionEvalError):
            s.evaluate(ast, 0.0, 0.0)
        assert s.evaluate(ast, 2.0, 0.0) == 0.5

    def test_indicator_is_exact(self):
        ast = s.parse_expression("ind(x == 0)")
        assert s.evaluate(ast, 0.0, 0.0) == 1.0
        assert s.evaluate(ast, 1e-300, 0.0) == 0.0
