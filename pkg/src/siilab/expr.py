"""Coefficient expression language.

Grammar (standard precedence, left associative, parentheses allowed):

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := '-' unary | atom
    atom   := NUMBER | 'x' | 't' | FUNC '(' expr ')' | 'ind' '(' cmp ')' | '(' expr ')'
    cmp    := expr ('>'|'>='|'=='|'<'|'<=') expr

``x`` is the path's left limit at evaluation time and ``t`` the time itself,
so predictability holds by construction.  A leading minus is sugar for
subtraction from zero, keeping the node set minimal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = ("sin", "cos", "tanh", "abs")
COMPARATORS = (">=", "<=", "==", ">", "<")


class ExpressionSyntaxError(ValueError):
    def __init__(self, message, column):
        super().__init__(f"column {column}: {message}")
        self.message = message
        self.column = column


class ExpressionEvalError(RuntimeError):
    """Runtime failure while evaluating a coefficient (e.g. division by zero)."""


# -- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class VarX:
    pass


@dataclass(frozen=True)
class VarT:
    pass


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Func:
    name: str
    arg: object


@dataclass(frozen=True)
class Compare:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Ind:
    comparison: Compare


# -- lexer -------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>>=|<=|==|[-+*/()><]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            col = len(text) - len(stripped) + 1
            raise ExpressionSyntaxError(f"unexpected character {stripped[0]!r}", col)
        col = m.start(m.lastgroup) + 1
        tokens.append((m.lastgroup, m.group(m.lastgroup), col))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


# -- parser ------------------------------------------------------------------

class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, text, col = self.peek()
        if text != value:
            shown = text if kind != "end" else "end of input"
            raise ExpressionSyntaxError(f"expected {value!r}, found {shown}", col)
        return self.advance()

    def parse(self):
        node = self.expr()
        kind, text, col = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected {text!r}", col)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.advance()
            node = self.unary()
            # fold a negated literal so negative numbers print and reparse
            # to the same node; anything else desugars to subtraction
            if isinstance(node, Num):
                return Num(-node.value)
            return BinOp("-", Num(0.0), node)
        return self.atom()

    def atom(self):
        kind, text, col = self.peek()
        if kind == "number":
            self.advance()
            return Num(float(text))
        if kind == "name":
            self.advance()
            if text == "x":
                return VarX()
            if text == "t":
                return VarT()
            if text == "ind":
                self.expect("(")
                cmp = self.comparison()
                self.expect(")")
                return Ind(cmp)
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(text, arg)
            raise ExpressionSyntaxError(f"unknown name {text!r}", col)
        if text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        shown = text if kind != "end" else "end of input"
        raise ExpressionSyntaxError(f"expected a value, found {shown}", col)

    def comparison(self):
        left = self.expr()
        kind, text, col = self.peek()
        if text not in COMPARATORS:
            shown = text if kind != "end" else "end of input"
            raise ExpressionSyntaxError(f"expected a comparison operator, found {shown}", col)
        self.advance()
        right = self.expr()
        return Compare(text, left, right)


def parse_expression(text):
    """Parse source text into an AST; raises ExpressionSyntaxError with column."""
    return _Parser(text).parse()


# -- printer -----------------------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_source(node):
    """Canonical source text; parse(to_source(ast)) == ast."""
    return _print(node, 0)


def _print(node, parent_prec):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, VarX):
        return "x"
    if isinstance(node, VarT):
        return "t"
    if isinstance(node, Func):
        return f"{node.name}({_print(node.arg, 0)})"
    if isinstance(node, Ind):
        c = node.comparison
        return f"ind({_print(c.left, 0)} {c.op} {_print(c.right, 0)})"
    if isinstance(node, BinOp):
        prec = _PRECEDENCE[node.op]
        # the grammar is left associative, so an equal-precedence right child
        # must keep its parentheses to reparse to the same tree
        left = _print(node.left, prec - 1)
        right = _print(node.right, prec)
        text = f"{left} {node.op} {right}"
        return f"({text})" if prec <= parent_prec else text
    raise TypeError(f"not an expression node: {node!r}")


# -- evaluation --------------------------------------------------------------

_BIN_FUNCS = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide}
_CMP_FUNCS = {">": np.greater, ">=": np.greater_equal, "==": np.equal,
              "<": np.less, "<=": np.less_equal}
_CALL_FUNCS = {"sin": np.sin, "cos": np.cos, "tanh": np.tanh, "abs": np.abs}


def compile_expression(node):
    """Compile the AST to a callable (x, t) -> values; vectorized over x."""
    if isinstance(node, Num):
        v = node.value
        return lambda x, t: v
    if isinstance(node, VarX):
        return lambda x, t: x
    if isinstance(node, VarT):
        return lambda x, t: t
    if isinstance(node, BinOp):
        fn = _BIN_FUNCS[node.op]
        lhs = compile_expression(node.left)
        rhs = compile_expression(node.right)
        return lambda x, t: fn(lhs(x, t), rhs(x, t))
    if isinstance(node, Func):
        fn = _CALL_FUNCS[node.name]
        arg = compile_expression(node.arg)
        return lambda x, t: fn(arg(x, t))
    if isinstance(node, Ind):
        cmp = node.comparison
        fn = _CMP_FUNCS[cmp.op]
        lhs = compile_expression(cmp.left)
        rhs = compile_expression(cmp.right)
        return lambda x, t: np.where(fn(lhs(x, t), rhs(x, t)), 1.0, 0.0)
    raise TypeError(f"not an expression node: {node!r}")


def contains_division(node):
    if isinstance(node, BinOp):
        return node.op == "/" or contains_division(node.left) or contains_division(node.right)
    if isinstance(node, Func):
        return contains_division(node.arg)
    if isinstance(node, Ind):
        return contains_division(node.comparison.left) or contains_division(node.comparison.right)
    return False


def evaluate(node_or_fn, x, t, *, guarded=True):
    """Evaluate on a scalar or array state; raises ExpressionEvalError on
    division by zero or non-finite results.

    ``guarded=False`` skips the floating-point trap setup; safe only for
    expressions without division (see ``contains_division``).
    """
    fn = compile_expression(node_or_fn) if not callable(node_or_fn) else node_or_fn
    if guarded:
        try:
            with np.errstate(divide="raise", invalid="raise", over="raise"):
                out = fn(np.asarray(x, dtype=float), t)
        except FloatingPointError as exc:
            raise ExpressionEvalError(f"coefficient evaluation failed: {exc}") from exc
    else:
        out = fn(x, t)
    if np.ndim(x):
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(x)).copy()
    return float(out)
