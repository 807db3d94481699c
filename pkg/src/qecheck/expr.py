"""Scalar coordinate expressions: parsing and exact jet evaluation.

Grammar (EBNF):

    expr     = term { ("+" | "-") term } ;
    term     = unary { ("*" | "/") unary } ;
    unary    = "-" unary | power ;
    power    = atom [ "^" unary ] ;            (* right associative *)
    atom     = NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")" ;
    IDENT    = [a-zA-Z_][a-zA-Z0-9_]* ;
    NUMBER   = decimal literal with optional exponent ;

There is no implicit multiplication.  Function names: sin, cos, tan, exp,
log, sqrt, tanh, sinh, cosh.  A parsed tree is immutable; every identifier
must be one of the declared coordinates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import EvalDomainError, ExprSyntaxError, UnknownSymbolError
from .jets import JA, Jet

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "tanh", "sinh", "cosh")

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[a-zA-Z_][a-zA-Z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True)
class Node:
    pass


@dataclass(frozen=True)
class Const(Node):
    value: float


@dataclass(frozen=True)
class Coord(Node):
    index: int
    name: str


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class BinOp(Node):
    op: str  # one of + - * / ^
    left: Node
    right: Node


@dataclass(frozen=True)
class Call(Node):
    fn: str
    arg: Node


@dataclass(frozen=True)
class ScalarExpr:
    """Immutable parsed expression over a fixed coordinate list."""

    ast: Node
    coords: tuple

    @property
    def nvars(self):
        return len(self.coords)


def _tokenize(src):
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == pos:
            stripped = src[pos:].lstrip()
            if not stripped:
                break
            bad_at = len(src) - len(stripped)
            raise ExprSyntaxError(f"unexpected character {src[bad_at]!r}", src, bad_at)
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group("num")), m.start("num")))
        elif m.lastgroup == "ident":
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", None, len(src)))
    return tokens


class _Parser:
    def __init__(self, src, coords):
        self.src = src
        self.coords = list(coords)
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.next()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected {op!r}", self.src, pos)

    def parse(self):
        node = self.expr()
        kind, _, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError("trailing input", self.src, pos)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                node = BinOp(val, node, self.term())
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                node = BinOp(val, node, self.unary())
            else:
                return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.next()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.next()
        if kind == "num":
            return Const(val)
        if kind == "ident":
            nk, nv, _ = self.peek()
            if nk == "op" and nv == "(":
                if val not in FUNCTIONS:
                    raise UnknownSymbolError(val, self.src, pos)
                self.next()
                arg = self.expr()
                self.expect_op(")")
                return Call(val, arg)
            if val in self.coords:
                return Coord(self.coords.index(val), val)
            raise UnknownSymbolError(val, self.src, pos)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError("expected a value", self.src, pos)


def parse_scalar(src, coords):
    """Parse ``src`` into a ScalarExpr over the named coordinates."""
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", src or "", 0)
    return ScalarExpr(_Parser(src, coords).parse(), tuple(coords))


def _eval_node(node, point, n, order, coord_jets=None):
    if isinstance(node, Const):
        return JA.constant(node.value, n, order)
    if isinstance(node, Coord):
        if coord_jets is not None:
            return coord_jets[node.index]
        return JA.coordinate(node.index, point, n, order)
    if isinstance(node, Neg):
        return -_eval_node(node.arg, point, n, order, coord_jets)
    if isinstance(node, BinOp):
        a = _eval_node(node.left, point, n, order, coord_jets)
        b = _eval_node(node.right, point, n, order, coord_jets)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        # power: integer exponents work for any base, real ones need base > 0
        deriv_part = b.c[..., 1:]
        if deriv_part.size == 0 or not np.any(deriv_part):
            p = float(b.value)
            if p.is_integer():
                return a.ipow(int(p))
            return a.rpow(p)
        return (b * a.log()).exp()
    if isinstance(node, Call):
        a = _eval_node(node.arg, point, n, order, coord_jets)
        return getattr(a, node.fn)()
    raise TypeError(f"unknown node {node!r}")


def eval_ja(expr, point, order):
    """Evaluate to a scalar JA (internal fast path)."""
    point = np.asarray(point, dtype=float)
    n = expr.nvars
    if point.shape != (n,):
        raise EvalDomainError(
            f"point has dimension {point.shape}, expected ({n},)", point
        )
    coord_jets = [JA.coordinate(i, point, n, order) for i in range(n)]
    try:
        return _eval_node(expr.ast, point, n, order, coord_jets)
    except EvalDomainError as err:
        raise EvalDomainError(str(err), point) from None


def eval_jet(expr, point, order):
    """Evaluate ``expr`` at ``point`` carrying all partials up to ``order``."""
    return Jet(eval_ja(expr, point, order))


# -- programmatic constructors (used for conformal rescaling) ------------

def const_expr(value, coords):
    return ScalarExpr(Const(float(value)), tuple(coords))


def scale_metric_entry(g_entry, s_expr):
    """Expression tree for exp(2 s) * g_entry."""
    factor = Call("exp", BinOp("*", Const(2.0), s_expr.ast))
    return ScalarExpr(BinOp("*", factor, g_entry.ast), g_entry.coords)


def scale_density(v_expr, s_expr):
    """Expression tree for exp(s) * v."""
    return ScalarExpr(
        BinOp("*", Call("exp", s_expr.ast), v_expr.ast), v_expr.coords
    )


def negate_expr(e):
    return ScalarExpr(Neg(e.ast), e.coords)
