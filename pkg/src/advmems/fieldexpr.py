"""Closed-form coefficient expressions.

Grammar (``^`` binds tighter than unary minus, which binds tighter than
``*`` and ``/``)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Exponents must be free of variables.  Expressions evaluate on scalars or on
numpy arrays of nodal coordinates.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
}
CONSTANTS = {"pi": math.pi}
VARIABLES = ("x", "y", "r")

LEGAL_VARIABLES = {
    "interval": {"x", "r"},
    "radial": {"r"},
    "rectangle": {"x", "y"},
}


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, column: int):
        super().__init__(f"{message} at column {column}")
        self.column = column


class UnknownIdentifierError(ExprSyntaxError):
    pass


class EvaluationError(ExprError):
    def __init__(self, message: str, node: "Expr"):
        super().__init__(f"{message} in {to_string(node)}")
        self.node = node


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[col - 1]!r}", col)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, col = self.take()
        if val != value:
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", col)

    def parse(self) -> Expr:
        node = self.expr()
        kind, val, col = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", col)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            col = self.take()[2]
            exponent = self.unary()
            if variables(exponent):
                raise ExprSyntaxError("exponent must be constant", col + 1)
            return BinOp("^", base, exponent)
        return base

    def atom(self) -> Expr:
        kind, val, col = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if self.peek()[:2] == ("op", "("):
                raise UnknownIdentifierError(f"unknown function {val!r}", col)
            if val in CONSTANTS or val in VARIABLES:
                return Var(val)
            raise UnknownIdentifierError(f"unknown identifier {val!r}", col)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", col)


def parse_expression(text: str) -> Expr:
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 1)
    return _Parser(text).parse()


def variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return set() if e.name in CONSTANTS else {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Neg):
        return variables(e.operand)
    if isinstance(e, Call):
        return variables(e.arg)
    return variables(e.left) | variables(e.right)


def check_variables(e: Expr, kind: str) -> None:
    """Raise if ``e`` uses a coordinate that does not exist on ``kind`` grids."""
    bad = variables(e) - LEGAL_VARIABLES[kind]
    if bad:
        raise ExprError(f"variable(s) {sorted(bad)} not allowed on {kind} grids")


def to_string(e: Expr) -> str:
    """Fully parenthesised text that parses back to the same tree."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_string(e.operand)})"
    if isinstance(e, Call):
        return f"{e.func}({to_string(e.arg)})"
    return f"({to_string(e.left)} {e.op} {to_string(e.right)})"


def evaluate(e: Expr, point: Mapping[str, object]):
    """Evaluate at a point (scalars) or at many points (equal-length arrays)."""
    with np.errstate(all="ignore"):
        out = _eval(e, point)
    if np.ndim(out) == 0:
        return float(out)
    return np.asarray(out, dtype=float)


def _finite(val, node):
    if not np.all(np.isfinite(val)):
        raise EvaluationError("non-finite value", node)
    return val


def _eval(e: Expr, pt):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        if e.name in CONSTANTS:
            return CONSTANTS[e.name]
        if e.name not in pt:
            raise EvaluationError(f"missing variable {e.name!r}", e)
        return np.asarray(pt[e.name], dtype=float) if np.ndim(pt[e.name]) else float(pt[e.name])
    if isinstance(e, Neg):
        return -_eval(e.operand, pt)
    if isinstance(e, Call):
        arg = _eval(e.arg, pt)
        if e.func == "log" and np.any(np.asarray(arg) <= 0):
            raise EvaluationError("log of non-positive value", e)
        if e.func == "sqrt" and np.any(np.asarray(arg) < 0):
            raise EvaluationError("sqrt of negative value", e)
        return _finite(FUNCTIONS[e.func](arg), e)
    a = _eval(e.left, pt)
    b = _eval(e.right, pt)
    if e.op == "+":
        return _finite(a + b, e)
    if e.op == "-":
        return _finite(a - b, e)
    if e.op == "*":
        return _finite(a * b, e)
    if e.op == "/":
        if np.any(np.asarray(b) == 0):
            raise EvaluationError("division by zero", e)
        return _finite(a / b, e)
    return _finite(np.power(a, b), e)


def sample_scalar(g, text: str):
    """Parse ``text`` and sample it as a Field on grid ``g``."""
    from .grid import Field

    e = parse_expression(text)
    check_variables(e, g.kind)
    vals = np.broadcast_to(evaluate(e, g.coords()), (g.size,))
    return Field(g, vals.copy())


def sample_vector(g, components):
    """One expression per component; a bare string is accepted for 1-component grids."""
    from .grid import VectorField

    if isinstance(components, str):
        components = [components]
    components = list(components)
    if len(components) != g.ncomp:
        raise ExprError(f"{g.kind} grids take {g.ncomp} advection component(s), got {len(components)}")
    cols = []
    for text in components:
        e = parse_expression(text)
        check_variables(e, g.kind)
        cols.append(np.broadcast_to(evaluate(e, g.coords()), (g.size,)))
    return VectorField(g, np.stack(cols, axis=1))
