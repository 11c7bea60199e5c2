"""Expression parsing and second-order forward-mode differentiation.

Prefactor shapes enter as text in a single variable ``x``.  ``parse`` builds a
small immutable AST; ``eval_jet`` pushes (value, d1, d2) triples through the
tree, so first and second derivatives are exact up to rounding.  That matters
because the reconstructed potential divides the second derivative by the
prefactor and takes 1/R**4: finite differencing the input would poison
everything downstream.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

__all__ = [
    "Num",
    "Var",
    "Const",
    "Unary",
    "Binary",
    "Expr",
    "Jet2",
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "NonConstantExponentError",
    "EvalDomainError",
    "parse",
    "eval_jet",
    "to_text",
    "contains_var",
    "UNARY_FUNCTIONS",
    "CONSTANTS",
]

UNARY_FUNCTIONS = ("exp", "sin", "cos", "tan", "sqrt", "log", "neg")
CONSTANTS = {"pi": math.pi, "e": math.e}

_NOSPAN = (0, 0)


@dataclass(frozen=True)
class Num:
    value: float
    span: tuple = field(default=_NOSPAN, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    span: tuple = field(default=_NOSPAN, compare=False, repr=False)


@dataclass(frozen=True)
class Const:
    name: str
    span: tuple = field(default=_NOSPAN, compare=False, repr=False)


@dataclass(frozen=True)
class Unary:
    fn: str
    arg: "Expr"
    span: tuple = field(default=_NOSPAN, compare=False, repr=False)


@dataclass(frozen=True)
class Binary:
    op: str
    lhs: "Expr"
    rhs: "Expr"
    span: tuple = field(default=_NOSPAN, compare=False, repr=False)


Expr = Union[Num, Var, Const, Unary, Binary]


@dataclass(frozen=True)
class Jet2:
    """Value plus exact first and second derivative with respect to x."""

    value: float
    d1: float
    d2: float


class ExprError(ValueError):
    """Base class for expression parsing and evaluation failures."""


class ExprSyntaxError(ExprError):
    def __init__(self, offset: int, expected: tuple, found: str):
        self.offset = offset
        self.expected = tuple(expected)
        self.found = found
        super().__init__(
            f"syntax error at offset {offset}: found {found}, "
            f"expected one of: {', '.join(self.expected)}"
        )


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at offset {offset}")


class NonConstantExponentError(ExprError):
    def __init__(self, offset: int):
        self.offset = offset
        super().__init__(
            f"exponent at offset {offset} depends on x; only constant exponents "
            "are supported (rewrite general powers via exp/log)"
        )


class EvalDomainError(ExprError):
    def __init__(self, message: str, span: tuple):
        self.span = span
        super().__init__(f"{message} (expression offsets {span[0]}..{span[1]})")


# --- tokenizer ------------------------------------------------------------

_NUM_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_OPS = "+-*/^()"

_ATOM_EXPECTED = ("a number", "an identifier", "'('", "'-'")


def _tokenize(source: str):
    tokens = []
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        m = _NUM_RE.match(source, i)
        if m:
            tokens.append(("num", m.group(), i))
            i = m.end()
            continue
        m = _IDENT_RE.match(source, i)
        if m:
            tokens.append(("ident", m.group(), i))
            i = m.end()
            continue
        if ch in _OPS:
            tokens.append(("op", ch, i))
            i += 1
            continue
        raise ExprSyntaxError(i, _ATOM_EXPECTED + ("an operator",), repr(ch))
    tokens.append(("end", "", n))
    return tokens


# --- parser ---------------------------------------------------------------

# Precedence: ^ binds tighter than unary minus, which binds tighter than * /,
# which bind tighter than + -.  ^ is right-associative, everything else left.
_BIN_PREC = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_NEG_PREC = 30
_RIGHT_ASSOC = frozenset("^")


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.i = 0
        self.depth = 0

    def peek(self):
        return self.tokens[self.i]

    def _infix_expected(self):
        expected = ("'+'", "'-'", "'*'", "'/'", "'^'")
        if self.depth > 0:
            expected += ("')'",)
        else:
            expected += ("end of input",)
        return expected

    def _found(self, kind: str, text: str) -> str:
        return "end of input" if kind == "end" else repr(text)

    def parse(self) -> Expr:
        expr = self.parse_expr(0)
        kind, text, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(off, self._infix_expected(), self._found(kind, text))
        return expr

    def parse_expr(self, min_prec: int) -> Expr:
        left = self.parse_prefix()
        while True:
            kind, text, off = self.peek()
            if kind != "op" or text not in _BIN_PREC or _BIN_PREC[text] < min_prec:
                return left
            self.i += 1
            next_min = _BIN_PREC[text] + (0 if text in _RIGHT_ASSOC else 1)
            right = self.parse_expr(next_min)
            if text == "^" and contains_var(right):
                raise NonConstantExponentError(right.span[0])
            left = Binary(text, left, right, span=(left.span[0], right.span[1]))

    def parse_prefix(self) -> Expr:
        kind, text, off = self.peek()
        if kind == "op" and text == "-":
            self.i += 1
            arg = self.parse_expr(_NEG_PREC)
            return Unary("neg", arg, span=(off, arg.span[1]))
        return self.parse_atom()

    def parse_atom(self) -> Expr:
        kind, text, off = self.peek()
        if kind == "num":
            self.i += 1
            return Num(float(text), span=(off, off + len(text)))
        if kind == "ident":
            self.i += 1
            nkind, ntext, _ = self.peek()
            if nkind == "op" and ntext == "(":
                if text not in UNARY_FUNCTIONS:
                    raise UnknownIdentifierError(text, off)
                self.i += 1
                self.depth += 1
                arg = self.parse_expr(0)
                end = self._expect_rparen()
                self.depth -= 1
                return Unary(text, arg, span=(off, end))
            if text == "x":
                return Var(span=(off, off + 1))
            if text in CONSTANTS:
                return Const(text, span=(off, off + len(text)))
            raise UnknownIdentifierError(text, off)
        if kind == "op" and text == "(":
            self.i += 1
            self.depth += 1
            inner = self.parse_expr(0)
            self._expect_rparen()
            self.depth -= 1
            return inner
        raise ExprSyntaxError(off, _ATOM_EXPECTED, self._found(kind, text))

    def _expect_rparen(self) -> int:
        kind, text, off = self.peek()
        if kind == "op" and text == ")":
            self.i += 1
            return off + 1
        raise ExprSyntaxError(off, self._infix_expected(), self._found(kind, text))


def parse(source: str) -> Expr:
    """Parse expression text into an AST.

    Grammar: infix with the usual precedence, ``^`` right-associative with a
    constant exponent, function application ``name(expr)``, no implicit
    multiplication.
    """
    if not source or source.isspace():
        raise ExprSyntaxError(0, _ATOM_EXPECTED, "empty input")
    return _Parser(source).parse()


def contains_var(expr: Expr) -> bool:
    if isinstance(expr, Var):
        return True
    if isinstance(expr, Unary):
        return contains_var(expr.arg)
    if isinstance(expr, Binary):
        return contains_var(expr.lhs) or contains_var(expr.rhs)
    return False


# --- pretty printer -------------------------------------------------------


def _prec(node: Expr) -> int:
    if isinstance(node, Binary):
        return _BIN_PREC[node.op]
    if isinstance(node, Unary) and node.fn == "neg":
        return _NEG_PREC
    return 100


def to_text(expr: Expr) -> str:
    """Render an AST back to parseable text; parse(to_text(e)) == e."""
    if isinstance(expr, Num):
        return repr(expr.value)
    if isinstance(expr, Var):
        return "x"
    if isinstance(expr, Const):
        return expr.name
    if isinstance(expr, Unary):
        if expr.fn == "neg":
            inner = to_text(expr.arg)
            if _prec(expr.arg) < _NEG_PREC:
                inner = f"({inner})"
            return "-" + inner
        return f"{expr.fn}({to_text(expr.arg)})"
    p = _BIN_PREC[expr.op]
    left = to_text(expr.lhs)
    lp = _prec(expr.lhs)
    if lp < p or (lp == p and expr.op in _RIGHT_ASSOC):
        left = f"({left})"
    right = to_text(expr.rhs)
    rp = _prec(expr.rhs)
    if rp < p or (rp == p and expr.op not in _RIGHT_ASSOC):
        right = f"({right})"
    return f"{left}{expr.op}{right}"


# --- evaluation -----------------------------------------------------------


def _check_finite(triple, node: Expr, what: str):
    for comp in triple:
        if not np.all(np.isfinite(comp)):
            raise EvalDomainError(f"non-finite result in {what}", node.span)


def _apply_unary(fn: str, u):
    u0, u1, u2 = u
    if fn == "neg":
        return (-u0, -u1, -u2)
    if fn == "exp":
        w = np.exp(u0)
        return (w, w * u1, w * (u1 * u1 + u2))
    if fn == "sin":
        s = np.sin(u0)
        c = np.cos(u0)
        return (s, c * u1, c * u2 - s * u1 * u1)
    if fn == "cos":
        s = np.sin(u0)
        c = np.cos(u0)
        return (c, -s * u1, -s * u2 - c * u1 * u1)
    if fn == "tan":
        t = np.tan(u0)
        w = 1.0 + t * t
        return (t, w * u1, w * (u2 + 2.0 * t * u1 * u1))
    if fn == "sqrt":
        r = np.sqrt(u0)
        return (r, u1 / (2.0 * r), u2 / (2.0 * r) - u1 * u1 / (4.0 * r * r * r))
    if fn == "log":
        g = u1 / u0
        return (np.log(u0), g, u2 / u0 - g * g)
    raise ExprError(f"unsupported function {fn!r}")


def _pow_jet(u, p: float):
    u0, u1, u2 = u
    if p == 0.0:
        return (np.ones_like(u0), np.zeros_like(u0), np.zeros_like(u0))
    if p == 1.0:
        return u
    v = u0 ** p
    g = p * u0 ** (p - 1.0)
    h = p * (p - 1.0) * u0 ** (p - 2.0)
    return (v, g * u1, h * u1 * u1 + g * u2)


def _jet(node: Expr, x):
    if isinstance(node, Num):
        zero = np.float64(0.0)
        out = (np.float64(node.value), zero, zero)
    elif isinstance(node, Var):
        out = (x, np.float64(1.0), np.float64(0.0))
    elif isinstance(node, Const):
        zero = np.float64(0.0)
        out = (np.float64(CONSTANTS[node.name]), zero, zero)
    elif isinstance(node, Unary):
        out = _apply_unary(node.fn, _jet(node.arg, x))
        _check_finite(out, node, f"{node.fn}(...)")
        return out
    elif isinstance(node, Binary):
        a = _jet(node.lhs, x)
        if node.op == "^":
            # parse() guarantees the exponent subtree is x-free
            p = float(_jet(node.rhs, x)[0])
            out = _pow_jet(a, p)
        else:
            b = _jet(node.rhs, x)
            if node.op == "+":
                out = (a[0] + b[0], a[1] + b[1], a[2] + b[2])
            elif node.op == "-":
                out = (a[0] - b[0], a[1] - b[1], a[2] - b[2])
            elif node.op == "*":
                out = (
                    a[0] * b[0],
                    a[1] * b[0] + a[0] * b[1],
                    a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2],
                )
            else:  # "/"
                q0 = a[0] / b[0]
                q1 = (a[1] - q0 * b[1]) / b[0]
                q2 = (a[2] - 2.0 * q1 * b[1] - q0 * b[2]) / b[0]
                out = (q0, q1, q2)
        _check_finite(out, node, f"operator {node.op!r}")
        return out
    else:
        raise ExprError(f"unsupported node {node!r}")
    _check_finite(out, node, type(node).__name__)
    return out


def eval_jet(expr: Expr, x) -> Jet2:
    """Evaluate (f, f', f'') at x; x may be a float or an ndarray.

    Deterministic: identical inputs give bit-identical outputs.  Raises
    EvalDomainError with the offending node's source span on sqrt/log of a
    negative number, division by zero, or any other non-finite intermediate.
    """
    if isinstance(x, np.ndarray):
        xv = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            v, d1, d2 = _jet(expr, xv)
        full = tuple(
            np.ascontiguousarray(np.broadcast_to(np.asarray(t, dtype=float), xv.shape))
            for t in (v, d1, d2)
        )
        return Jet2(*full)
    with np.errstate(all="ignore"):
        v, d1, d2 = _jet(expr, np.float64(x))
    return Jet2(float(v), float(d1), float(d2))
