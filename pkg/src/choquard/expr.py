"""Scalar arithmetic expressions for exponent fields and domain indicators.

Grammar (lowest to highest binding)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Variables are ``x1..xN`` and ``y1..yN``; ``pi`` is accepted as a literal.
Evaluation is vectorized: bindings may be floats or numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "ExprError",
    "ExprSyntaxError",
    "ExprEvalError",
    "parse_expr",
    "eval_expr",
]

FUNCTIONS = {
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "exp": (1, np.exp),
    "abs": (1, np.abs),
    "sqrt": (1, np.sqrt),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
}
CONSTANTS = {"pi": math.pi}

_VAR_RE = re.compile(r"^([xy])([1-9][0-9]*)$")
_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ExprEvalError(ExprError):
    pass


Value = Union[float, np.ndarray]


class Expr:
    """Immutable AST node."""

    def evaluate(self, env: Mapping[str, Value]) -> Value:
        raise NotImplementedError

    def variables(self) -> frozenset:
        raise NotImplementedError


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def evaluate(self, env):
        return self.value

    def variables(self):
        return frozenset()

    def __str__(self):
        return repr(float(self.value))


@dataclass(frozen=True)
class Var(Expr):
    name: str

    @property
    def kind(self) -> str:
        return self.name[0]

    @property
    def index(self) -> int:
        return int(self.name[1:])

    def evaluate(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise ExprEvalError(f"unbound variable {self.name!r}") from None

    def variables(self):
        return frozenset([self.name])

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr

    def evaluate(self, env):
        return -self.operand.evaluate(env)

    def variables(self):
        return self.operand.variables()

    def __str__(self):
        return f"(-{self.operand})"


_BINOPS = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def evaluate(self, env):
        a = self.left.evaluate(env)
        b = self.right.evaluate(env)
        if self.op == "^":
            # numpy integer-power rules do not apply: keep everything float
            a = np.asarray(a, dtype=float)
        return _BINOPS[self.op](a, b)

    def variables(self):
        return self.left.variables() | self.right.variables()

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Call(Expr):
    name: str
    args: tuple

    def evaluate(self, env):
        _, fn = FUNCTIONS[self.name]
        return fn(*(a.evaluate(env) for a in self.args))

    def variables(self):
        out = frozenset()
        for a in self.args:
            out |= a.variables()
        return out

    def __str__(self):
        return f"{self.name}({', '.join(str(a) for a in self.args)})"


def max_index(e: Expr) -> int:
    """Largest coordinate index referenced by ``e`` (0 if none)."""
    return max((int(v[1:]) for v in e.variables()), default=0)


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = self._tokenize(src)
        self.pos = 0

    @staticmethod
    def _tokenize(src):
        tokens = []
        i = 0
        while True:
            while i < len(src) and src[i].isspace():
                i += 1
            if i >= len(src):
                break
            m = _TOKEN_RE.match(src, i)
            if m is None or m.end() == i:
                raise ExprSyntaxError(f"unexpected character {src[i]!r}", i)
            kind = m.lastgroup
            start = m.start(kind)
            tokens.append((kind, m.group(kind), start))
            i = m.end()
        tokens.append(("end", "", len(src)))
        return tokens

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, text, off = self.take()
        if text != value or kind == "end":
            what = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {what}", off)

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", off)
        return e

    def expr(self):
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                if text not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {text!r}", off)
                self.take()
                args = [self.expr()]
                while self.peek()[:2] == ("op", ","):
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                arity = FUNCTIONS[text][0]
                if len(args) != arity:
                    raise ExprSyntaxError(
                        f"{text} takes {arity} argument(s), got {len(args)}", off
                    )
                return Call(text, tuple(args))
            if text in CONSTANTS:
                return Num(CONSTANTS[text])
            if _VAR_RE.match(text):
                return Var(text)
            if text in FUNCTIONS:
                raise ExprSyntaxError(f"function {text!r} needs arguments", off)
            raise ExprSyntaxError(f"unknown identifier {text!r}", off)
        if (kind, text) == ("op", "("):
            e = self.expr()
            self.expect(")")
            return e
        what = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {what}", off)


def parse_expr(src: str, dim: int | None = None) -> Expr:
    """Parse ``src`` into an :class:`Expr`.

    If ``dim`` is given, variables with index greater than ``dim`` are
    rejected.
    """
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0)
    e = _Parser(src).parse()
    if dim is not None and max_index(e) > dim:
        bad = sorted(v for v in e.variables() if int(v[1:]) > dim)
        raise ExprError(f"variable(s) {', '.join(bad)} exceed dimension N={dim}")
    return e


def eval_expr(e: Expr, point: Mapping[str, Value]) -> Value:
    """Evaluate ``e`` with the given variable bindings.

    Raises :class:`ExprEvalError` on unbound variables or any non-finite
    result (division by zero, root of a negative number, overflow).
    """
    with np.errstate(all="ignore"):
        val = e.evaluate(point)
    arr = np.asarray(val, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ExprEvalError(f"non-finite value evaluating {e}")
    if arr.ndim == 0:
        return float(arr)
    return arr
