"""Arithmetic expressions for coefficient fields.

Grammar (standard precedence, ``^`` right-associative and binding tighter
than unary minus, so ``-x1^2 == -(x1^2)``)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Names are ``t``, ``x1`` ... ``xd`` and the constant ``pi``; functions are
``sin``, ``cos``, ``exp`` and ``abs``.  Evaluation is vectorised over numpy
arrays.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}
CONSTANTS = {"pi": float(np.pi)}


class ExpressionError(ValueError):
    """Syntax or evaluation error in a coefficient expression."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExpressionError(f"unexpected character {text[pos:].strip()[:1]!r} at column {pos + 1}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, col = self.take()
        if val != value:
            raise ExpressionError(f"expected {value!r} at column {col + 1}, got {val or 'end of input'!r}")

    def parse(self) -> Node:
        node = self.expr()
        kind, val, col = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {val!r} at column {col + 1}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, val, col = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val in CONSTANTS:
                return Num(CONSTANTS[val])
            if val == "t" or re.fullmatch(r"x[1-9]\d*", val):
                return Var(val)
            raise ExpressionError(f"unknown name {val!r} at column {col + 1}")
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionError(f"unexpected {val or 'end of input'!r} at column {col + 1}")


def parse(text: str) -> Node:
    """Parse ``text`` into an expression tree."""
    if not text.strip():
        raise ExpressionError("empty expression")
    return _Parser(text).parse()


def variables(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return variables(node.operand)
    if isinstance(node, Call):
        return variables(node.arg)
    return variables(node.left) | variables(node.right)


def max_space_index(node: Node) -> int:
    """Largest ``d`` such that ``xd`` occurs in the expression (0 if none)."""
    idx = [int(v[1:]) for v in variables(node) if v.startswith("x")]
    return max(idx, default=0)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def to_source(node: Node) -> str:
    """Render ``node`` as text that parses back to an equal tree."""
    if isinstance(node, Num):
        # repr round-trips exactly; negative constants only arise from folding
        text = repr(node.value)
        return f"({text})" if node.value < 0 or text in ("inf", "nan") else text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        if isinstance(node.operand, BinOp) and node.operand.op != "^":
            inner = f"({inner})"
        return f"-{inner}"
    left = to_source(node.left)
    right = to_source(node.right)
    p = _PREC[node.op]
    if _needs_parens(node.left, p, right_side=node.op == "^"):
        left = f"({left})"
    if _needs_parens(node.right, p, right_side=node.op != "^"):
        right = f"({right})"
    return f"{left} {node.op} {right}"


def _needs_parens(child: Node, parent_prec: int, right_side: bool) -> bool:
    if isinstance(child, Neg):
        return parent_prec >= 2
    if not isinstance(child, BinOp):
        return False
    cp = _PREC[child.op]
    return cp < parent_prec or (cp == parent_prec and right_side)


def _point_text(env: Mapping[str, object], mask: np.ndarray) -> str:
    flat = np.flatnonzero(np.broadcast_to(mask, mask.shape).ravel())
    first = int(flat[0]) if flat.size else 0
    parts = []
    for name in sorted(env):
        val = np.asarray(env[name])
        if val.ndim == 0:
            parts.append(f"{name}={float(val):.17g}")
        else:
            parts.append(f"{name}={float(np.broadcast_to(val, mask.shape).ravel()[first]):.17g}")
    return ", ".join(parts)


def evaluate(node: Node, env: Mapping[str, object]):
    """Evaluate ``node`` with variables bound in ``env`` (scalars or arrays).

    Raises ExpressionError on an unbound variable, a division by zero or any
    non-finite intermediate, naming the offending point.
    """
    with np.errstate(all="ignore"):
        return _eval(node, env)


def _check(value, env, what):
    arr = np.asarray(value)
    bad = ~np.isfinite(arr)
    if bad.any():
        raise ExpressionError(f"{what} at point ({_point_text(env, bad)})")
    return value


def _eval(node: Node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise ExpressionError(f"unbound variable {node.name!r}") from None
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, Call):
        arg = _eval(node.arg, env)
        return _check(FUNCTIONS[node.func](arg), env, f"domain error in {node.func}")
    return _apply(node.op, _eval(node.left, env), _eval(node.right, env), env)


class BoundExpression:
    """An expression with its spatial variables fixed to grid coordinates.

    Subtrees that do not involve ``t`` are evaluated once at construction, so
    repeated evaluation at different times only redoes the time-dependent
    part.  Instances are immutable after construction.
    """

    def __init__(self, node: Node, coords: Mapping[str, np.ndarray]):
        self.node = node
        self.shape = np.broadcast_shapes(*(np.shape(c) for c in coords.values())) if coords else ()
        self._coords = dict(coords)
        self.time_dependent = "t" in variables(node)
        self._folded = self._fold(node)

    def _fold(self, node: Node):
        if "t" not in variables(node):
            value = evaluate(node, self._coords)
            return Num(value) if np.ndim(value) == 0 else _Const(np.asarray(value, dtype=float))
        if isinstance(node, Neg):
            return Neg(self._fold(node.operand))
        if isinstance(node, Call):
            return Call(node.func, self._fold(node.arg))
        if isinstance(node, BinOp):
            return BinOp(node.op, self._fold(node.left), self._fold(node.right))
        return node

    def __call__(self, t: float = 0.0) -> np.ndarray:
        env = dict(self._coords)
        env["t"] = float(t)
        with np.errstate(all="ignore"):
            value = _eval_folded(self._folded, env)
        out = np.broadcast_to(np.asarray(value, dtype=float), self.shape)
        return np.array(out)


@dataclass(frozen=True, eq=False)
class _Const:
    value: np.ndarray


def _eval_folded(node, env):
    if isinstance(node, _Const):
        return node.value
    if isinstance(node, (Num, Var)):
        return _eval(node, env)
    if isinstance(node, Neg):
        return -_eval_folded(node.operand, env)
    if isinstance(node, Call):
        arg = _eval_folded(node.arg, env)
        return _check(FUNCTIONS[node.func](arg), env, f"domain error in {node.func}")
    return _apply(node.op, _eval_folded(node.left, env), _eval_folded(node.right, env), env)


def _apply(op, left, right, env):
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if op == "/":
        zero = np.asarray(right) == 0
        if zero.any():
            raise ExpressionError(f"division by zero at point ({_point_text(env, zero)})")
        return _check(left / right, env, "non-finite quotient")
    return _check(np.power(left, right), env, "domain error in ^")
