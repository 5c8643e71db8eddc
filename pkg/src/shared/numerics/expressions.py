"""
Tiny arithmetic expression grammar used by problem documents (version 1).

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | atom
    atom    := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"

Names are coordinates x1..xq, momenta p1..pq, and the constants pi and e. Functions:
exp, log, tanh, sqrt, abs, sign (one argument) and min, max, pow (two arguments).
Binary operators are left-associative and evaluated in IEEE double precision in parse
order. Evaluation accepts scalars or numpy arrays (elementwise). Parentheses, calls and
unary minus nest at most MAX_NESTING deep; the parsed tree is at most MAX_TREE_DEPTH deep.
"""

from __future__ import annotations

import math
import re
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any, Union

import numpy as np

from shared.numerics.errors import ExpressionError

GRAMMAR_VERSION = 1
MAX_NESTING = 50
MAX_TREE_DEPTH = 200

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/(),]))"
)
_VARIABLE = re.compile(r"^[xp][1-9][0-9]*$")
_CONSTANTS = {"pi": math.pi, "e": math.e}
_UNARY = {
    "exp": np.exp,
    "log": np.log,
    "tanh": np.tanh,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sign": np.sign,
}
_BINARY = {"min": np.minimum, "max": np.maximum, "pow": np.power}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: Node


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple[Node, ...]


Node = Union[Num, Var, Neg, BinOp, Call]


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens: list[tuple[str, str]] = []
    pos = 0
    stripped = text.rstrip()
    while pos < len(stripped):
        match = _TOKEN.match(stripped, pos)
        if match is None or match.end() == pos:
            raise ExpressionError(f"unexpected character at {pos} in {text!r}")
        kind = match.lastgroup or ""
        tokens.append((kind, match.group(kind)))
        pos = match.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.depth = 0

    def _peek(self) -> tuple[str, str] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _take(self, expected: str | None = None) -> tuple[str, str]:
        token = self._peek()
        if token is None:
            raise ExpressionError(f"unexpected end of expression {self.text!r}")
        if expected is not None and token[1] != expected:
            raise ExpressionError(f"expected {expected!r} but found {token[1]!r} in {self.text!r}")
        self.pos += 1
        return token

    def parse(self) -> Node:
        node = self._expr()
        if self._peek() is not None:
            raise ExpressionError(f"trailing input {self._peek()[1]!r} in {self.text!r}")
        return node

    def _expr(self) -> Node:
        node = self._term()
        while (tok := self._peek()) is not None and tok[1] in "+-" and tok[0] == "op":
            self._take()
            node = BinOp(tok[1], node, self._term())
        return node

    def _term(self) -> Node:
        node = self._unary()
        while (tok := self._peek()) is not None and tok[1] in "*/" and tok[0] == "op":
            self._take()
            node = BinOp(tok[1], node, self._unary())
        return node

    def _unary(self) -> Node:
        # every recursive path of the grammar passes through here
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise ExpressionError(f"expression nests deeper than {MAX_NESTING} levels")
        try:
            tok = self._peek()
            if tok is not None and tok == ("op", "-"):
                self._take()
                return Neg(self._unary())
            return self._atom()
        finally:
            self.depth -= 1

    def _atom(self) -> Node:
        kind, text = self._take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            nxt = self._peek()
            if nxt == ("op", "("):
                self._take("(")
                args = [self._expr()]
                while self._peek() == ("op", ","):
                    self._take(",")
                    args.append(self._expr())
                self._take(")")
                arity = 1 if text in _UNARY else 2 if text in _BINARY else None
                if arity is None:
                    raise ExpressionError(f"unknown function {text!r} in {self.text!r}")
                if len(args) != arity:
                    raise ExpressionError(f"{text} takes {arity} argument(s), got {len(args)}")
                return Call(text, tuple(args))
            if text in _CONSTANTS:
                return Num(_CONSTANTS[text])
            if _VARIABLE.match(text):
                return Var(text)
            raise ExpressionError(f"unknown name {text!r} in {self.text!r}")
        if text == "(":
            node = self._expr()
            self._take(")")
            return node
        raise ExpressionError(f"unexpected token {text!r} in {self.text!r}")


def _children(node: Node) -> tuple[Node, ...]:
    if isinstance(node, Neg):
        return (node.operand,)
    if isinstance(node, BinOp):
        return (node.left, node.right)
    if isinstance(node, Call):
        return node.args
    return ()


def _tree_depth(node: Node) -> int:
    deepest, stack = 0, [(node, 1)]
    while stack:
        current, level = stack.pop()
        deepest = max(deepest, level)
        stack.extend((child, level + 1) for child in _children(current))
    return deepest


def _variables(node: Node) -> frozenset[str]:
    if isinstance(node, Var):
        return frozenset({node.name})
    if isinstance(node, Neg):
        return _variables(node.operand)
    if isinstance(node, BinOp):
        return _variables(node.left) | _variables(node.right)
    if isinstance(node, Call):
        return frozenset().union(*(_variables(a) for a in node.args))
    return frozenset()


def _evaluate(node: Node, env: Mapping[str, Any]) -> Any:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise ExpressionError(f"variable {node.name} is not bound") from None
    if isinstance(node, Neg):
        return -_evaluate(node.operand, env)
    if isinstance(node, BinOp):
        left, right = _evaluate(node.left, env), _evaluate(node.right, env)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        return np.divide(left, right)
    args = [_evaluate(a, env) for a in node.args]
    func = _UNARY.get(node.func) or _BINARY[node.func]
    return func(*args)


@dataclass(frozen=True)
class Expression:
    text: str
    tree: Node
    variables: frozenset[str]

    @classmethod
    def parse(cls, text: str | float | int) -> Expression:
        if isinstance(text, (int, float)):
            text = repr(float(text))
        tree = _Parser(str(text)).parse()
        if _tree_depth(tree) > MAX_TREE_DEPTH:
            raise ExpressionError(f"expression tree is deeper than {MAX_TREE_DEPTH} levels")
        return cls(text=str(text), tree=tree, variables=_variables(tree))

    @property
    def is_zero(self) -> bool:
        return isinstance(self.tree, Num) and self.tree.value == 0.0

    @property
    def max_index(self) -> int:
        return max((int(v[1:]) for v in self.variables), default=0)

    def evaluate(self, env: Mapping[str, Any]) -> Any:
        with np.errstate(all="ignore"):
            return _evaluate(self.tree, env)

    def at_point(self, x: Any, p: Any | None = None) -> float:
        """
        Scalar evaluation with x1..xq (and optionally p1..pq) bound from vectors.
        """

        env = coordinate_env(x, "x")
        if p is not None:
            env.update(coordinate_env(p, "p"))
        value = float(self.evaluate(env))
        if not math.isfinite(value):
            raise ExpressionError(f"{self.text!r} is not finite at x={np.asarray(x).tolist()}")
        return value

    def at_points(self, points: Any, prefix: str = "x") -> np.ndarray:
        """
        Vectorized evaluation over the rows of an (n, q) array.
        """

        pts = np.asarray(points, dtype=np.float64)
        env = {f"{prefix}{i + 1}": pts[:, i] for i in range(pts.shape[1])}
        out = np.broadcast_to(np.asarray(self.evaluate(env), dtype=np.float64), (len(pts),))
        return np.array(out)


def coordinate_env(vector: Any, prefix: str) -> dict[str, float]:
    values = np.atleast_1d(np.asarray(vector, dtype=np.float64))
    return {f"{prefix}{i + 1}": float(values[i]) for i in range(values.size)}


def parse_all(texts: list[str | float | int]) -> tuple[Expression, ...]:
    return tuple(Expression.parse(t) for t in texts)


def check_dimension(expressions: tuple[Expression, ...], dim: int) -> None:
    for expr in expressions:
        if expr.max_index > dim:
            raise ExpressionError(f"{expr.text!r} references a coordinate beyond dimension {dim}")
