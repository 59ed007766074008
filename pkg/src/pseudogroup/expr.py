"""
Expressions in one variable `x`.

Grammar (see docs/expr-grammar.md)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" exponent)?
    atom    := number | "x" | ("exp" | "log") "(" expr ")" | "(" expr ")"

Exponents are integers. Expressions are immutable trees; `differentiate` returns a new tree
with constants folded, `compile_scalar` / `compile_vector` turn a tree into a plain callable.
"""
import logging
import math
import re
from dataclasses import dataclass
from functools import lru_cache, singledispatch

import numpy as np
from typing_extensions import Callable, ClassVar, List, Optional, Tuple, Union, TypeAlias

from .errors import DomainError, ParseError

logger = logging.getLogger(__name__)

ScalarFunction: TypeAlias = Callable[[float], float]
VectorFunction: TypeAlias = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Node:
    precedence: ClassVar[int] = 5

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class Const(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    pass


@dataclass(frozen=True)
class Neg(Node):
    precedence: ClassVar[int] = 3
    arg: Node


@dataclass(frozen=True)
class _Binary(Node):
    symbol: ClassVar[str]
    left: Node
    right: Node


@dataclass(frozen=True)
class Add(_Binary):
    precedence: ClassVar[int] = 1
    symbol: ClassVar[str] = "+"


@dataclass(frozen=True)
class Sub(_Binary):
    precedence: ClassVar[int] = 1
    symbol: ClassVar[str] = "-"


@dataclass(frozen=True)
class Mul(_Binary):
    precedence: ClassVar[int] = 2
    symbol: ClassVar[str] = "*"


@dataclass(frozen=True)
class Div(_Binary):
    precedence: ClassVar[int] = 2
    symbol: ClassVar[str] = "/"


@dataclass(frozen=True)
class Pow(Node):
    precedence: ClassVar[int] = 4
    base: Node
    exponent: int


@dataclass(frozen=True)
class Exp(Node):
    arg: Node


@dataclass(frozen=True)
class Log(Node):
    arg: Node


Expression: TypeAlias = Node

ZERO = Const(0.0)
ONE = Const(1.0)

_FUNCTIONS = {"exp": Exp, "log": Log}


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>\*\*|[-+*/^()]))")
_INTEGER = re.compile(r"\d+")

_Token = Tuple[str, str, int]


def _tokenize(text: str) -> List[_Token]:
    tokens: List[_Token] = []
    pos = 0
    while pos < len(text):
        if text[pos:].isspace():
            break
        match = _TOKEN.match(text, pos)
        if match is None:
            offset = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(text, offset, "a number, 'x', a function name, an operator or a parenthesis")
        kind = match.lastgroup
        value = match.group(kind)
        tokens.append((kind, "^" if value == "**" else value, match.start(kind)))
        pos = match.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token|None:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos]
        return None

    def offset(self) -> int:
        token = self.peek()
        return len(self.text) if token is None else token[2]

    def accept(self, op: str) -> bool:
        token = self.peek()
        if token is not None and token[0] == "op" and token[1] == op:
            self.pos += 1
            return True
        return False

    def expect(self, op: str):
        if not self.accept(op):
            raise ParseError(self.text, self.offset(), repr(op))

    def parse(self) -> Node:
        node = self.expr()
        if self.peek() is not None:
            raise ParseError(self.text, self.offset(), "an operator or end of input")
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            if self.accept("+"):
                node = Add(node, self.term())
            elif self.accept("-"):
                node = Sub(node, self.term())
            else:
                return node

    def term(self) -> Node:
        node = self.unary()
        while True:
            if self.accept("*"):
                node = Mul(node, self.unary())
            elif self.accept("/"):
                node = Div(node, self.unary())
            else:
                return node

    def unary(self) -> Node:
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        node = self.atom()
        if self.accept("^"):
            return Pow(node, self.exponent())
        return node

    def exponent(self) -> int:
        parenthesized = self.accept("(")
        sign = 1
        if self.accept("-"):
            sign = -1
        elif self.accept("+"):
            pass
        token = self.peek()
        if token is None or token[0] != "number" or not _INTEGER.fullmatch(token[1]):
            raise ParseError(self.text, self.offset(), "an integer exponent")
        self.pos += 1
        if parenthesized:
            self.expect(")")
        return sign * int(token[1])

    def atom(self) -> Node:
        token = self.peek()
        expected = "a number, 'x', a function call or '('"
        if token is None:
            raise ParseError(self.text, len(self.text), expected)
        kind, value, offset = token
        if kind == "number":
            self.pos += 1
            number = float(value)
            if not math.isfinite(number):
                raise ParseError(self.text, offset, "a finite number")
            return Const(number)
        if kind == "name":
            if value == "x":
                self.pos += 1
                return Var()
            if value in _FUNCTIONS:
                self.pos += 1
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return _FUNCTIONS[value](arg)
            raise ParseError(self.text, offset, f"'x', 'exp' or 'log' (got {value!r})")
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(self.text, offset, expected)


def parse(text: str) -> Node:
    return _Parser(text).parse()


# ---------------------------------------------------------------- printing

def _precedence(node: Node) -> int:
    if isinstance(node, Const) and (node.value < 0 or math.copysign(1.0, node.value) < 0):
        return Neg.precedence
    return node.precedence


def _wrap(node: Node, below: int) -> str:
    text = to_text(node)
    if _precedence(node) < below:
        return f"({text})"
    return text


@singledispatch
def to_text(node: Node) -> str:
    raise TypeError(f"Cannot print {node!r}")


@to_text.register
def _(node: Const) -> str:
    return repr(node.value)


@to_text.register
def _(node: Var) -> str:
    return "x"


@to_text.register
def _(node: Neg) -> str:
    return "-" + _wrap(node.arg, Neg.precedence)


@to_text.register
def _(node: _Binary) -> str:
    # operators are left associative: an equal-precedence right operand keeps its parentheses
    return f"{_wrap(node.left, node.precedence)} {node.symbol} {_wrap(node.right, node.precedence + 1)}"


@to_text.register
def _(node: Pow) -> str:
    return f"{_wrap(node.base, Node.precedence)}^{node.exponent}"


@to_text.register
def _(node: Exp) -> str:
    return f"exp({to_text(node.arg)})"


@to_text.register
def _(node: Log) -> str:
    return f"log({to_text(node.arg)})"


# ---------------------------------------------------------------- evaluation

@singledispatch
def _source(node: Node) -> str:
    raise TypeError(f"Cannot compile {node!r}")


@_source.register
def _(node: Const) -> str:
    return f"({node.value!r})"


@_source.register
def _(node: Var) -> str:
    return "x"


@_source.register
def _(node: Neg) -> str:
    return f"(-{_source(node.arg)})"


@_source.register
def _(node: _Binary) -> str:
    return f"({_source(node.left)} {node.symbol} {_source(node.right)})"


@_source.register
def _(node: Pow) -> str:
    return f"({_source(node.base)} ** {node.exponent})"


@_source.register
def _(node: Exp) -> str:
    return f"exp({_source(node.arg)})"


@_source.register
def _(node: Log) -> str:
    return f"log({_source(node.arg)})"


def _lambda(node: Node, namespace: dict) -> Callable:
    # the source is generated from the tree only, never from user text
    code = compile(f"lambda x: {_source(node)}", "<expression>", "eval")
    return eval(code, {"__builtins__": {}, **namespace})


@lru_cache(maxsize=1024)
def compile_scalar(node: Node) -> ScalarFunction:
    """Return `f(x) -> float` raising `DomainError` where the expression is undefined."""
    raw = _lambda(node, {"exp": math.exp, "log": math.log})

    def function(x: float) -> float:
        try:
            return float(raw(float(x)))
        except ZeroDivisionError:
            raise DomainError("division by zero", x) from None
        except ValueError:
            raise DomainError("logarithm of a non-positive number", x) from None
        except OverflowError:
            raise DomainError("overflow", x) from None

    return function


@lru_cache(maxsize=1024)
def compile_vector(node: Node) -> VectorFunction:
    """Return `f(xs) -> ndarray` with NaN wherever the expression is undefined."""
    raw = _lambda(node, {"exp": np.exp, "log": np.log})

    def function(xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        with np.errstate(all="ignore"):
            values = np.asarray(raw(xs), dtype=float) + np.zeros_like(xs)
        values[~np.isfinite(values)] = np.nan
        return values

    return function


def evaluate(e: Expression, x: float) -> float:
    return compile_scalar(e)(x)


def evaluate_many(e: Expression, xs: Union[np.ndarray, List[float]]) -> np.ndarray:
    return compile_vector(e)(np.asarray(xs, dtype=float))


# ---------------------------------------------------------------- derivatives

def _constant(value: float) -> Node:
    # a negative value becomes Neg(Const), the shape parse gives it
    if value < 0:
        return Neg(Const(-value))
    return Const(abs(value))


def _value(node: Node) -> Optional[float]:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Neg) and isinstance(node.arg, Const):
        return -node.arg.value
    return None


def _fold(value: float, fallback: Node) -> Node:
    return _constant(value) if math.isfinite(value) else fallback


def _add(a: Node, b: Node) -> Node:
    va, vb = _value(a), _value(b)
    if va is not None and vb is not None:
        return _fold(va + vb, Add(a, b))
    if va == 0:
        return b
    if vb == 0:
        return a
    return Add(a, b)


def _sub(a: Node, b: Node) -> Node:
    va, vb = _value(a), _value(b)
    if va is not None and vb is not None:
        return _fold(va - vb, Sub(a, b))
    if vb == 0:
        return a
    if va == 0:
        return _neg(b)
    return Sub(a, b)


def _mul(a: Node, b: Node) -> Node:
    va, vb = _value(a), _value(b)
    if va is not None and vb is not None:
        return _fold(va * vb, Mul(a, b))
    if va == 0 or vb == 0:
        return ZERO
    if va == 1:
        return b
    if vb == 1:
        return a
    return Mul(a, b)


def _div(a: Node, b: Node) -> Node:
    va, vb = _value(a), _value(b)
    if va is not None and vb is not None and vb != 0:
        return _fold(va / vb, Div(a, b))
    if va == 0:
        return ZERO
    if vb == 1:
        return a
    return Div(a, b)


def _neg(a: Node) -> Node:
    value = _value(a)
    if value is not None:
        return _constant(-value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _pow(base: Node, exponent: int) -> Node:
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    value = _value(base)
    if value is not None and (value != 0 or exponent > 0):
        try:
            return _fold(value ** exponent, Pow(base, exponent))
        except OverflowError:
            pass
    return Pow(base, exponent)


@singledispatch
def differentiate(e: Node) -> Node:
    raise TypeError(f"Cannot differentiate {e!r}")


@differentiate.register
def _(e: Const) -> Node:
    return ZERO


@differentiate.register
def _(e: Var) -> Node:
    return ONE


@differentiate.register
def _(e: Neg) -> Node:
    return _neg(differentiate(e.arg))


@differentiate.register
def _(e: Add) -> Node:
    return _add(differentiate(e.left), differentiate(e.right))


@differentiate.register
def _(e: Sub) -> Node:
    return _sub(differentiate(e.left), differentiate(e.right))


@differentiate.register
def _(e: Mul) -> Node:
    return _add(_mul(differentiate(e.left), e.right), _mul(e.left, differentiate(e.right)))


@differentiate.register
def _(e: Div) -> Node:
    numerator = _sub(_mul(differentiate(e.left), e.right), _mul(e.left, differentiate(e.right)))
    return _div(numerator, _pow(e.right, 2))


@differentiate.register
def _(e: Pow) -> Node:
    outer = _mul(_constant(float(e.exponent)), _pow(e.base, e.exponent - 1))
    return _mul(outer, differentiate(e.base))


@differentiate.register
def _(e: Exp) -> Node:
    return _mul(e, differentiate(e.arg))


@differentiate.register
def _(e: Log) -> Node:
    return _div(differentiate(e.arg), e.arg)
