"""Expression trees for real functions of t on [0, oo).

A minimal infix calculator grammar (no implicit multiplication), parsed by
recursive descent::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := NUMBER | 't' | NAME '(' expr ')' | '(' expr ')'

Binary operators of equal precedence associate to the left; '^' binds
tighter than unary minus and associates to the right.  The only variable
is ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

UNARY_OPS = ("neg", "exp", "log", "sin", "cos", "sqrt", "abs", "sign")
BINARY_OPS = ("add", "sub", "mul", "div", "pow")

_FUNC_NAMES = {"exp", "log", "sin", "cos", "sqrt", "abs", "sign"}


class ExprSyntaxError(ValueError):
    """Raised when an expression string cannot be parsed.

    ``offset`` is the byte offset of the offending character.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EvalDomainError(ArithmeticError):
    """Raised when evaluation leaves the real domain (log of a non-positive
    number, square root of a negative, division by zero)."""

    def __init__(self, message: str, node: "Node", t: float):
        super().__init__(f"{message} in '{node}' at t={t!r}")
        self.node = node
        self.t = t


@dataclass(frozen=True)
class Num:
    value: float

    def __str__(self) -> str:
        return _render(self, 0)


@dataclass(frozen=True)
class Var:
    def __str__(self) -> str:
        return "t"


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "Node"

    def __str__(self) -> str:
        return _render(self, 0)


@dataclass(frozen=True)
class Binary:
    op: str
    lhs: "Node"
    rhs: "Node"

    def __str__(self) -> str:
        return _render(self, 0)


Node = Union[Num, Var, Unary, Binary]


@dataclass(frozen=True)
class FunctionExpr:
    """A parsed expression; immutable, safe for concurrent evaluation."""

    root: Node
    source: Optional[str] = None

    def __str__(self) -> str:
        return _render(self.root, 0)

    def __call__(self, t):
        return evaluate(self, t)


# --------------------------------------------------------------------------
# tokenizer
# --------------------------------------------------------------------------

_SINGLE = set("+-*/^()")


def _tokenize(text: str):
    """Yield (kind, value, offset) with kind in {num, name, op}."""
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in _SINGLE:
            yield ("op", c, i)
            i += 1
            continue
        if c.isdigit() or c == ".":
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            # scientific notation: 1e-3, 2.5E+10
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    while k < n and text[k].isdigit():
                        k += 1
                    j = k
            try:
                value = float(text[i:j])
            except ValueError:
                raise ExprSyntaxError(f"malformed number {text[i:j]!r}", i)
            yield ("num", value, i)
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            yield ("name", text[i:j], i)
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", i)
    yield ("end", "", n)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = list(_tokenize(text))
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, value, offset = self.peek()
        if kind != "op" or value != op:
            raise ExprSyntaxError(f"expected {op!r}", offset)
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        kind, value, offset = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"trailing input {value!r}", offset)
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                rhs = self.term()
                node = Binary("add" if value == "+" else "sub", node, rhs)
            else:
                return node

    def term(self) -> Node:
        node = self.factor()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                rhs = self.factor()
                node = Binary("mul" if value == "*" else "div", node, rhs)
            else:
                return node

    def factor(self) -> Node:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            return Unary("neg", self.factor())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            return Binary("pow", base, self.factor())
        return base

    def atom(self) -> Node:
        kind, value, offset = self.advance()
        if kind == "num":
            return Num(value)
        if kind == "name":
            if value == "t":
                return Var()
            if value in _FUNC_NAMES:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Unary(value, arg)
            raise ExprSyntaxError(f"unknown identifier {value!r}", offset)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", offset)
        raise ExprSyntaxError(f"unexpected token {value!r}", offset)


def parse_expr(text: str) -> FunctionExpr:
    """Parse an expression string into a FunctionExpr.

    Raises ExprSyntaxError (with byte offset) on malformed input or an
    unknown identifier.
    """
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return FunctionExpr(_Parser(text).parse(), source=text)


# --------------------------------------------------------------------------
# printing
# --------------------------------------------------------------------------

# precedence levels used by the renderer; higher binds tighter
_LEVEL_ADD, _LEVEL_MUL, _LEVEL_NEG, _LEVEL_POW, _LEVEL_ATOM = 10, 20, 30, 40, 100


def _level(node: Node) -> int:
    if isinstance(node, (Num, Var)):
        return _LEVEL_ATOM
    if isinstance(node, Unary):
        return _LEVEL_NEG if node.op == "neg" else _LEVEL_ATOM
    return {"add": _LEVEL_ADD, "sub": _LEVEL_ADD,
            "mul": _LEVEL_MUL, "div": _LEVEL_MUL,
            "pow": _LEVEL_POW}[node.op]


def _wrap(child: Node, minimum: int) -> str:
    text = _render(child, 0)
    return f"({text})" if _level(child) < minimum else text


def _render(node: Node, _depth: int) -> str:
    if isinstance(node, Num):
        v = node.value
        if v < 0 or not math.isfinite(v):
            return f"({v!r})"
        if v == int(v) and abs(v) < 1e16:
            return str(int(v))
        return repr(v)
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Unary):
        if node.op == "neg":
            # operand at a lower level needs parens: -(2*t) is not -2*t
            return "-" + _wrap(node.arg, _LEVEL_NEG)
        return f"{node.op}({_render(node.arg, 0)})"
    op = node.op
    if op == "pow":
        # right-associative; a neg exponent needs no parens (t^-2 reparses)
        lhs = _wrap(node.lhs, _LEVEL_POW + 1)
        rhs_text = _render(node.rhs, 0)
        if _level(node.rhs) < _LEVEL_NEG:
            rhs_text = f"({rhs_text})"
        return f"{lhs}^{rhs_text}"
    symbol = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[op]
    lvl = _level(node)
    lhs = _wrap(node.lhs, lvl)
    # left-associative: an equal-level right child needs parens
    rhs = _wrap(node.rhs, lvl + 1)
    return f"{lhs}{symbol}{rhs}"


def to_string(f: FunctionExpr) -> str:
    return str(f)


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def evaluate(f: FunctionExpr, t):
    """Evaluate at a scalar t (strict domain checks) or an ndarray
    (vectorised; invalid points propagate as nan/inf)."""
    if isinstance(t, np.ndarray):
        with np.errstate(all="ignore"):
            return _eval_array(f.root, t)
    return _eval_scalar(f.root, float(t))


def _eval_scalar(node: Node, t: float) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return t
    if isinstance(node, Unary):
        x = _eval_scalar(node.arg, t)
        if node.op == "neg":
            return -x
        if node.op == "exp":
            try:
                return math.exp(x)
            except OverflowError:
                return math.inf
        if node.op == "log":
            if x <= 0.0:
                raise EvalDomainError("log of non-positive value", node, t)
            return math.log(x)
        if node.op == "sin":
            return math.sin(x)
        if node.op == "cos":
            return math.cos(x)
        if node.op == "sqrt":
            if x < 0.0:
                raise EvalDomainError("sqrt of negative value", node, t)
            return math.sqrt(x)
        if node.op == "abs":
            return abs(x)
        if node.op == "sign":
            return float(np.sign(x))
        raise ValueError(f"unknown unary op {node.op!r}")
    a = _eval_scalar(node.lhs, t)
    b = _eval_scalar(node.rhs, t)
    op = node.op
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        if b == 0.0:
            raise EvalDomainError("division by zero", node, t)
        return a / b
    if op == "pow":
        try:
            return math.pow(a, b)
        except OverflowError:
            return math.inf
        except ValueError:
            raise EvalDomainError("invalid power (negative base?)", node, t)
    raise ValueError(f"unknown binary op {op!r}")


def _eval_array(node: Node, t: np.ndarray):
    if isinstance(node, Num):
        return np.full(t.shape, node.value)
    if isinstance(node, Var):
        return t
    if isinstance(node, Unary):
        x = _eval_array(node.arg, t)
        fn = {"neg": np.negative, "exp": np.exp, "log": np.log,
              "sin": np.sin, "cos": np.cos, "sqrt": np.sqrt,
              "abs": np.abs, "sign": np.sign}[node.op]
        return fn(x)
    a = _eval_array(node.lhs, t)
    b = _eval_array(node.rhs, t)
    fn = {"add": np.add, "sub": np.subtract, "mul": np.multiply,
          "div": np.divide, "pow": np.power}[node.op]
    return fn(a, b)


# --------------------------------------------------------------------------
# symbolic differentiation
# --------------------------------------------------------------------------

def _num(v: float) -> Node:
    return Num(v)


def _is_num(node: Node, v: Optional[float] = None) -> bool:
    return isinstance(node, Num) and (v is None or node.value == v)


def _add(a: Node, b: Node) -> Node:
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    return Binary("add", a, b)


def _sub(a: Node, b: Node) -> Node:
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return Unary("neg", b)
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    return Binary("sub", a, b)


def _mul(a: Node, b: Node) -> Node:
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return Num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    return Binary("mul", a, b)


def _div(a: Node, b: Node) -> Node:
    if _is_num(a, 0.0):
        return Num(0.0)
    if _is_num(b, 1.0):
        return a
    return Binary("div", a, b)


def _pow(a: Node, b: Node) -> Node:
    if _is_num(b, 1.0):
        return a
    if _is_num(b, 0.0):
        return Num(1.0)
    return Binary("pow", a, b)


def _diff(node: Node) -> Node:
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0)
    if isinstance(node, Unary):
        u, du = node.arg, _diff(node.arg)
        if node.op == "neg":
            return _sub(Num(0.0), du) if not _is_num(du, 0.0) else Num(0.0)
        if node.op == "exp":
            return _mul(Unary("exp", u), du)
        if node.op == "log":
            return _div(du, u)
        if node.op == "sin":
            return _mul(Unary("cos", u), du)
        if node.op == "cos":
            return _sub(Num(0.0), _mul(Unary("sin", u), du))
        if node.op == "sqrt":
            return _div(du, _mul(Num(2.0), Unary("sqrt", u)))
        if node.op == "abs":
            # kink convention: derivative 0 at u = 0 (sign(0) = 0)
            return _mul(Unary("sign", u), du)
        if node.op == "sign":
            return Num(0.0)
        raise ValueError(f"unknown unary op {node.op!r}")
    a, b = node.lhs, node.rhs
    da, db = _diff(a), _diff(b)
    op = node.op
    if op == "add":
        return _add(da, db)
    if op == "sub":
        return _sub(da, db)
    if op == "mul":
        return _add(_mul(da, b), _mul(a, db))
    if op == "div":
        return _div(_sub(_mul(da, b), _mul(a, db)), _pow(b, Num(2.0)))
    if op == "pow":
        if _is_num(b):
            # d(u^c) = c * u^(c-1) * u'
            return _mul(_mul(b, _pow(a, Num(b.value - 1.0))), da)
        if _is_num(a):
            # d(c^v) = c^v * log(c) * v'
            return _mul(_mul(node, Unary("log", a)), db)
        # d(u^v) = u^v * (v' * log(u) + v * u' / u)
        inner = _add(_mul(db, Unary("log", a)), _div(_mul(b, da), a))
        return _mul(node, inner)
    raise ValueError(f"unknown binary op {op!r}")


def differentiate(f: FunctionExpr) -> FunctionExpr:
    """Symbolic derivative with respect to t.

    abs has derivative sign(.) with sign(0) = 0, so the result is defined
    everywhere (value 0 at the kink).
    """
    return FunctionExpr(_diff(f.root))


# --------------------------------------------------------------------------
# named scalar functions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarFunction:
    """A real function of t >= domain_start, backed by an expression or by
    an arbitrary vectorised callable (for derived objects like smoothed
    weights)."""

    expr: Optional[FunctionExpr]
    domain_start: float = 0.0
    label: str = ""
    fn: Optional[Callable] = None

    @classmethod
    def from_expression(cls, text: str, label: Optional[str] = None,
                        domain_start: float = 0.0) -> "ScalarFunction":
        f = parse_expr(text)
        return cls(expr=f, domain_start=domain_start,
                   label=label if label is not None else text)

    @classmethod
    def from_callable(cls, fn: Callable, label: str = "",
                      domain_start: float = 0.0) -> "ScalarFunction":
        return cls(expr=None, domain_start=domain_start, label=label, fn=fn)

    def __call__(self, t):
        if self.expr is not None:
            return evaluate(self.expr, t)
        return self.fn(t)

    def derivative(self) -> "ScalarFunction":
        if self.expr is None:
            raise ValueError(f"{self.label or 'function'} is not "
                             "expression-backed; cannot differentiate")
        return ScalarFunction(expr=differentiate(self.expr),
                              domain_start=self.domain_start,
                              label=f"d/dt {self.label}")
