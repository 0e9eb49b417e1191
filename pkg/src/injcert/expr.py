"""Text-defined maps: a small expression grammar with forward-mode AD.

Grammar (whitespace insignificant)::

    vector   := '[' expr (',' expr)* ']'
    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := '-' unary | power
    power    := atom ('^' exponent)?
    exponent := ['-'] INT ('^' exponent)? | '(' ['-'] INT ')' ('^' exponent)?
    atom     := NUMBER | 'pi' | 'e' | VAR | FUNC '(' expr ')' | '(' expr ')'

Variables are ``x1 .. xn``; functions are sin cos tan exp log atan sqrt abs.
Exponents are integer literals only, so ``^`` is total on the reals and
differentiable everywhere its value is finite.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    DimensionMismatchError,
    ExprSyntaxError,
    NonFiniteValueError,
    UnknownIdentifierError,
)

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "atan", "sqrt", "abs")
CONSTANTS = {"pi": math.pi, "e": math.e}


# ---------------------------------------------------------------------------
# dual numbers


class Dual:
    """Value plus a gradient vector; arithmetic propagates the chain rule."""

    __slots__ = ("value", "partials")

    def __init__(self, value: float, partials):
        self.value = float(value)
        self.partials = np.asarray(partials, dtype=float)

    @classmethod
    def variable(cls, value: float, index: int, n: int) -> "Dual":
        seed = np.zeros(n)
        seed[index] = 1.0
        return cls(value, seed)

    def _coerce(self, other) -> "Dual":
        if isinstance(other, Dual):
            return other
        return Dual(other, np.zeros_like(self.partials))

    def __add__(self, other):
        if not isinstance(other, Dual):
            return Dual(self.value + other, self.partials)
        return Dual(self.value + other.value, self.partials + other.partials)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, Dual):
            return Dual(self.value - other, self.partials)
        return Dual(self.value - other.value, self.partials - other.partials)

    def __rsub__(self, other):
        return Dual(other - self.value, -self.partials)

    def __neg__(self):
        return Dual(-self.value, -self.partials)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if not isinstance(other, Dual):
            return Dual(self.value * other, self.partials * other)
        return Dual(
            self.value * other.value,
            self.value * other.partials + other.value * self.partials,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        value = _fdiv(self.value, other.value)
        with np.errstate(divide="ignore", invalid="ignore"):
            partials = (self.partials * other.value - self.value * other.partials) / (
                other.value * other.value
            )
        return Dual(value, partials)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, k):
        if not isinstance(k, int):
            raise TypeError("Dual only supports integer powers")
        if k == 0:
            return Dual(1.0, np.zeros_like(self.partials))
        value = _fpow(self.value, k)
        return Dual(value, k * _fpow(self.value, k - 1) * self.partials)

    def __repr__(self) -> str:
        return f"Dual({self.value!r}, {self.partials.tolist()!r})"


def _fdiv(a: float, b: float) -> float:
    try:
        return a / b
    except ZeroDivisionError:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)


def _fpow(a: float, k: int) -> float:
    try:
        return float(a) ** k
    except ZeroDivisionError:
        return math.inf
    except OverflowError:
        return math.inf


def _safe(fn, x: float) -> float:
    try:
        return fn(x)
    except ValueError:
        return math.nan
    except OverflowError:
        return math.inf


def _sign(x: float) -> float:
    return (x > 0) - (x < 0)


# (value, derivative) for each elementary function
_ELEMENTARY = {
    "sin": (math.sin, math.cos),
    "cos": (math.cos, lambda u: -math.sin(u)),
    "tan": (math.tan, lambda u: 1.0 / math.cos(u) ** 2),
    "exp": (math.exp, math.exp),
    "log": (math.log, lambda u: _fdiv(1.0, u)),
    "atan": (math.atan, lambda u: 1.0 / (1.0 + u * u)),
    "sqrt": (math.sqrt, lambda u: _fdiv(0.5, math.sqrt(u))),
    "abs": (abs, _sign),
}


def apply_function(name: str, u):
    """Apply an elementary function to a float or a :class:`Dual`."""
    fn, dfn = _ELEMENTARY[name]
    if isinstance(u, Dual):
        return Dual(_safe(fn, u.value), _safe(dfn, u.value) * u.partials)
    return _safe(fn, float(u))


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Const:
    value: float
    name: str | None = None


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Const, Var, Neg, BinOp, Pow, Call]


@dataclass(frozen=True)
class ExprAst:
    """A parsed square map: ``len(components) == n_vars``."""

    components: tuple
    n_vars: int

    @property
    def dim(self) -> int:
        return len(self.components)

    def __str__(self) -> str:
        return to_text(self)


def max_var_index(node: Node) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Const):
        return 0
    if isinstance(node, Neg):
        return max_var_index(node.operand)
    if isinstance(node, BinOp):
        return max(max_var_index(node.left), max_var_index(node.right))
    if isinstance(node, Pow):
        return max_var_index(node.base)
    return max_var_index(node.arg)


# ---------------------------------------------------------------------------
# tokenizer / parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()\[\],])
    """,
    re.VERBOSE,
)

_OPERAND_START = ("number", "variable", "constant", "function", "'('", "'-'")


@dataclass
class _Tok:
    kind: str  # num, ident, op, end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(pos, ("a valid token",), text)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def _error(self, expected, pos=None):
        raise ExprSyntaxError(self.tok.pos if pos is None else pos, expected, self.text)

    def _is(self, text: str) -> bool:
        return self.tok.kind == "op" and self.tok.text == text

    def _expect(self, text: str) -> _Tok:
        if not self._is(text):
            self._error((f"'{text}'",))
        tok = self.tok
        self.i += 1
        return tok

    def parse_vector(self) -> tuple:
        self._expect("[")
        comps = [self.parse_expr()]
        while self._is(","):
            self.i += 1
            comps.append(self.parse_expr())
        if not self._is("]"):
            self._error(("','", "']'", "operator"))
        self.i += 1
        if self.tok.kind != "end":
            self._error(("end of input",))
        return tuple(comps)

    def parse_expr(self) -> Node:
        node = self.parse_term()
        while self._is("+") or self._is("-"):
            op = self.tok
            self.i += 1
            node = BinOp(op.text, node, self._operand_after(op, self.parse_term))
        return node

    def parse_term(self) -> Node:
        node = self.parse_unary()
        while self._is("*") or self._is("/"):
            op = self.tok
            self.i += 1
            node = BinOp(op.text, node, self._operand_after(op, self.parse_unary))
        return node

    def _operand_after(self, op: _Tok, rule):
        # a missing operand is reported at the operator that dangles
        if not self._starts_operand():
            self._error(_OPERAND_START, pos=op.pos)
        return rule()

    def _starts_operand(self) -> bool:
        tok = self.tok
        return tok.kind in ("num", "ident") or (tok.kind == "op" and tok.text in "(-")

    def parse_unary(self) -> Node:
        if self._is("-"):
            op = self.tok
            self.i += 1
            return Neg(self._operand_after(op, self.parse_unary))
        return self.parse_power()

    def parse_power(self) -> Node:
        base = self.parse_atom()
        if self._is("^"):
            self.i += 1
            base = Pow(base, self.parse_exponent())
        return base

    def parse_exponent(self) -> int:
        paren = self._is("(")
        if paren:
            self.i += 1
        sign = 1
        if self._is("-"):
            sign = -1
            self.i += 1
        if self.tok.kind != "num" or not self.tok.text.isdigit():
            self._error(("integer exponent",))
        k = sign * int(self.tok.text)
        self.i += 1
        if paren:
            self._expect(")")
        if self._is("^"):
            self.i += 1
            pos = self.tok.pos
            outer = self.parse_exponent()
            if outer < 0 and k not in (1, -1):
                self._error(("integer exponent",), pos=pos)
            k = int(k**outer)
        return k

    def parse_atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Const(float(tok.text))
        if tok.kind == "ident":
            self.i += 1
            name = tok.text
            if name in CONSTANTS:
                return Const(CONSTANTS[name], name)
            if name in FUNCTIONS:
                self._expect("(")
                arg = self.parse_expr()
                self._expect(")")
                return Call(name, arg)
            m = re.fullmatch(r"x([1-9]\d*)", name)
            if m:
                return Var(int(m.group(1)))
            raise UnknownIdentifierError(name, tok.pos)
        if self._is("("):
            self.i += 1
            node = self.parse_expr()
            self._expect(")")
            return node
        self._error(_OPERAND_START)


def parse(text: str) -> ExprAst:
    """Parse ``"[e1, ..., en]"`` into an :class:`ExprAst`."""
    comps = _Parser(text).parse_vector()
    n_vars = max(max_var_index(c) for c in comps)
    if n_vars != len(comps):
        raise DimensionMismatchError(
            f"map has {len(comps)} components but references {n_vars} variables; "
            "only square maps are supported"
        )
    return ExprAst(comps, n_vars)


# ---------------------------------------------------------------------------
# printing


def node_to_text(node: Node) -> str:
    if isinstance(node, Const):
        return node.name if node.name else repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return f"(-{node_to_text(node.operand)})"
    if isinstance(node, BinOp):
        return f"({node_to_text(node.left)} {node.op} {node_to_text(node.right)})"
    if isinstance(node, Pow):
        return f"({node_to_text(node.base)}^({node.exponent}))"
    return f"{node.func}({node_to_text(node.arg)})"


def to_text(ast: ExprAst) -> str:
    """Fully parenthesised text that parses back to an identical AST."""
    return "[" + ", ".join(node_to_text(c) for c in ast.components) + "]"


# ---------------------------------------------------------------------------
# evaluation


def eval_node(node: Node, x):
    """Evaluate one expression tree on a sequence of floats or Duals."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return x[node.index - 1]
    if isinstance(node, Neg):
        return -eval_node(node.operand, x)
    if isinstance(node, BinOp):
        a = eval_node(node.left, x)
        b = eval_node(node.right, x)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if isinstance(a, Dual):
            return a / b
        if isinstance(b, Dual):
            return b._coerce(a) / b
        return _fdiv(a, b)
    if isinstance(node, Pow):
        base = eval_node(node.base, x)
        if isinstance(base, Dual):
            return base**node.exponent
        return _fpow(base, node.exponent) if node.exponent else 1.0
    return apply_function(node.func, eval_node(node.arg, x))


def _check_dim(ast: ExprAst, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != ast.n_vars:
        raise DimensionMismatchError(f"expected a point of dimension {ast.n_vars}, got {x.shape[0]}")
    return x


def evaluate(ast: ExprAst, x) -> np.ndarray:
    """Componentwise value of the map at ``x``."""
    x = _check_dim(ast, x)
    xs = [float(v) for v in x]
    out = np.empty(ast.dim)
    for i, comp in enumerate(ast.components):
        v = eval_node(comp, xs)
        if not math.isfinite(v):
            raise NonFiniteValueError(i + 1, x)
        out[i] = v
    return out


def jacobian_ad(ast: ExprAst, x) -> np.ndarray:
    """Jacobian at ``x`` by forward-mode dual numbers.

    Every variable is seeded with its unit vector, so one sweep over each
    component yields that component's full gradient row.
    """
    x = _check_dim(ast, x)
    n = ast.n_vars
    duals = [Dual.variable(x[j], j, n) for j in range(n)]
    jac = np.empty((ast.dim, n))
    for i, comp in enumerate(ast.components):
        d = eval_node(comp, duals)
        if not isinstance(d, Dual):
            d = Dual(d, np.zeros(n))
        if not (math.isfinite(d.value) and np.all(np.isfinite(d.partials))):
            raise NonFiniteValueError(i + 1, x)
        jac[i] = d.partials
    return jac
