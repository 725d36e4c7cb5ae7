"""Coefficient expressions: parsing, evaluation and bound estimation.

Grammar (loosest binding first)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right associative
    primary := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

``FUNC`` is one of abs, sin, cos, exp, sqrt.  Names are ``t``, ``x`` and
``s``; which of them a given field may use is decided by the caller.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .errors import ExprDomainError, ExprSyntaxError

FUNCTIONS = ("abs", "sin", "cos", "exp", "sqrt")
VARIABLES = ("t", "x", "s")

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


Node = Union[Num, Var, Neg, Call, BinOp]


def _tokenize(source):
    pos = 0
    tokens = []
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos, source)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source, variables):
        self.source = source
        self.variables = variables
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(message, tok[2], self.source)

    def expect(self, text):
        tok = self.peek()
        if tok[1] != text or tok[0] != "op":
            self.fail(f"expected {text!r}")
        return self.take()

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        tok = self.peek()
        kind, text, _ = tok
        if kind == "num":
            self.take()
            return Num(float(text))
        if kind == "name":
            self.take()
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text in VARIABLES:
                if text not in self.variables:
                    self.fail(f"variable {text!r} not allowed here", tok)
                return Var(text)
            self.fail(f"unknown identifier {text!r}", tok)
        if kind == "op" and text == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            self.fail("unexpected end of input")
        self.fail(f"unexpected token {text!r}")


def _to_source(node, mode):
    """Render a node as text (mode None), numpy code ("np") or math-module code ("math")."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_to_source(node.arg, mode)})"
    if isinstance(node, Call):
        arg = _to_source(node.arg, mode)
        if mode == "np":
            return f"_np.{node.func}({arg})"
        if mode == "math":
            return f"abs({arg})" if node.func == "abs" else f"_m.{node.func}({arg})"
        return f"{node.func}({arg})"
    left = _to_source(node.left, mode)
    right = _to_source(node.right, mode)
    if node.op == "^":
        if mode == "np":
            return f"_np.power({left}, {right})"
        if mode == "math":
            return f"_pow({left}, {right})"
        return f"({left}^{right})"
    return f"({left} {node.op} {right})"


def _pow(a, b):
    r = a**b
    if isinstance(r, complex):
        raise ValueError("negative base with fractional exponent")
    return r


def _collect_vars(node, out):
    if isinstance(node, Var):
        out.add(node.name)
    elif isinstance(node, (Neg, Call)):
        _collect_vars(node.arg, out)
    elif isinstance(node, BinOp):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)
    return out


def _abs_args(node, out):
    if isinstance(node, Call):
        if node.func == "abs":
            out.append(node.arg)
        _abs_args(node.arg, out)
    elif isinstance(node, Neg):
        _abs_args(node.arg, out)
    elif isinstance(node, BinOp):
        _abs_args(node.left, out)
        _abs_args(node.right, out)
    return out


class Expression:
    """Immutable parsed expression.

    Calling the object evaluates it with numpy broadcasting; domain
    violations raise :class:`ExprDomainError` instead of producing nan.
    """

    def __init__(self, tree, source=None):
        self.tree = tree
        self.source = source if source is not None else _to_source(tree, None)
        self.variables = frozenset(_collect_vars(tree, set()))
        self._fn = eval(f"lambda t, x, s: {_to_source(tree, 'np')}", {"_np": np})
        self._scalar_fn = eval(f"lambda t, x, s: {_to_source(tree, 'math')}", {"_m": math, "_pow": _pow})

    def __repr__(self):
        return f"Expression({self.source!r})"

    def __eq__(self, other):
        return isinstance(other, Expression) and self.tree == other.tree

    def __hash__(self):
        return hash(self.tree)

    @property
    def is_constant(self):
        return not self.variables

    def __str__(self):
        return _to_source(self.tree, None)

    def scalar(self, t, x=0.0):
        """Fast float evaluation (math module); same domain errors as the vectorised form."""
        try:
            return float(self._scalar_fn(t, x, t))
        except (ValueError, ZeroDivisionError) as exc:
            raise ExprDomainError(f"{self.source!r}: {exc}") from None
        except OverflowError:
            return math.inf

    def kinks(self, lo, hi, h):
        """Sign changes in (lo, hi) of the t-only arguments of abs().

        Bracketed on a grid of step h/4 and refined with brentq; zeros
        that touch without crossing are not reported.
        """
        args = [Expression(a) for a in _abs_args(self.tree, []) if _collect_vars(a, set()) <= {"t", "s"}]
        args = [a for a in args if not a.is_constant]
        if not args or not hi > lo:
            return np.empty(0)
        t = np.linspace(lo, hi, max(2, math.ceil(4 * (hi - lo) / h)) + 1)
        found = []
        for a in args:
            v = np.broadcast_to(a(t), t.shape)
            for j in np.flatnonzero(np.sign(v[1:]) != np.sign(v[:-1])):
                if v[j] == 0.0:
                    found.append(t[j])
                elif v[j + 1] != 0.0:
                    found.append(brentq(a.scalar, t[j], t[j + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
        found = [u for u in found if lo < u < hi]
        return np.unique(np.array(found)) if found else np.empty(0)

    def __call__(self, t=0.0, x=None, s=None):
        """Vectorised evaluation; ``s`` defaults to ``t`` for one-argument forms."""
        if "x" in self.variables and x is None:
            raise ExprDomainError(f"variable 'x' not supplied to {self.source!r}")
        t = np.asarray(t, dtype=float)
        s = t if s is None else np.asarray(s, dtype=float)
        xv = np.asarray(0.0 if x is None else x, dtype=float)
        try:
            with np.errstate(divide="raise", invalid="raise", over="ignore"):
                out = self._fn(t, xv, s)
        except (FloatingPointError, ZeroDivisionError) as exc:
            raise ExprDomainError(f"{self.source!r}: {exc}") from None
        shape = np.broadcast_shapes(t.shape, xv.shape, s.shape)
        out = np.broadcast_to(np.asarray(out, dtype=float), shape)
        return out if shape else float(out)


def parse(source: str, variables=("t",)) -> Expression:
    """Parse ``source`` into an :class:`Expression`.

    ``variables`` lists the names the caller context permits.
    """
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", 0, source)
    return Expression(_Parser(source, tuple(variables)).parse(), source)


def to_text(e: Expression) -> str:
    return _to_source(e.tree, None)


_SCALAR_FUNCS = {
    "abs": abs,
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
}


def _eval_node(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if env.get(node.name) is None:
            raise ExprDomainError(f"missing variable {node.name!r}")
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval_node(node.arg, env)
    if isinstance(node, Call):
        v = _eval_node(node.arg, env)
        if node.func == "sqrt":
            if v < 0:
                raise ExprDomainError(f"sqrt of negative operand {v!r}")
            return math.sqrt(v)
        if node.func == "exp":
            try:
                return math.exp(v)
            except OverflowError:
                return math.inf
        return _SCALAR_FUNCS[node.func](v)
    a = _eval_node(node.left, env)
    b = _eval_node(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        if b == 0:
            raise ExprDomainError("division by zero")
        return a / b
    try:
        r = a**b
    except ZeroDivisionError:
        raise ExprDomainError("zero raised to a negative power") from None
    except OverflowError:
        return math.inf
    if isinstance(r, complex):
        raise ExprDomainError(f"negative base {a!r} with fractional exponent {b!r}")
    return r


def evaluate(e: Expression, t: float, x: float | None = None) -> float:
    """Scalar double-precision evaluation by walking the tree."""
    env = {"t": float(t), "s": float(t), "x": None if x is None else float(x)}
    return float(_eval_node(e.tree, env))


def estimate_bounds(e: Expression, t_window=1000.0, samples=10**6, x_range=None, x_samples=21):
    """Sampled (inf, sup) of ``e`` over a uniform grid on [0, t_window].

    When ``e`` depends on ``x`` the grid is crossed with ``x_samples``
    uniform points on ``x_range``.
    """
    if samples < 2:
        raise ValueError("samples must be at least 2")
    if e.is_constant:
        v = float(e(0.0, 0.0))
        return v, v
    ts = np.linspace(0.0, float(t_window), int(samples))
    if "x" not in e.variables:
        vals = e(ts)
        return float(vals.min()), float(vals.max())
    if x_range is None:
        raise ValueError(f"{e.source!r} depends on x; x_range required")
    xs = np.linspace(float(x_range[0]), float(x_range[1]), int(x_samples))
    lo, hi = math.inf, -math.inf
    chunk = max(1, 2_000_000 // len(xs))
    for i in range(0, len(ts), chunk):
        vals = e(ts[i : i + chunk, None], xs[None, :])
        lo = min(lo, float(vals.min()))
        hi = max(hi, float(vals.max()))
    return lo, hi
