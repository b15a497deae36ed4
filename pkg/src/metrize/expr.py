"""Profile-function expressions: parsing, printing and exact jet evaluation.

Grammar (loosest binding first)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right-associative
    atom    := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

Evaluation propagates second-order jets (value, gradient, Hessian) through every
node, so derivatives are exact to roundoff.  All evaluators accept a batch of
points: a point array of shape ``(n,)`` gives scalar jets, ``(N, n)`` gives jets
whose value has shape ``(N,)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import DomainError, ExprSyntaxError, UnknownIdentifier

FUNCTIONS = ("sin", "cos", "tan", "cot", "exp", "log", "sqrt")
POLE_EPS = 1e-12


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int
    name: str


@dataclass(frozen=True)
class Unary:
    fn: str  # "neg" or one of FUNCTIONS
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # add, sub, mul, div, pow
    left: "Node"
    right: "Node"


Node = Union[Const, Var, Unary, Binary]


@dataclass(frozen=True)
class ExprAst:
    root: Node
    variables: tuple[str, ...]
    source: str = field(default="", compare=False)

    def free_variables(self) -> set[str]:
        out: set[str] = set()
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Var):
                out.add(node.name)
            elif isinstance(node, Unary):
                stack.append(node.arg)
            elif isinstance(node, Binary):
                stack.extend((node.left, node.right))
        return out

    def __str__(self) -> str:
        return to_text(self)


# --------------------------------------------------------------------------
# Lexer / parser
# --------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", _byte_offset(src, pos), src)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), _byte_offset(src, pos)))
        pos = m.end()
    tokens.append(("end", "", _byte_offset(src, len(src))))
    return tokens


def _byte_offset(src: str, index: int) -> int:
    return len(src[:index].encode("utf-8"))


class _Parser:
    def __init__(self, src: str, variables: Sequence[str]):
        self.src = src
        self.tokens = _tokenize(src)
        self.pos = 0
        self.var_index = {name: i for i, name in enumerate(variables)}

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(message, tok[2], self.src)

    def expect(self, text: str):
        tok = self.peek()
        if tok[1] != text or tok[0] != "op":
            self.error(f"expected {text!r}")
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = "add" if self.advance()[1] == "+" else "sub"
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = "mul" if self.advance()[1] == "*" else "div"
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.advance()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            return Binary("pow", base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.peek()
        kind, text, offset = tok
        if kind == "num":
            self.advance()
            return Const(float(text))
        if kind == "ident":
            self.advance()
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                if text not in FUNCTIONS:
                    raise UnknownIdentifier(text, offset)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Unary(text, arg)
            if text in FUNCTIONS:
                self.error(f"expected '(' after {text}")
            if text in self.var_index:
                return Var(self.var_index[text], text)
            if text == "pi":
                return Const(math.pi)
            raise UnknownIdentifier(text, offset)
        if kind == "op" and text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            self.error("unexpected end of input")
        self.error(f"unexpected token {text!r}")


def parse(src: str, variables: Sequence[str]) -> ExprAst:
    """Parse ``src`` against the ordered variable names ``variables``.

    >>> parse("r^2", ["r"]).root
    Binary(op='pow', left=Var(index=0, name='r'), right=Const(value=2.0))
    """
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0, src)
    variables = tuple(variables)
    if "pi" in variables:
        raise ValueError("'pi' is reserved and cannot be a variable name")
    return ExprAst(_Parser(src, variables).parse(), variables, src)


# --------------------------------------------------------------------------
# Printing
# --------------------------------------------------------------------------

_LEVEL = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}


def _level(node: Node) -> int:
    if isinstance(node, Binary):
        return _LEVEL[node.op]
    if isinstance(node, Unary) and node.fn == "neg":
        return 3
    return 5


def _fmt(node: Node) -> str:
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.fn == "neg":
            inner = _fmt(node.arg)
            return "-" + (inner if _level(node.arg) >= 3 else f"({inner})")
        return f"{node.fn}({_fmt(node.arg)})"
    lvl = _LEVEL[node.op]
    left, right = _fmt(node.left), _fmt(node.right)
    if node.op == "pow":
        if _level(node.left) < 5:
            left = f"({left})"
        if _level(node.right) < 3:
            right = f"({right})"
    else:
        if _level(node.left) < lvl:
            left = f"({left})"
        if _level(node.right) <= lvl:
            right = f"({right})"
    return f"{left} {_SYMBOL[node.op]} {right}" if lvl <= 2 else f"{left}{_SYMBOL[node.op]}{right}"


def to_text(ast: ExprAst | Node) -> str:
    """Render an expression; ``parse(to_text(e), vars) == e`` for parsed input."""
    return _fmt(ast.root if isinstance(ast, ExprAst) else ast)


# --------------------------------------------------------------------------
# Second-order jets
# --------------------------------------------------------------------------

def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., :, None] * b[..., None, :]


def _first_bad(x, ok) -> float:
    return float(np.asarray(x)[~np.asarray(ok)].flat[0])


class Jet2:
    """Value, gradient and Hessian of a scalar with respect to ``n`` seeds.

    Arrays carry an arbitrary leading batch shape: ``value.shape == S``,
    ``grad.shape == S + (n,)``, ``hess.shape == S + (n, n)``.
    """

    __slots__ = ("value", "grad", "hess")
    __array_ufunc__ = None

    def __init__(self, value, grad, hess):
        self.value = np.asarray(value, dtype=float)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = np.asarray(hess, dtype=float)

    @property
    def n(self) -> int:
        return self.grad.shape[-1]

    @classmethod
    def constant(cls, c, shape=(), n: int = 1) -> "Jet2":
        value = np.broadcast_to(np.asarray(c, dtype=float), shape).copy()
        return cls(value, np.zeros(tuple(shape) + (n,)), np.zeros(tuple(shape) + (n, n)))

    @classmethod
    def variable(cls, values, index: int, n: int) -> "Jet2":
        values = np.asarray(values, dtype=float)
        grad = np.zeros(values.shape + (n,))
        grad[..., index] = 1.0
        return cls(values.copy(), grad, np.zeros(values.shape + (n, n)))

    @classmethod
    def seeds(cls, points) -> list["Jet2"]:
        """One variable jet per coordinate column of ``points``."""
        points = np.asarray(points, dtype=float)
        n = points.shape[-1]
        return [cls.variable(points[..., i], i, n) for i in range(n)]

    def __repr__(self) -> str:
        return f"Jet2(value={self.value!r}, grad={self.grad!r}, hess={self.hess!r})"

    def __getitem__(self, idx) -> "Jet2":
        return Jet2(self.value[idx], self.grad[idx], self.hess[idx])

    # chain rule for a scalar function with derivatives d1, d2 at self.value
    def _compose(self, f, d1, d2) -> "Jet2":
        d1 = np.asarray(d1)
        d2 = np.asarray(d2)
        return Jet2(
            f,
            d1[..., None] * self.grad,
            d1[..., None, None] * self.hess + d2[..., None, None] * _outer(self.grad, self.grad),
        )

    def __add__(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            return Jet2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)
        return Jet2(self.value + other, self.grad, self.hess)

    __radd__ = __add__

    def __neg__(self) -> "Jet2":
        return Jet2(-self.value, -self.grad, -self.hess)

    def __sub__(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            return Jet2(self.value - other.value, self.grad - other.grad, self.hess - other.hess)
        return Jet2(self.value - other, self.grad, self.hess)

    def __rsub__(self, other) -> "Jet2":
        return Jet2(other - self.value, -self.grad, -self.hess)

    def __mul__(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            a, b = self.value[..., None], other.value[..., None]
            cross = _outer(self.grad, other.grad)
            return Jet2(
                self.value * other.value,
                self.grad * b + a * other.grad,
                self.hess * b[..., None] + a[..., None] * other.hess + (cross + np.swapaxes(cross, -1, -2)),
            )
        c = np.asarray(other, dtype=float)
        return Jet2(self.value * c, self.grad * c[..., None], self.hess * c[..., None, None])

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet2":
        x = self.value
        if np.any(x == 0):
            raise DomainError("div", 0.0)
        inv = 1.0 / x
        return self._compose(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            return self * other.reciprocal()
        c = np.asarray(other, dtype=float)
        if np.any(c == 0):
            raise DomainError("div", 0.0)
        return self * (1.0 / c)

    def __rtruediv__(self, other) -> "Jet2":
        return self.reciprocal() * other

    def __pow__(self, exponent) -> "Jet2":
        return power(self, exponent)

    def __rpow__(self, base) -> "Jet2":
        return power(base, self)


def _int_power(x, k: int):
    if k < 0:
        return 1.0 / _int_power(x, -k)
    result = None
    base = x
    while k:
        if k & 1:
            result = base if result is None else result * base
        k >>= 1
        if k:
            base = base * base
    if result is None:
        return Jet2.constant(1.0, x.value.shape, x.n) if isinstance(x, Jet2) else x * 0.0 + 1.0
    return result


def power(base, exponent):
    """``base ^ exponent``: integer constants by repeated multiplication,
    other constants by the power rule (base > 0), jets via exp(e*log(b))."""
    if isinstance(exponent, Jet2):
        return exp(exponent * log(base))
    e = float(exponent)
    if e.is_integer() and abs(e) <= 2**31:
        return _int_power(base, int(e))
    if isinstance(base, Jet2):
        x = base.value
        ok = x > 0
        if not np.all(ok):
            raise DomainError("pow", _first_bad(x, ok))
        return base._compose(x**e, e * x ** (e - 1), e * (e - 1) * x ** (e - 2))
    x = np.asarray(base, dtype=float)
    ok = x > 0
    if not np.all(ok):
        raise DomainError("pow", _first_bad(x, ok))
    out = x**e
    return float(out) if out.ndim == 0 else out


# Elementary functions.  Each accepts a float, an ndarray or a Jet2.

def _is_scalar(x) -> bool:
    return isinstance(x, (float, int))


def sin(x):
    if isinstance(x, Jet2):
        s = np.sin(x.value)
        return x._compose(s, np.cos(x.value), -s)
    return math.sin(x) if _is_scalar(x) else np.sin(x)


def cos(x):
    if isinstance(x, Jet2):
        c = np.cos(x.value)
        return x._compose(c, -np.sin(x.value), -c)
    return math.cos(x) if _is_scalar(x) else np.cos(x)


def tan(x):
    v = x.value if isinstance(x, Jet2) else np.asarray(x, dtype=float)
    ok = np.abs(np.cos(v)) > POLE_EPS
    if not np.all(ok):
        raise DomainError("tan", _first_bad(v, ok))
    if isinstance(x, Jet2):
        t = np.tan(v)
        sec2 = 1.0 + t * t
        return x._compose(t, sec2, 2.0 * t * sec2)
    return math.tan(x) if _is_scalar(x) else np.tan(x)


def cot(x):
    v = x.value if isinstance(x, Jet2) else np.asarray(x, dtype=float)
    ok = np.abs(np.sin(v)) > POLE_EPS
    if not np.all(ok):
        raise DomainError("cot", _first_bad(v, ok))
    if isinstance(x, Jet2):
        c = np.cos(v) / np.sin(v)
        csc2 = 1.0 + c * c
        return x._compose(c, -csc2, 2.0 * c * csc2)
    return math.cos(x) / math.sin(x) if _is_scalar(x) else np.cos(x) / np.sin(x)


def exp(x):
    if isinstance(x, Jet2):
        e = np.exp(x.value)
        return x._compose(e, e, e)
    return math.exp(x) if _is_scalar(x) else np.exp(x)


def log(x):
    v = x.value if isinstance(x, Jet2) else np.asarray(x, dtype=float)
    ok = v > 0
    if not np.all(ok):
        raise DomainError("log", _first_bad(v, ok))
    if isinstance(x, Jet2):
        inv = 1.0 / v
        return x._compose(np.log(v), inv, -inv * inv)
    return math.log(x) if _is_scalar(x) else np.log(x)


def sqrt(x):
    v = x.value if isinstance(x, Jet2) else np.asarray(x, dtype=float)
    if isinstance(x, Jet2):
        ok = v > 0
        if not np.all(ok):
            raise DomainError("sqrt", _first_bad(v, ok))
        s = np.sqrt(v)
        return x._compose(s, 0.5 / s, -0.25 / (s * v))
    ok = v >= 0
    if not np.all(ok):
        raise DomainError("sqrt", _first_bad(v, ok))
    return math.sqrt(x) if _is_scalar(x) else np.sqrt(x)


def acos(x):
    """Arc cosine; used by the chart maps, not exposed in the grammar."""
    v = x.value if isinstance(x, Jet2) else np.asarray(x, dtype=float)
    ok = np.abs(v) < 1
    if not np.all(ok):
        raise DomainError("acos", _first_bad(v, ok))
    if isinstance(x, Jet2):
        w = 1.0 - v * v
        rw = np.sqrt(w)
        return x._compose(np.arccos(v), -1.0 / rw, -v / (w * rw))
    return math.acos(x) if _is_scalar(x) else np.arccos(x)


def atan2(y, x):
    """Two-argument arctangent of jets ``y`` and ``x`` sharing the same seeds."""
    if not isinstance(y, Jet2) and not isinstance(x, Jet2):
        return math.atan2(y, x) if _is_scalar(y) and _is_scalar(x) else np.arctan2(y, x)
    yv, xv = y.value, x.value
    rho2 = xv * xv + yv * yv
    if np.any(rho2 == 0):
        raise DomainError("atan2", 0.0)
    fy, fx = xv / rho2, -yv / rho2
    r4 = rho2 * rho2
    fyy, fxx, fxy = -2 * xv * yv / r4, 2 * xv * yv / r4, (yv * yv - xv * xv) / r4
    gy, gx = y.grad, x.grad
    grad = fy[..., None] * gy + fx[..., None] * gx
    cross = _outer(gy, gx)
    hess = (
        fy[..., None, None] * y.hess
        + fx[..., None, None] * x.hess
        + fyy[..., None, None] * _outer(gy, gy)
        + fxx[..., None, None] * _outer(gx, gx)
        + fxy[..., None, None] * (cross + np.swapaxes(cross, -1, -2))
    )
    return Jet2(np.arctan2(yv, xv), grad, hess)


_UNARY = {"sin": sin, "cos": cos, "tan": tan, "cot": cot, "exp": exp, "log": log, "sqrt": sqrt}


def _negate(x):
    return -x


def _constant_value(node: Node):
    """Numeric value of a variable-free subtree, else None."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return None
    if isinstance(node, Unary):
        a = _constant_value(node.arg)
        if a is None:
            return None
        return -a if node.fn == "neg" else _UNARY[node.fn](a)
    left = _constant_value(node.left)
    right = _constant_value(node.right)
    if left is None or right is None:
        return None
    return _binary(node.op, left, right)


def _binary(op: str, a, b):
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        if not isinstance(b, Jet2) and np.any(np.asarray(b) == 0):
            raise DomainError("div", 0.0)
        return a / b
    return power(a, b)


def _eval(node: Node, env):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return env[node.index]
    if isinstance(node, Unary):
        arg = _eval(node.arg, env)
        return _negate(arg) if node.fn == "neg" else _UNARY[node.fn](arg)
    if node.op == "pow":
        exponent = _constant_value(node.right)
        base = _eval(node.left, env)
        if exponent is not None:
            return power(base, exponent)
        return power(base, _eval(node.right, env))
    return _binary(node.op, _eval(node.left, env), _eval(node.right, env))


def evaluate(ast: ExprAst, env: Sequence):
    """Evaluate with one entry of ``env`` per declared variable.

    Entries may be floats, ndarrays or :class:`Jet2` objects; the result has
    the matching type (a bare constant stays a float).
    """
    return _eval(ast.root, env)


def eval_value(ast: ExprAst, point) -> float | np.ndarray:
    point = np.asarray(point, dtype=float)
    _check_point(ast, point)
    if point.ndim == 1:
        env = [float(v) for v in point]
    else:
        env = [point[..., i] for i in range(point.shape[-1])]
    out = evaluate(ast, env)
    if point.ndim == 1:
        return float(out)
    return np.broadcast_to(np.asarray(out, dtype=float), point.shape[:-1]).copy()


def eval_jet2(ast: ExprAst, point) -> Jet2:
    """Value, gradient and Hessian of ``ast`` at ``point`` (or a batch of points)."""
    point = np.asarray(point, dtype=float)
    _check_point(ast, point)
    out = evaluate(ast, Jet2.seeds(point))
    if not isinstance(out, Jet2):
        return Jet2.constant(out, point.shape[:-1], point.shape[-1])
    return out


def _check_point(ast: ExprAst, point: np.ndarray) -> None:
    if point.ndim == 0 or point.shape[-1] != len(ast.variables):
        raise ValueError(
            f"point has {point.shape[-1] if point.ndim else 0} coordinates, "
            f"expression declares {len(ast.variables)}"
        )
