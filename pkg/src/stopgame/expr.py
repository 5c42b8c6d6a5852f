"""Tiny expression language for user-defined coefficients.

Expressions are functions of the two variables ``t`` and ``x`` built from
arithmetic (``+ - * / ^``), the calls ``exp, log, sqrt, pow, min, max`` and
numeric literals.  Evaluation is forward-mode on dual numbers, so first
partial derivatives in ``t`` and ``x`` come out exact (no finite-difference
step).  ASTs are immutable; parsing and evaluation are reentrant.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .errors import DomainError, ExprSyntaxError, UnknownIdentifier

__all__ = [
    "ExprAst", "Const", "Var", "Unary", "Binary", "Call",
    "DualValue", "parse", "eval_dual", "to_source",
]


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str  # "t" or "x"


@dataclass(frozen=True)
class Unary:
    op: str  # "-"
    operand: "ExprAst"


@dataclass(frozen=True)
class Binary:
    op: str  # "+", "-", "*", "/", "^"
    lhs: "ExprAst"
    rhs: "ExprAst"


@dataclass(frozen=True)
class Call:
    fn: str
    args: Tuple["ExprAst", ...]


ExprAst = Union[Const, Var, Unary, Binary, Call]

_FUNCTIONS = {"exp": 1, "log": 1, "sqrt": 1, "pow": 2, "min": 2, "max": 2}


# --- tokenizer / parser ----------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            # skip pure whitespace tail
            if source[pos:].strip() == "":
                break
            bad = pos + len(source[pos:]) - len(source[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {source[bad]!r}", bad,
                                  expected=("number", "identifier", "operator"))
        if m.group("num") is not None:
            tokens.append(("num", float(m.group("num")), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", None, len(source)))
    return tokens


# binding powers: (+,-) < (*,/) < unary minus < (^, right-assoc)
_INFIX_BP = {"+": (10, 11), "-": (10, 11), "*": (20, 21), "/": (20, 21), "^": (31, 30)}
_UNARY_BP = 25


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, off = self.peek()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected '{op}'", off, expected=(op,))
        return self.next()

    def parse_expr(self, min_bp=0):
        node = self.parse_prefix()
        while True:
            kind, val, off = self.peek()
            if kind != "op" or val not in _INFIX_BP:
                break
            lbp, rbp = _INFIX_BP[val]
            if lbp < min_bp:
                break
            self.next()
            rhs = self.parse_expr(rbp)
            node = Binary(val, node, rhs)
        return node

    def parse_prefix(self):
        kind, val, off = self.next()
        if kind == "num":
            return Const(val)
        if kind == "ident":
            if val in _FUNCTIONS:
                self.expect_op("(")
                args = [self.parse_expr()]
                while True:
                    k2, v2, o2 = self.peek()
                    if k2 == "op" and v2 == ",":
                        self.next()
                        args.append(self.parse_expr())
                    else:
                        break
                self.expect_op(")")
                arity = _FUNCTIONS[val]
                if len(args) != arity:
                    raise ExprSyntaxError(
                        f"{val} takes {arity} argument(s), got {len(args)}", off,
                        expected=(f"{arity} arguments",))
                return Call(val, tuple(args))
            if val in ("t", "x"):
                return Var(val)
            raise UnknownIdentifier(val, off)
        if kind == "op" and val == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        if kind == "op" and val == "-":
            return Unary("-", self.parse_expr(_UNARY_BP))
        if kind == "op" and val == "+":
            return self.parse_expr(_UNARY_BP)
        raise ExprSyntaxError("expected expression", off,
                              expected=("number", "t", "x", "(", "-", "function"))


def parse(source: str) -> ExprAst:
    """Parse ``source`` into an AST; whitespace-insensitive."""
    if not source or source.strip() == "":
        raise ExprSyntaxError("empty expression", 0, expected=("expression",))
    parser = _Parser(_tokenize(source))
    node = parser.parse_expr()
    kind, val, off = parser.peek()
    if kind != "end":
        raise ExprSyntaxError(f"unexpected trailing input {val!r}", off,
                              expected=("end of input",))
    return node


# --- printing --------------------------------------------------------------

_PREC = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}


def _fmt_const(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _emit(node: ExprAst, ctx: int) -> str:
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        s = "-" + _emit(node.operand, _UNARY_BP + 1)
        return f"({s})" if ctx > _UNARY_BP else s
    if isinstance(node, Binary):
        p = _PREC[node.op]
        if node.op == "^":
            s = _emit(node.lhs, p + 1) + "^" + _emit(node.rhs, p)
        else:
            s = f"{_emit(node.lhs, p)} {node.op} {_emit(node.rhs, p + 1)}"
        return f"({s})" if ctx > p else s
    return f"{node.fn}({', '.join(_emit(a, 0) for a in node.args)})"


def to_source(node: ExprAst) -> str:
    """Print an AST back to parseable text (round-trips structurally)."""
    return _emit(node, 0)


# --- dual-number evaluation ------------------------------------------------

@dataclass
class DualValue:
    """Value plus exact first partials in x and t."""
    value: float
    dx: float
    dt: float

    def __add__(self, other):
        o = _as_dual(other)
        return DualValue(self.value + o.value, self.dx + o.dx, self.dt + o.dt)

    __radd__ = __add__

    def __sub__(self, other):
        o = _as_dual(other)
        return DualValue(self.value - o.value, self.dx - o.dx, self.dt - o.dt)

    def __rsub__(self, other):
        return _as_dual(other) - self

    def __neg__(self):
        return DualValue(-self.value, -self.dx, -self.dt)

    def __mul__(self, other):
        o = _as_dual(other)
        return DualValue(self.value * o.value,
                         self.dx * o.value + self.value * o.dx,
                         self.dt * o.value + self.value * o.dt)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _as_dual(other)
        if np.any(o.value == 0):
            raise DomainError("division by zero")
        inv2 = o.value * o.value
        return DualValue(self.value / o.value,
                         (self.dx * o.value - self.value * o.dx) / inv2,
                         (self.dt * o.value - self.value * o.dt) / inv2)

    def __rtruediv__(self, other):
        return _as_dual(other) / self


def _as_dual(v):
    return v if isinstance(v, DualValue) else DualValue(v, 0.0, 0.0)


def _dual_exp(u: DualValue) -> DualValue:
    e = np.exp(u.value)
    return DualValue(e, e * u.dx, e * u.dt)


def _dual_log(u: DualValue, where) -> DualValue:
    if np.any(u.value <= 0):
        raise DomainError("log of non-positive value", subexpr=where)
    return DualValue(np.log(u.value), u.dx / u.value, u.dt / u.value)


def _dual_sqrt(u: DualValue, where) -> DualValue:
    if np.any(u.value < 0):
        raise DomainError("sqrt of negative value", subexpr=where)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.sqrt(u.value)
        half = 0.5 / s
    return DualValue(s, half * u.dx, half * u.dt)


def _is_integer_constant(expo_dual: DualValue) -> bool:
    v = expo_dual.value
    return (np.ndim(v) == 0 and np.ndim(expo_dual.dx) == 0
            and expo_dual.dx == 0.0 and expo_dual.dt == 0.0
            and float(v).is_integer())


def _dual_pow(base: DualValue, expo: ExprAst, expo_dual: DualValue, where):
    # integer constant exponents work for any base; otherwise demand base > 0
    if _is_integer_constant(expo_dual):
        n = float(expo_dual.value)
        if n == 0:
            return DualValue(np.ones_like(np.asarray(base.value, dtype=float)) * 1.0, 0.0, 0.0)
        if np.any(base.value == 0) and n < 0:
            raise DomainError("zero base with negative exponent", subexpr=where)
        val = base.value ** n
        grad = n * base.value ** (n - 1)
        return DualValue(val, grad * base.dx, grad * base.dt)
    if np.any(base.value <= 0):
        raise DomainError("non-integer power of non-positive base", subexpr=where)
    return _dual_exp(expo_dual * _dual_log(base, where))


def _dual_select(cond, a: DualValue, b: DualValue) -> DualValue:
    return DualValue(np.where(cond, a.value, b.value),
                     np.where(cond, a.dx, b.dx),
                     np.where(cond, a.dt, b.dt))


def _eval(node: ExprAst, t, x) -> DualValue:
    if isinstance(node, Const):
        return DualValue(node.value, 0.0, 0.0)
    if isinstance(node, Var):
        if node.name == "x":
            return DualValue(x, 1.0, 0.0)
        return DualValue(t, 0.0, 1.0)
    if isinstance(node, Unary):
        return -_eval(node.operand, t, x)
    if isinstance(node, Binary):
        lhs = _eval(node.lhs, t, x)
        if node.op == "^":
            return _dual_pow(lhs, node.rhs, _eval(node.rhs, t, x), to_source(node))
        rhs = _eval(node.rhs, t, x)
        if node.op == "+":
            return lhs + rhs
        if node.op == "-":
            return lhs - rhs
        if node.op == "*":
            return lhs * rhs
        try:
            return lhs / rhs
        except DomainError as err:
            raise DomainError(str(err), subexpr=to_source(node)) from None
    # Call
    args = [_eval(a, t, x) for a in node.args]
    where = to_source(node)
    if node.fn == "exp":
        return _dual_exp(args[0])
    if node.fn == "log":
        return _dual_log(args[0], where)
    if node.fn == "sqrt":
        return _dual_sqrt(args[0], where)
    if node.fn == "pow":
        return _dual_pow(args[0], node.args[1], args[1], where)
    if node.fn == "min":
        return _dual_select(args[0].value <= args[1].value, args[0], args[1])
    # max; ties resolved toward the first argument, matching min
    return _dual_select(args[0].value >= args[1].value, args[0], args[1])


def eval_dual(ast: ExprAst, t, x) -> DualValue:
    """Evaluate ``ast`` at (t, x) with exact forward-mode partials.

    ``t`` and ``x`` may be scalars or broadcastable numpy arrays.
    """
    out = _eval(ast, t, x)
    if not np.all(np.isfinite(np.asarray(out.value, dtype=float))):
        raise DomainError("non-finite value in expression", subexpr=to_source(ast))
    return out
