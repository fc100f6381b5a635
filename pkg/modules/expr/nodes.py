"""
Parse tree of the formula language.

Nodes are immutable. evaluate() works on numpy arrays so a compiled
coefficient costs one tree walk per call, whatever the number of states.
Spans are (start, end) offsets into the source and do not take part in
equality.
"""

from dataclasses import dataclass, field

import numpy as np

from modules.expr.errors import ExprEvaluationError, UnsupportedDerivativeError

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh", "abs")
VARIABLES = ("x", "t")

_NUMPY = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "tanh": np.tanh,
    "abs": np.abs,
}


def _fail(message, node, x, t, mask):
    xb, tb, mb = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float), mask)
    i = int(np.flatnonzero(mb.ravel())[0])
    raise ExprEvaluationError(message, node.span, float(xb.ravel()[i]), float(tb.ravel()[i]))


class Expr:
    span = (0, 0)

    def evaluate(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        with np.errstate(all="ignore"):
            out = np.broadcast_to(self._eval(x, t), np.broadcast(x, t).shape)
        return float(out) if out.ndim == 0 else out.copy()

    def as_function(self):
        return lambda x, t=0.0: self.evaluate(x, t)

    def variables(self):
        return set()

    def depends_on(self, var):
        return var in self.variables()

    def __str__(self):
        return self.to_source()


@dataclass(frozen=True)
class Num(Expr):
    value: float
    span: tuple = field(default=(0, 0), compare=False)

    def _eval(self, x, t):
        return np.float64(self.value)

    def derivative(self, var):
        return Num(0.0, self.span)

    def to_source(self):
        text = repr(float(self.value))
        return f"({text})" if self.value < 0 else text


@dataclass(frozen=True)
class Var(Expr):
    name: str
    span: tuple = field(default=(0, 0), compare=False)

    def _eval(self, x, t):
        return x if self.name == "x" else t

    def derivative(self, var):
        return Num(1.0 if self.name == var else 0.0, self.span)

    def variables(self):
        return {self.name}

    def to_source(self):
        return self.name


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr
    span: tuple = field(default=(0, 0), compare=False)

    def _eval(self, x, t):
        return -self.operand._eval(x, t)

    def derivative(self, var):
        return neg(self.operand.derivative(var), self.span)

    def variables(self):
        return self.operand.variables()

    def to_source(self):
        return f"(-{self.operand.to_source()})"


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    span: tuple = field(default=(0, 0), compare=False)

    def _eval(self, x, t):
        a = self.left._eval(x, t)
        b = self.right._eval(x, t)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            zero = np.asarray(b) == 0
            if np.any(zero):
                _fail("division by zero", self, x, t, zero)
            return a / b
        out = np.power(a, b)
        bad = ~np.isfinite(out) & np.isfinite(a) & np.isfinite(b)
        if np.any(bad):
            _fail("power undefined", self, x, t, bad)
        return out

    def derivative(self, var):
        u, v = self.left, self.right
        du, dv = u.derivative(var), v.derivative(var)
        s = self.span
        if self.op == "+":
            return add(du, dv, s)
        if self.op == "-":
            return sub(du, dv, s)
        if self.op == "*":
            return add(mul(du, v, s), mul(u, dv, s), s)
        if self.op == "/":
            return div(sub(mul(du, v, s), mul(u, dv, s), s), power(v, Num(2.0, s), s), s)
        if not v.depends_on(var):
            return mul(mul(v, power(u, sub(v, Num(1.0, s), s), s), s), du, s)
        # u^v = exp(v log u)
        inner = add(mul(dv, Call("log", u, s), s), div(mul(v, du, s), u, s), s)
        return mul(self, inner, s)

    def variables(self):
        return self.left.variables() | self.right.variables()

    def to_source(self):
        return f"({self.left.to_source()} {self.op} {self.right.to_source()})"


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    arg: Expr
    span: tuple = field(default=(0, 0), compare=False)

    def _eval(self, x, t):
        a = self.arg._eval(x, t)
        if self.fn == "sqrt" and np.any(np.asarray(a) < 0):
            _fail("sqrt of negative value", self, x, t, np.asarray(a) < 0)
        if self.fn == "log" and np.any(np.asarray(a) <= 0):
            _fail("log of non-positive value", self, x, t, np.asarray(a) <= 0)
        out = _NUMPY[self.fn](a)
        bad = ~np.isfinite(out) & np.isfinite(a)
        if np.any(bad):
            _fail(f"{self.fn} overflowed", self, x, t, bad)
        return out

    def derivative(self, var):
        u, s = self.arg, self.span
        du = u.derivative(var)
        if self.fn == "abs":
            raise UnsupportedDerivativeError(f"abs() at {s[0]}..{s[1]} has no derivative rule")
        if self.fn == "sin":
            outer = Call("cos", u, s)
        elif self.fn == "cos":
            outer = neg(Call("sin", u, s), s)
        elif self.fn == "exp":
            outer = self
        elif self.fn == "log":
            return div(du, u, s)
        elif self.fn == "sqrt":
            return div(du, mul(Num(2.0, s), self, s), s)
        else:
            outer = sub(Num(1.0, s), power(self, Num(2.0, s), s), s)
        return mul(outer, du, s)

    def variables(self):
        return self.arg.variables()

    def to_source(self):
        return f"{self.fn}({self.arg.to_source()})"


# Constructors with constant folding, used by derivative()

def _num(e):
    return e.value if isinstance(e, Num) else None


def neg(a, span):
    if _num(a) is not None:
        return Num(-a.value, span)
    return Neg(a, span)


def add(a, b, span):
    if _num(a) is not None and _num(b) is not None:
        return Num(a.value + b.value, span)
    if _num(a) == 0:
        return b
    if _num(b) == 0:
        return a
    return BinOp("+", a, b, span)


def sub(a, b, span):
    if _num(a) is not None and _num(b) is not None:
        return Num(a.value - b.value, span)
    if _num(b) == 0:
        return a
    if _num(a) == 0:
        return neg(b, span)
    return BinOp("-", a, b, span)


def mul(a, b, span):
    if _num(a) is not None and _num(b) is not None:
        return Num(a.value * b.value, span)
    if _num(a) == 0 or _num(b) == 0:
        return Num(0.0, span)
    if _num(a) == 1:
        return b
    if _num(b) == 1:
        return a
    return BinOp("*", a, b, span)


def div(a, b, span):
    if _num(a) == 0:
        return Num(0.0, span)
    if _num(b) == 1:
        return a
    if _num(a) is not None and _num(b) not in (None, 0):
        return Num(a.value / b.value, span)
    return BinOp("/", a, b, span)


def power(a, b, span):
    if _num(b) == 1:
        return a
    if _num(b) == 0:
        return Num(1.0, span)
    return BinOp("^", a, b, span)
