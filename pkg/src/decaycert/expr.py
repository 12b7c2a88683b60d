"""Small expression language for coefficient functions.

Grammar (lowest to highest precedence)::

    sum      := product (('+' | '-') product)*
    product  := unary (('*' | '/') unary)*
    unary    := ('-' | '+') unary | power
    power    := atom ('^' exponent)?
    exponent := ('-' | '+') exponent | power
    atom     := NUMBER | NAME | NAME '(' args ')' | '(' sum ')'

``^`` is right associative and binds tighter than unary minus, so ``-2^2``
is ``-4``.  Exponents must be constant; they are folded to a float at parse
time.  Functions: ``exp``, ``ln``, ``abs``, ``min``, ``max``.

Evaluation never returns NaN or infinity: every non-finite intermediate is
raised as :class:`DomainError`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Mapping

import numpy as np

__all__ = [
    "Expression", "Const", "Var", "Add", "Sub", "Mul", "Div", "Neg", "Pow",
    "Func", "MinMax", "ExpressionError", "ParseError", "UnknownVariableError",
    "DomainError", "NonDifferentiableError", "parse_expr", "eval_expr",
    "diff_expr", "const",
]


class ExpressionError(Exception):
    pass


class ParseError(ExpressionError, ValueError):
    """Malformed expression text.  ``offset`` is a byte offset into the UTF-8 text."""

    def __init__(self, message: str, text: str, char_index: int):
        self.text = text
        self.offset = len(text[:char_index].encode("utf-8"))
        super().__init__(f"{message} at byte offset {self.offset}")


class UnknownVariableError(ParseError):
    def __init__(self, name: str, text: str, char_index: int, allowed: Iterable[str]):
        self.name = name
        declared = ", ".join(sorted(allowed))
        super().__init__(f"unknown variable {name!r} (declared: {declared})", text, char_index)


class DomainError(ExpressionError, ArithmeticError):
    """Evaluation left the domain of an operation or produced a non-finite value."""

    def __init__(self, message: str, nonfinite: bool = False):
        super().__init__(message)
        self.nonfinite = nonfinite


class NonDifferentiableError(ExpressionError):
    pass


def _finite(x: float, what: str) -> float:
    if not math.isfinite(x):
        raise DomainError(f"non-finite value from {what}", nonfinite=True)
    return x


def _check_array(x: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise DomainError(f"non-finite value from {what}", nonfinite=True)
    return x


def _first_bad(mask: np.ndarray) -> str:
    idx = np.argwhere(np.atleast_1d(mask))[0]
    return f" (first at index {tuple(int(i) for i in idx)})"


def _fmt_number(value: float) -> str:
    text = repr(float(value))
    return f"({text})" if value < 0 or text.startswith("-") else text


class Expression:
    """Base class of the immutable expression tree."""

    precedence = 100

    def children(self) -> tuple["Expression", ...]:
        return ()

    @cached_property
    def free_vars(self) -> frozenset[str]:
        out: set[str] = set()
        for c in self.children():
            out |= c.free_vars
        return frozenset(out)

    @cached_property
    def _fn(self) -> Callable[[Mapping[str, float]], float]:
        return self._compile()

    def _compile(self) -> Callable[[Mapping[str, float]], float]:
        raise NotImplementedError

    def evaluate(self, bindings: Mapping[str, float]) -> float:
        missing = self.free_vars - bindings.keys()
        if missing:
            raise KeyError(f"no binding for {', '.join(sorted(missing))}")
        return self._fn(bindings)

    def __call__(self, **bindings: float) -> float:
        return self.evaluate(bindings)

    def evaluate_array(self, bindings: Mapping[str, np.ndarray | float]) -> np.ndarray:
        """Vectorized evaluation; bindings broadcast against each other."""
        missing = self.free_vars - bindings.keys()
        if missing:
            raise KeyError(f"no binding for {', '.join(sorted(missing))}")
        arrays = {k: np.asarray(v, dtype=float) for k, v in bindings.items()}
        shape = np.broadcast_shapes(*(a.shape for a in arrays.values())) if arrays else ()
        with np.errstate(all="ignore"):
            out = self._eval_array(arrays)
        return np.broadcast_to(out, shape).astype(float, copy=True)

    def _eval_array(self, env: Mapping[str, np.ndarray]) -> np.ndarray:
        raise NotImplementedError

    def diff(self, var: str) -> "Expression":
        raise NotImplementedError

    def is_constant(self) -> bool:
        return not self.free_vars


@dataclass(frozen=True, eq=True)
class Const(Expression):
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DomainError("non-finite constant", nonfinite=True)
        object.__setattr__(self, "value", float(self.value))

    def _compile(self):
        v = self.value
        return lambda env: v

    def _eval_array(self, env):
        return np.asarray(self.value)

    def diff(self, var):
        return ZERO

    def __str__(self):
        return _fmt_number(self.value)


ZERO = Const(0.0)
ONE = Const(1.0)


def const(value: float) -> Const:
    return Const(value)


@dataclass(frozen=True, eq=True)
class Var(Expression):
    name: str

    @cached_property
    def free_vars(self):
        return frozenset((self.name,))

    def _compile(self):
        name = self.name
        return lambda env: float(env[name])

    def _eval_array(self, env):
        return env[self.name]

    def diff(self, var):
        return ONE if var == self.name else ZERO

    def __str__(self):
        return self.name


@dataclass(frozen=True, eq=True)
class _Binary(Expression):
    left: Expression
    right: Expression

    symbol = "?"

    def children(self):
        return (self.left, self.right)

    def __str__(self):
        return f"({self.left} {self.symbol} {self.right})"


class Add(_Binary):
    symbol = "+"

    def _compile(self):
        a, b = self.left._fn, self.right._fn
        return lambda env: _finite(a(env) + b(env), "addition")

    def _eval_array(self, env):
        return _check_array(self.left._eval_array(env) + self.right._eval_array(env), "addition")

    def diff(self, var):
        return _add(self.left.diff(var), self.right.diff(var))


class Sub(_Binary):
    symbol = "-"

    def _compile(self):
        a, b = self.left._fn, self.right._fn
        return lambda env: _finite(a(env) - b(env), "subtraction")

    def _eval_array(self, env):
        return _check_array(self.left._eval_array(env) - self.right._eval_array(env), "subtraction")

    def diff(self, var):
        return _sub(self.left.diff(var), self.right.diff(var))


class Mul(_Binary):
    symbol = "*"

    def _compile(self):
        a, b = self.left._fn, self.right._fn
        return lambda env: _finite(a(env) * b(env), "multiplication")

    def _eval_array(self, env):
        return _check_array(self.left._eval_array(env) * self.right._eval_array(env), "multiplication")

    def diff(self, var):
        return _add(_mul(self.left.diff(var), self.right), _mul(self.left, self.right.diff(var)))


class Div(_Binary):
    symbol = "/"

    def _compile(self):
        a, b = self.left._fn, self.right._fn

        def f(env):
            den = b(env)
            if den == 0.0:
                raise DomainError("division by zero")
            return _finite(a(env) / den, "division")
        return f

    def _eval_array(self, env):
        num = self.left._eval_array(env)
        den = self.right._eval_array(env)
        zero = den == 0.0
        if np.any(zero):
            raise DomainError("division by zero" + _first_bad(zero))
        return _check_array(num / den, "division")

    def diff(self, var):
        da, db = self.left.diff(var), self.right.diff(var)
        if db == ZERO:
            return _div(da, self.right)
        num = _sub(_mul(da, self.right), _mul(self.left, db))
        return _div(num, _pow(self.right, 2.0))


@dataclass(frozen=True, eq=True)
class Neg(Expression):
    operand: Expression

    def children(self):
        return (self.operand,)

    def _compile(self):
        a = self.operand._fn
        return lambda env: -a(env)

    def _eval_array(self, env):
        return -self.operand._eval_array(env)

    def diff(self, var):
        return _neg(self.operand.diff(var))

    def __str__(self):
        return f"(-{self.operand})"


@dataclass(frozen=True, eq=True)
class Pow(Expression):
    base: Expression
    exponent: float

    def __post_init__(self):
        object.__setattr__(self, "exponent", float(self.exponent))

    def children(self):
        return (self.base,)

    def _compile(self):
        a, k = self.base._fn, self.exponent
        integral = k.is_integer()

        def f(env):
            x = a(env)
            if x == 0.0 and k < 0:
                raise DomainError("zero raised to a negative power")
            if x < 0.0 and not integral:
                raise DomainError("fractional power of a negative base")
            try:
                return _finite(x ** k, "power")
            except OverflowError:
                raise DomainError("overflow in power", nonfinite=True) from None
        return f

    def _eval_array(self, env):
        x = self.base._eval_array(env)
        k = self.exponent
        if k < 0:
            bad = x == 0.0
            if np.any(bad):
                raise DomainError("zero raised to a negative power" + _first_bad(bad))
        if not k.is_integer():
            bad = x < 0.0
            if np.any(bad):
                raise DomainError("fractional power of a negative base" + _first_bad(bad))
        return _check_array(np.power(x, k), "power")

    def diff(self, var):
        k = self.exponent
        db = self.base.diff(var)
        if k == 0.0 or db == ZERO:
            return ZERO
        return _mul(_mul(Const(k), _pow(self.base, k - 1.0)), db)

    def __str__(self):
        base = f"({self.base})" if isinstance(self.base, Pow) else str(self.base)
        return f"{base}^{_fmt_number(self.exponent)}"


_SCALAR_FUNCS = {"exp": math.exp, "ln": math.log, "abs": abs}


@dataclass(frozen=True, eq=True)
class Func(Expression):
    name: str
    arg: Expression

    def children(self):
        return (self.arg,)

    def _compile(self):
        a, name = self.arg._fn, self.name
        if name == "ln":
            def f(env):
                x = a(env)
                if x <= 0.0:
                    raise DomainError("ln of a nonpositive value")
                return math.log(x)
        elif name == "exp":
            def f(env):
                try:
                    return math.exp(a(env))
                except OverflowError:
                    raise DomainError("overflow in exp", nonfinite=True) from None
        else:
            def f(env):
                return abs(a(env))
        return f

    def _eval_array(self, env):
        x = self.arg._eval_array(env)
        if self.name == "ln":
            bad = x <= 0.0
            if np.any(bad):
                raise DomainError("ln of a nonpositive value" + _first_bad(bad))
            return np.log(x)
        if self.name == "exp":
            return _check_array(np.exp(x), "exp")
        return np.abs(x)

    def diff(self, var):
        if var not in self.free_vars:
            return ZERO
        if self.name == "exp":
            return _mul(self, self.arg.diff(var))
        if self.name == "ln":
            return _div(self.arg.diff(var), self.arg)
        raise NonDifferentiableError(f"cannot differentiate {self.name}() with respect to {var}")

    def __str__(self):
        return f"{self.name}({self.arg})"


@dataclass(frozen=True, eq=True)
class MinMax(Expression):
    name: str
    left: Expression
    right: Expression

    def children(self):
        return (self.left, self.right)

    def _compile(self):
        a, b = self.left._fn, self.right._fn
        pick = min if self.name == "min" else max
        return lambda env: pick(a(env), b(env))

    def _eval_array(self, env):
        pick = np.minimum if self.name == "min" else np.maximum
        return pick(self.left._eval_array(env), self.right._eval_array(env))

    def diff(self, var):
        if var not in self.free_vars:
            return ZERO
        raise NonDifferentiableError(f"cannot differentiate {self.name}() with respect to {var}")

    def __str__(self):
        return f"{self.name}({self.left}, {self.right})"


# --- folding constructors used by diff ---------------------------------------

def _add(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return Add(a, b)


def _sub(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if b == ZERO:
        return a
    if a == ZERO:
        return _neg(b)
    return Sub(a, b)


def _neg(a: Expression) -> Expression:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def _mul(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    # keep numeric factors in front: c1*(c2*x) -> (c1*c2)*x
    if isinstance(b, Const):
        a, b = b, a
    if isinstance(a, Const) and isinstance(b, Mul) and isinstance(b.left, Const):
        return _mul(Const(a.value * b.left.value), b.right)
    return Mul(a, b)


def _div(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    if a == ZERO:
        return ZERO
    if b == ONE:
        return a
    return Div(a, b)


def _pow(a: Expression, k: float) -> Expression:
    if k == 0.0:
        return ONE
    if k == 1.0:
        return a
    if isinstance(a, Const):
        try:
            return Const(Pow(a, k).evaluate({}))
        except DomainError:
            pass
    return Pow(a, k)


# --- parser ------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[^\W\d]\w*)"
    r"|(?P<op>[-+*/^(),]))"
)
_FUNCS = {"exp", "ln", "abs", "min", "max"}


class _Parser:
    def __init__(self, text: str, variables: frozenset[str], params: Mapping[str, float]):
        self.text = text
        self.variables = variables
        self.params = params
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
                raise ParseError(f"unexpected character {text[bad]!r}", text, bad)
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind == "end":
            what = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {value!r}, found {what}", self.text, pos)

    def error(self, tok, message=None):
        kind, val, pos = tok
        if message is None:
            message = "unexpected end of input" if kind == "end" else f"unexpected token {val!r}"
        return ParseError(message, self.text, pos)

    def parse(self) -> Expression:
        e = self.sum()
        tok = self.peek()
        if tok[0] != "end":
            raise self.error(tok)
        return e

    def sum(self):
        e = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.product()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def product(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in ("-", "+"):
            self.take()
            inner = self.unary()
            if tok[1] == "+":
                return inner
            return Const(-inner.value) if isinstance(inner, Const) else Neg(inner)
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.take()
            start = self.peek()[2]
            exponent = self.exponent()
            if exponent.free_vars:
                raise ParseError("variable in exponent is not supported", self.text, start)
            try:
                k = exponent.evaluate({})
            except DomainError as exc:
                raise ParseError(f"invalid exponent ({exc})", self.text, start) from None
            return Pow(base, k)
        return base

    def exponent(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in ("-", "+"):
            self.take()
            inner = self.exponent()
            return inner if tok[1] == "+" else Neg(inner)
        return self.power()

    def atom(self):
        tok = self.take()
        kind, val, pos = tok
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if val in _FUNCS:
                self.expect("(")
                first = self.sum()
                if val in ("min", "max"):
                    self.expect(",")
                    second = self.sum()
                    self.expect(")")
                    return MinMax(val, first, second)
                self.expect(")")
                return Func(val, first)
            if val in self.variables:
                return Var(val)
            if val in self.params:
                return Const(self.params[val])
            raise UnknownVariableError(val, self.text, pos, self.variables | set(self.params))
        if kind == "op" and val == "(":
            e = self.sum()
            self.expect(")")
            return e
        raise self.error(tok)


def parse_expr(text: str, variables: Iterable[str], params: Mapping[str, float] | None = None) -> Expression:
    """Parse ``text`` into an expression over ``variables``.

    ``params`` maps extra names to numeric constants substituted at parse time,
    so ``parse_expr("lam*(1+t)^nu", {"t"}, {"lam": 4, "nu": 1})`` is legal even
    though exponents must be constant.
    """
    variables = frozenset(variables)
    if not text or not text.strip():
        raise ParseError("empty expression", text or "", 0)
    if not variables:
        raise ValueError("variable set must be non-empty")
    clash = variables & _FUNCS
    if clash:
        raise ValueError(f"variable names shadow functions: {sorted(clash)}")
    return _Parser(text, variables, dict(params or {})).parse()


def eval_expr(e: Expression, bindings: Mapping[str, float]) -> float:
    return e.evaluate(bindings)


def diff_expr(e: Expression, var: str) -> Expression:
    """Symbolic derivative with constant folding.

    Raises :class:`NonDifferentiableError` for ``abs``, ``min`` and ``max``
    nodes that depend on ``var``.
    """
    return e.diff(var)
