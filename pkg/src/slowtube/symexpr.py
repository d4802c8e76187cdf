"""Scalar expression trees: parsing, interval evaluation, exact derivatives.

Right-hand sides of fast-slow systems are written as infix text over declared
names, numeric literals, ``+ - * / ^int``, ``sin``, ``cos``, ``exp``,
``sqrt`` and parentheses.  Trees are immutable after parsing; evaluation runs
either over interval environments (rigorous) or plain float environments
(fast, for predictors and sample points).  Differentiation is exact and
symbolic, with simplification limited to constant folding and 0/1 identities,
so interval evaluation of a derivative tree encloses the true derivative
range over a box.
"""

from __future__ import annotations

import math

from .interval import DomainError, IMatrix, Interval, IVector

__all__ = [
    "Expr",
    "Const",
    "Var",
    "ParseError",
    "UnknownSymbol",
    "parse",
    "diff",
    "jacobian",
]


class ParseError(ValueError):
    """Malformed expression text; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownSymbol(KeyError):
    """Expression references a name absent from the environment."""

    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"unknown symbol {self.name!r}"


class Expr:
    __slots__ = ()

    def eval(self, env: dict) -> Interval:
        raise NotImplementedError

    def eval_float(self, env: dict) -> float:
        raise NotImplementedError

    def free_vars(self) -> set:
        raise NotImplementedError


class Const(Expr):
    __slots__ = ("value", "_iv")

    def __init__(self, value: float):
        object.__setattr__(self, "value", float(value))
        object.__setattr__(self, "_iv", Interval.point(float(value)))

    def eval(self, env):
        return self._iv

    def eval_float(self, env):
        return self.value

    def free_vars(self):
        return set()

    def __repr__(self):
        return f"Const({self.value!r})"


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        object.__setattr__(self, "name", name)

    def eval(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise UnknownSymbol(self.name) from None

    def eval_float(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise UnknownSymbol(self.name) from None

    def free_vars(self):
        return {self.name}

    def __repr__(self):
        return f"Var({self.name!r})"


class _Binary(Expr):
    __slots__ = ("left", "right")

    def __init__(self, left: Expr, right: Expr):
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    def free_vars(self):
        return self.left.free_vars() | self.right.free_vars()

    def __repr__(self):
        return f"{type(self).__name__}({self.left!r}, {self.right!r})"


class Add(_Binary):
    __slots__ = ()

    def eval(self, env):
        return self.left.eval(env) + self.right.eval(env)

    def eval_float(self, env):
        return self.left.eval_float(env) + self.right.eval_float(env)


class Sub(_Binary):
    __slots__ = ()

    def eval(self, env):
        return self.left.eval(env) - self.right.eval(env)

    def eval_float(self, env):
        return self.left.eval_float(env) - self.right.eval_float(env)


class Mul(_Binary):
    __slots__ = ()

    def eval(self, env):
        return self.left.eval(env) * self.right.eval(env)

    def eval_float(self, env):
        return self.left.eval_float(env) * self.right.eval_float(env)


class Div(_Binary):
    __slots__ = ()

    def eval(self, env):
        denom = self.right.eval(env)
        if denom.contains_zero():
            raise DomainError(
                f"denominator encloses zero over the box: {denom!r}"
            )
        return self.left.eval(env) / denom

    def eval_float(self, env):
        return self.left.eval_float(env) / self.right.eval_float(env)


class _Unary(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        object.__setattr__(self, "arg", arg)

    def free_vars(self):
        return self.arg.free_vars()

    def __repr__(self):
        return f"{type(self).__name__}({self.arg!r})"


class Neg(_Unary):
    __slots__ = ()

    def eval(self, env):
        return -self.arg.eval(env)

    def eval_float(self, env):
        return -self.arg.eval_float(env)


class Sin(_Unary):
    __slots__ = ()

    def eval(self, env):
        return self.arg.eval(env).sin()

    def eval_float(self, env):
        return math.sin(self.arg.eval_float(env))


class Cos(_Unary):
    __slots__ = ()

    def eval(self, env):
        return self.arg.eval(env).cos()

    def eval_float(self, env):
        return math.cos(self.arg.eval_float(env))


class Exp(_Unary):
    __slots__ = ()

    def eval(self, env):
        return self.arg.eval(env).exp()

    def eval_float(self, env):
        return math.exp(self.arg.eval_float(env))


class Sqrt(_Unary):
    __slots__ = ()

    def eval(self, env):
        return self.arg.eval(env).sqrt()

    def eval_float(self, env):
        return math.sqrt(self.arg.eval_float(env))


class PowInt(Expr):
    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent: int):
        if exponent < 0:
            raise ValueError("PowInt exponent must be nonnegative")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exponent", int(exponent))

    def eval(self, env):
        return self.base.eval(env).pow_int(self.exponent)

    def eval_float(self, env):
        return self.base.eval_float(env) ** self.exponent

    def free_vars(self):
        return self.base.free_vars()

    def __repr__(self):
        return f"PowInt({self.base!r}, {self.exponent})"


_FUNCTIONS = {"sin": Sin, "cos": Cos, "exp": Exp, "sqrt": Sqrt}


# -- parser -------------------------------------------------------------------


class _Tokenizer:
    def __init__(self, src: str):
        self.src = src
        self.pos = 0
        self.tokens = []
        self._scan()
        self.idx = 0

    def _scan(self):
        src = self.src
        i = 0
        n = len(src)
        while i < n:
            c = src[i]
            if c.isspace():
                i += 1
                continue
            if c in "+-*/^()":
                self.tokens.append((c, c, i))
                i += 1
                continue
            if c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
                j = i
                while j < n and (src[j].isdigit() or src[j] == "."):
                    j += 1
                if j < n and src[j] in "eE":
                    k = j + 1
                    if k < n and src[k] in "+-":
                        k += 1
                    if k < n and src[k].isdigit():
                        j = k
                        while j < n and src[j].isdigit():
                            j += 1
                text = src[i:j]
                try:
                    value = float(text)
                except ValueError:
                    raise ParseError(f"bad number literal {text!r}", i)
                self.tokens.append(("num", value, i))
                i = j
                continue
            if c.isalpha() or c == "_":
                j = i
                while j < n and (src[j].isalnum() or src[j] == "_"):
                    j += 1
                self.tokens.append(("name", src[i:j], i))
                i = j
                continue
            raise ParseError(f"unexpected character {c!r}", i)
        self.tokens.append(("end", None, n))

    def peek(self):
        return self.tokens[self.idx]

    def next(self):
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok


def parse(src: str) -> Expr:
    """Parse infix expression text into an Expr tree."""
    tz = _Tokenizer(src)
    expr = _parse_sum(tz)
    kind, _, pos = tz.peek()
    if kind != "end":
        raise ParseError("trailing input", pos)
    return expr


def _parse_sum(tz) -> Expr:
    node = _parse_term(tz)
    while tz.peek()[0] in ("+", "-"):
        op, _, _ = tz.next()
        rhs = _parse_term(tz)
        node = Add(node, rhs) if op == "+" else Sub(node, rhs)
    return node


def _parse_term(tz) -> Expr:
    node = _parse_unary(tz)
    while tz.peek()[0] in ("*", "/"):
        op, _, _ = tz.next()
        rhs = _parse_unary(tz)
        node = Mul(node, rhs) if op == "*" else Div(node, rhs)
    return node


def _parse_unary(tz) -> Expr:
    if tz.peek()[0] == "-":
        tz.next()
        return Neg(_parse_unary(tz))
    if tz.peek()[0] == "+":
        tz.next()
        return _parse_unary(tz)
    return _parse_power(tz)


def _parse_power(tz) -> Expr:
    base = _parse_atom(tz)
    if tz.peek()[0] == "^":
        _, _, pos = tz.next()
        kind, value, kpos = tz.next()
        if kind != "num" or value != int(value) or value < 0:
            raise ParseError("exponent must be a nonnegative integer", kpos if kind == "num" else pos)
        return PowInt(base, int(value))
    return base


def _parse_atom(tz) -> Expr:
    kind, value, pos = tz.next()
    if kind == "num":
        return Const(value)
    if kind == "name":
        if tz.peek()[0] == "(":
            if value not in _FUNCTIONS:
                raise ParseError(f"unknown function {value!r}", pos)
            tz.next()
            arg = _parse_sum(tz)
            ckind, _, cpos = tz.next()
            if ckind != ")":
                raise ParseError("expected ')'", cpos)
            return _FUNCTIONS[value](arg)
        return Var(value)
    if kind == "(":
        node = _parse_sum(tz)
        ckind, _, cpos = tz.next()
        if ckind != ")":
            raise ParseError("expected ')'", cpos)
        return node
    raise ParseError(f"unexpected token {value!r}" if value else "unexpected end of input", pos)


# -- differentiation ----------------------------------------------------------

_ZERO = Const(0.0)
_ONE = Const(1.0)


def _is_const(e: Expr, v: float) -> bool:
    return isinstance(e, Const) and e.value == v


def _add(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Add(a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return _neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    return Sub(a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return _ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Mul(a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return _ZERO
    if _is_const(b, 1.0):
        return a
    return Div(a, b)


def _neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def diff(e: Expr, var: str) -> Expr:
    """Exact symbolic partial derivative of e with respect to var."""
    if isinstance(e, Const):
        return _ZERO
    if isinstance(e, Var):
        return _ONE if e.name == var else _ZERO
    if isinstance(e, Add):
        return _add(diff(e.left, var), diff(e.right, var))
    if isinstance(e, Sub):
        return _sub(diff(e.left, var), diff(e.right, var))
    if isinstance(e, Mul):
        return _add(
            _mul(diff(e.left, var), e.right), _mul(e.left, diff(e.right, var))
        )
    if isinstance(e, Div):
        num = _sub(
            _mul(diff(e.left, var), e.right), _mul(e.left, diff(e.right, var))
        )
        return _div(num, PowInt(e.right, 2))
    if isinstance(e, Neg):
        return _neg(diff(e.arg, var))
    if isinstance(e, PowInt):
        if e.exponent == 0:
            return _ZERO
        inner = diff(e.base, var)
        if e.exponent == 1:
            return inner
        return _mul(
            _mul(Const(float(e.exponent)), PowInt(e.base, e.exponent - 1)), inner
        )
    if isinstance(e, Sin):
        return _mul(Cos(e.arg), diff(e.arg, var))
    if isinstance(e, Cos):
        return _neg(_mul(Sin(e.arg), diff(e.arg, var)))
    if isinstance(e, Exp):
        return _mul(e, diff(e.arg, var))
    if isinstance(e, Sqrt):
        return _div(diff(e.arg, var), _mul(Const(2.0), e))
    raise TypeError(f"cannot differentiate {type(e).__name__}")


def jacobian(vec, variables, env: dict) -> IMatrix:
    """Interval enclosure of the Jacobian of vec w.r.t. variables over env."""
    rows = []
    for e in vec:
        rows.append([diff(e, v).eval(env) for v in variables])
    return IMatrix(rows)


def eval_vector(vec, env: dict) -> IVector:
    """Evaluate a list of expressions into an interval vector."""
    return IVector([e.eval(env) for e in vec])
