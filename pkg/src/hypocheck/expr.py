"""Symbolic expression core: exact rational trees, parsing, differentiation.

The node set is fixed and closed under differentiation: Const, Var, Add,
Mul, Pow (integer exponents), Sqrt, Exp, Log, Sin, Cos, Neg, Div.
Constants are exact ``fractions.Fraction`` values; evaluation returns an
exact rational whenever the tree and the bindings permit it, and a 64-bit
float otherwise.

``simplify`` applies a fixed rewrite list to a fixpoint:

* constant folding for every node type, including perfect-square roots
  and the special values exp(0), log(1), sin(0), cos(0)
* identity elements: dropped 0/1 terms, ``u^0 -> 1``, ``u^1 -> u``,
  ``0/v -> 0``, division by a constant folded into a coefficient
* flattening of nested sums/products, like-term collection in sums,
  collection of repeated factors into integer powers
* sign normalization: Neg pushed into literals, products and sums
* power collapsing: ``(u^a)^b -> u^(a*b)``, and ``sqrt(u)^2 -> u`` /
  ``sqrt(u^2) -> u`` only when ``u`` is known nonnegative

It is not a canonical form: structurally different but equal expressions
may survive.  The rewrites never change the value of an expression on its
domain of definition.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Union

Number = Union[Fraction, float]

__all__ = [
    "Expr", "Const", "Var", "Add", "Mul", "Pow", "Sqrt", "Exp", "Log",
    "Sin", "Cos", "Neg", "Div", "Point",
    "ExprError", "ParseError", "UnknownIdentifierError",
    "UnboundVariableError", "DomainError",
    "parse", "render", "diff", "directional_diff", "evaluate",
    "substitute", "subs", "simplify", "free_vars", "is_nonneg",
    "flagged_nonneg", "is_rational_closed", "add_all", "mul_all",
    "as_fraction", "ZERO", "ONE",
]


class ExprError(Exception):
    """Base class for expression-layer errors."""


class ParseError(ExprError):
    """Syntax error, carrying the byte offset and the expected tokens."""

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = expected
        hint = f" (expected one of: {', '.join(expected)})" if expected else ""
        super().__init__(f"{message} at offset {offset}{hint}")


class UnknownIdentifierError(ParseError):
    """Identifier is neither a declared variable nor a builtin function."""


class UnboundVariableError(ExprError):
    """Evaluation met a variable with no binding."""


class DomainError(ExprError):
    """Evaluation left the domain (negative sqrt, log of nonpositive, x/0)."""


# --------------------------------------------------------------------------
# Nodes.  All immutable; equality and hashing ignore the nonneg flag, which
# is assumption metadata rather than structure.
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Expr:
    nonneg: bool = field(default=False, compare=False, repr=False, kw_only=True)

    def __str__(self) -> str:
        return render(self)

    def __add__(self, other: "Expr") -> "Expr":
        return Add((self, other))

    def __sub__(self, other: "Expr") -> "Expr":
        return Add((self, Neg(other)))

    def __mul__(self, other: "Expr") -> "Expr":
        return Mul((self, other))

    def __truediv__(self, other: "Expr") -> "Expr":
        return Div(self, other)

    def __pow__(self, k: int) -> "Expr":
        return Pow(self, k)

    def __neg__(self) -> "Expr":
        return Neg(self)


@dataclass(frozen=True)
class Const(Expr):
    value: Fraction = Fraction(0)

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Var(Expr):
    name: str = ""

    def __post_init__(self):
        if not _is_var_name(self.name):
            raise ValueError(f"variable name outside the x/t/z namespace: {self.name!r}")


@dataclass(frozen=True)
class Add(Expr):
    args: tuple[Expr, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if not self.args:
            raise ValueError("Add needs at least one argument")


@dataclass(frozen=True)
class Mul(Expr):
    args: tuple[Expr, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if not self.args:
            raise ValueError("Mul needs at least one argument")


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr = None  # type: ignore[assignment]
    exponent: int = 1

    def __post_init__(self):
        if not isinstance(self.exponent, int) or isinstance(self.exponent, bool):
            raise ValueError("Pow exponent must be a plain integer")


@dataclass(frozen=True)
class Sqrt(Expr):
    arg: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Exp(Expr):
    arg: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Log(Expr):
    arg: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Sin(Expr):
    arg: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Cos(Expr):
    arg: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Div(Expr):
    num: Expr = None  # type: ignore[assignment]
    den: Expr = None  # type: ignore[assignment]


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))

_UNARY_TYPES = (Sqrt, Exp, Log, Sin, Cos, Neg)


def _is_var_name(name: str) -> bool:
    # fixed namespace: x1..xn, t1..tr, z1..zs
    return (
        len(name) >= 2
        and name[0] in "xtz"
        and name[1] != "0"
        and name[1:].isdigit()
    )


def _children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, (Add, Mul)):
        return e.args
    if isinstance(e, Pow):
        return (e.base,)
    if isinstance(e, _UNARY_TYPES):
        return (e.arg,)
    if isinstance(e, Div):
        return (e.num, e.den)
    return ()


def free_vars(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset((e.name,))
    out: frozenset[str] = frozenset()
    for c in _children(e):
        out |= free_vars(c)
    return out


def is_rational_closed(e: Expr) -> bool:
    """True when evaluation at rational bindings stays exact.

    Conservative structural test: any surviving Sqrt/Exp/Log/Sin/Cos node
    may force the float path.
    """
    if isinstance(e, (Sqrt, Exp, Log, Sin, Cos)):
        return False
    return all(is_rational_closed(c) for c in _children(e))


def as_fraction(v) -> Fraction:
    """Exact conversion of int/Fraction/decimal-string/'p/q'-string."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        # via the shortest repr so that TOML 0.5 means exactly 1/2
        return Fraction(str(v))
    if isinstance(v, str):
        return Fraction(v.strip())
    raise TypeError(f"cannot convert {v!r} to an exact rational")


def flagged_nonneg(e: Expr) -> Expr:
    """Return ``e`` carrying the nonnegativity assumption flag.

    The flag is what licenses ``sqrt(u)^2 -> u``; it is set for the
    coefficient functions asserted nonnegative by the equation data.
    """
    if e.nonneg:
        return e
    return dataclasses.replace(e, nonneg=True)


def is_nonneg(e: Expr) -> bool:
    """Structural nonnegativity, or the explicit assumption flag."""
    if isinstance(e, Const):
        return e.value >= 0
    if e.nonneg:
        return True
    if isinstance(e, (Sqrt, Exp)):
        return True
    if isinstance(e, Pow):
        return e.exponent % 2 == 0 or is_nonneg(e.base)
    if isinstance(e, (Add, Mul)):
        return all(is_nonneg(a) for a in e.args)
    if isinstance(e, Div):
        return is_nonneg(e.num) and is_nonneg(e.den)
    return False


def add_all(args: Iterable[Expr]) -> Expr:
    args = tuple(args)
    if not args:
        return ZERO
    if len(args) == 1:
        return args[0]
    return Add(args)


def mul_all(args: Iterable[Expr]) -> Expr:
    args = tuple(args)
    if not args:
        return ONE
    if len(args) == 1:
        return args[0]
    return Mul(args)


# --------------------------------------------------------------------------
# Points
# --------------------------------------------------------------------------

_POINT_KINDS = ("spatial", "parameter", "joint")


@dataclass(frozen=True)
class Point:
    """An ordered coordinate tuple tagged by which space it lives in."""

    coords: tuple[Number, ...] = ()
    kind: str = "spatial"

    def __post_init__(self):
        if self.kind not in _POINT_KINDS:
            raise ValueError(f"unknown point kind {self.kind!r}")
        coerced = tuple(
            c if isinstance(c, (Fraction, float)) else Fraction(c) for c in self.coords
        )
        object.__setattr__(self, "coords", coerced)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self.coords)

    def bindings(self, prefix: str = "x") -> dict[str, Number]:
        return {f"{prefix}{i + 1}": c for i, c in enumerate(self.coords)}


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

_FUNCTIONS = {"sqrt": Sqrt, "exp": Exp, "log": Log, "sin": Sin, "cos": Cos}


class _Lexer:
    def __init__(self, source: str):
        self.src = source
        self.pos = 0
        self.tokens: list[tuple[str, str, int]] = []  # (kind, text, offset)
        self._scan()
        self.idx = 0

    def _scan(self):
        src, n = self.src, len(self.src)
        i = 0
        while i < n:
            ch = src[i]
            if ch.isspace():
                i += 1
                continue
            if ch.isdigit():
                j = i
                while j < n and src[j].isdigit():
                    j += 1
                self.tokens.append(("int", src[i:j], i))
                i = j
                continue
            if ch.isalpha() or ch == "_":
                j = i
                while j < n and (src[j].isalnum() or src[j] == "_"):
                    j += 1
                self.tokens.append(("ident", src[i:j], i))
                i = j
                continue
            if ch in "+-*/^()":
                self.tokens.append((ch, ch, i))
                i += 1
                continue
            raise ParseError(f"unexpected character {ch!r}", i)
        self.tokens.append(("end", "", n))

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.idx]

    def next(self) -> tuple[str, str, int]:
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def expect(self, kind: str) -> tuple[str, str, int]:
        tok = self.peek()
        if tok[0] != kind:
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2], (kind,))
        return self.next()


class _Parser:
    """Recursive descent over: sums > products/quotients > unary minus > powers.

    ``^`` binds tightest and is right-associative; its exponent must be an
    (optionally negated) integer literal, folded to a single integer.
    """

    def __init__(self, source: str, allowed):
        self.lex = _Lexer(source)
        self.allowed = frozenset(allowed) if allowed is not None else None

    def parse(self) -> Expr:
        e = self.sum()
        tok = self.lex.peek()
        if tok[0] != "end":
            raise ParseError(
                f"trailing input {tok[1]!r}", tok[2], ("+", "-", "*", "/", "^", "end")
            )
        return e

    def sum(self) -> Expr:
        args = [self.product()]
        while self.lex.peek()[0] in ("+", "-"):
            op = self.lex.next()[0]
            rhs = self.product()
            args.append(rhs if op == "+" else _negate_literal(rhs))
        return add_all(args)

    def product(self) -> Expr:
        acc = self.unary()
        factors = [acc]
        while self.lex.peek()[0] in ("*", "/"):
            op = self.lex.next()[0]
            rhs = self.unary()
            if op == "*":
                factors.append(rhs)
            else:
                num = mul_all(factors)
                if isinstance(num, Const) and isinstance(rhs, Const) and rhs.value != 0:
                    factors = [Const(num.value / rhs.value)]
                else:
                    factors = [Div(num, rhs)]
        return mul_all(factors)

    def unary(self) -> Expr:
        if self.lex.peek()[0] == "-":
            self.lex.next()
            return _negate_literal(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.lex.peek()[0] == "^":
            self.lex.next()
            return Pow(base, self.exponent())
        return base

    def exponent(self) -> int:
        sign = 1
        if self.lex.peek()[0] == "-":
            self.lex.next()
            sign = -1
        tok = self.lex.expect("int")
        value = int(tok[1])
        if self.lex.peek()[0] == "^":  # right-associative integer tower
            self.lex.next()
            value = value ** self.exponent()
        return sign * value

    def atom(self) -> Expr:
        kind, text, offset = self.lex.peek()
        if kind == "int":
            self.lex.next()
            return Const(Fraction(int(text)))
        if kind == "(":
            self.lex.next()
            e = self.sum()
            self.lex.expect(")")
            return e
        if kind == "ident":
            self.lex.next()
            if text in _FUNCTIONS:
                self.lex.expect("(")
                arg = self.sum()
                self.lex.expect(")")
                return _FUNCTIONS[text](arg)
            if not _is_var_name(text):
                raise UnknownIdentifierError(f"unknown identifier {text!r}", offset)
            if self.allowed is not None and text not in self.allowed:
                raise UnknownIdentifierError(
                    f"undeclared variable {text!r}", offset, tuple(sorted(self.allowed))
                )
            return Var(text)
        raise ParseError(
            f"unexpected token {text or kind!r}", offset,
            ("int", "ident", "(", "-"),
        )


def _negate_literal(e: Expr) -> Expr:
    # Sign absorbs into a leading numeric literal; otherwise a Neg wrapper.
    if isinstance(e, Const):
        return Const(-e.value)
    if isinstance(e, Mul) and isinstance(e.args[0], Const):
        return Mul((Const(-e.args[0].value),) + e.args[1:])
    return Neg(e)


def parse(source: str, allowed=None) -> Expr:
    """Parse ``source`` to an Expr.

    Purely syntactic apart from literal-level folds: a quotient of integer
    literals becomes a rational constant (so ``1/2`` is the number 1/2) and
    unary minus is absorbed into literals.  ``allowed`` optionally narrows
    the admissible variable names; identifiers outside the x/t/z namespace
    are always rejected.
    """
    return _Parser(source, allowed).parse()


# --------------------------------------------------------------------------
# Rendering (inverse of parse on simplified trees)
# --------------------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 10, 20, 30, 40, 50


def render(e: Expr) -> str:
    """Grammar-conformant text for ``e``; parse(render(simplify(e)))
    reproduces simplify(e) structurally."""
    return _render(e, 0)


def _const_str(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _prec(e: Expr) -> int:
    if isinstance(e, Const):
        if e.value < 0:
            return _PREC_ADD
        return _PREC_ATOM if e.value.denominator == 1 else _PREC_MUL
    if isinstance(e, Add):
        return _PREC_ADD
    if isinstance(e, (Mul, Div)):
        return _PREC_MUL
    if isinstance(e, Neg):
        return _PREC_UNARY
    if isinstance(e, Pow):
        return _PREC_POW
    return _PREC_ATOM


def _split_sign(e: Expr) -> tuple[bool, Expr]:
    if isinstance(e, Const) and e.value < 0:
        return True, Const(-e.value)
    if isinstance(e, Neg):
        return True, e.arg
    if isinstance(e, Mul) and isinstance(e.args[0], Const) and e.args[0].value < 0:
        return True, _negate_literal(e)
    return False, e


def _render(e: Expr, parent: int) -> str:
    s, prec = _render_inner(e)
    if prec < parent:
        return f"({s})"
    return s


def _render_inner(e: Expr) -> tuple[str, int]:
    if isinstance(e, Const):
        v = e.value
        if v < 0:
            return "-" + _const_str(-v), _PREC_ADD
        return _const_str(v), _prec(e)
    if isinstance(e, Var):
        return e.name, _PREC_ATOM
    if isinstance(e, Add):
        parts = []
        for i, a in enumerate(e.args):
            negative, mag = _split_sign(a)
            body = _render(mag, _PREC_ADD + 1)
            if i == 0:
                parts.append(("-" if negative else "") + body)
            else:
                parts.append((" - " if negative else " + ") + body)
        return "".join(parts), _PREC_ADD
    if isinstance(e, Mul):
        negative, mag = _split_sign(e)
        if negative:
            body, _ = _render_inner(mag)
            return "-" + body, _PREC_UNARY
        parts = [_render(e.args[0], _PREC_MUL)]
        parts += [_render(a, _PREC_MUL + 1) for a in e.args[1:]]
        return "*".join(parts), _PREC_MUL
    if isinstance(e, Div):
        return (
            _render(e.num, _PREC_MUL) + "/" + _render(e.den, _PREC_MUL + 1),
            _PREC_MUL,
        )
    if isinstance(e, Neg):
        return "-" + _render(e.arg, _PREC_UNARY + 1), _PREC_UNARY
    if isinstance(e, Pow):
        return (
            _render(e.base, _PREC_POW + 1) + "^" + str(e.exponent),
            _PREC_POW,
        )
    for name, cls in _FUNCTIONS.items():
        if isinstance(e, cls):
            return f"{name}({_render(e.arg, 0)})", _PREC_ATOM
    raise TypeError(f"cannot render {e!r}")


# --------------------------------------------------------------------------
# Differentiation
# --------------------------------------------------------------------------

def diff(e: Expr, v: str) -> Expr:
    """Exact symbolic derivative with respect to variable name ``v``."""
    return simplify(_diff(e, v))


def _diff(e: Expr, v: str) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == v else ZERO
    if isinstance(e, Add):
        return Add(tuple(_diff(a, v) for a in e.args))
    if isinstance(e, Mul):
        terms = []
        for i in range(len(e.args)):
            factors = e.args[:i] + (_diff(e.args[i], v),) + e.args[i + 1:]
            terms.append(Mul(factors))
        return Add(tuple(terms))
    if isinstance(e, Pow):
        return Mul((Const(Fraction(e.exponent)), Pow(e.base, e.exponent - 1), _diff(e.base, v)))
    if isinstance(e, Sqrt):
        return Div(_diff(e.arg, v), Mul((Const(Fraction(2)), Sqrt(e.arg))))
    if isinstance(e, Exp):
        return Mul((_diff(e.arg, v), Exp(e.arg)))
    if isinstance(e, Log):
        return Div(_diff(e.arg, v), e.arg)
    if isinstance(e, Sin):
        return Mul((_diff(e.arg, v), Cos(e.arg)))
    if isinstance(e, Cos):
        return Neg(Mul((_diff(e.arg, v), Sin(e.arg))))
    if isinstance(e, Neg):
        return Neg(_diff(e.arg, v))
    if isinstance(e, Div):
        num = Add((Mul((_diff(e.num, v), e.den)), Neg(Mul((e.num, _diff(e.den, v))))))
        return Div(num, Pow(e.den, 2))
    raise TypeError(f"cannot differentiate {e!r}")


def directional_diff(e: Expr, names: Iterable[str], weights: Iterable[Fraction]) -> Expr:
    """Derivative of ``e`` along the direction given by (names, weights)."""
    terms = [
        Mul((Const(Fraction(w)), _diff(e, name)))
        for name, w in zip(names, weights)
        if w != 0
    ]
    return simplify(add_all(terms)) if terms else ZERO


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

def _perfect_sqrt(v: Fraction) -> Fraction | None:
    rn = math.isqrt(v.numerator)
    rd = math.isqrt(v.denominator)
    if rn * rn == v.numerator and rd * rd == v.denominator:
        return Fraction(rn, rd)
    return None


def evaluate(e: Expr, binding: Mapping[str, Number]) -> Number:
    """Evaluate with exact rationals wherever possible, else 64-bit floats.

    Raises UnboundVariableError for a free variable without a binding, and
    DomainError on sqrt of a negative, log of a nonpositive, division by
    zero, or float overflow.
    """
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            v = binding[e.name]
        except KeyError:
            raise UnboundVariableError(f"unbound variable {e.name}") from None
        return Fraction(v) if isinstance(v, int) else v
    if isinstance(e, Add):
        total: Number = Fraction(0)
        for a in e.args:
            total = _num_add(total, evaluate(a, binding))
        return total
    if isinstance(e, Mul):
        prod: Number = Fraction(1)
        for a in e.args:
            prod = _num_mul(prod, evaluate(a, binding))
        return prod
    if isinstance(e, Pow):
        base = evaluate(e.base, binding)
        if e.exponent < 0 and base == 0:
            raise DomainError("zero base with negative exponent")
        try:
            return base ** e.exponent
        except OverflowError:
            raise DomainError("overflow in power") from None
    if isinstance(e, Sqrt):
        v = evaluate(e.arg, binding)
        if v < 0:
            raise DomainError(f"sqrt of negative value {v}")
        if isinstance(v, Fraction):
            root = _perfect_sqrt(v)
            if root is not None:
                return root
            v = float(v)
        return math.sqrt(v)
    if isinstance(e, Exp):
        v = evaluate(e.arg, binding)
        if v == 0:
            return Fraction(1)
        try:
            return math.exp(float(v))
        except OverflowError:
            raise DomainError("overflow in exp") from None
    if isinstance(e, Log):
        v = evaluate(e.arg, binding)
        if v <= 0:
            raise DomainError(f"log of nonpositive value {v}")
        if v == 1:
            return Fraction(0)
        return math.log(float(v))
    if isinstance(e, Sin):
        v = evaluate(e.arg, binding)
        return Fraction(0) if v == 0 else math.sin(float(v))
    if isinstance(e, Cos):
        v = evaluate(e.arg, binding)
        return Fraction(1) if v == 0 else math.cos(float(v))
    if isinstance(e, Neg):
        return -evaluate(e.arg, binding)
    if isinstance(e, Div):
        den = evaluate(e.den, binding)
        if den == 0:
            raise DomainError("division by zero")
        num = evaluate(e.num, binding)
        if isinstance(num, Fraction) and isinstance(den, Fraction):
            return num / den
        return float(num) / float(den)
    raise TypeError(f"cannot evaluate {e!r}")


def _num_add(a: Number, b: Number) -> Number:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a + b
    return float(a) + float(b)


def _num_mul(a: Number, b: Number) -> Number:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a * b
    return float(a) * float(b)


# --------------------------------------------------------------------------
# Substitution
# --------------------------------------------------------------------------

def substitute(e: Expr, v: str, replacement: Expr) -> Expr:
    """Replace every occurrence of variable ``v``; result is simplified."""
    return simplify(_subs(e, {v: replacement}))


def subs(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Simultaneous substitution of several variables; result simplified."""
    if not mapping:
        return simplify(e)
    return simplify(_subs(e, mapping))


def _subs(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Const):
        return e
    kids = _children(e)
    new_kids = tuple(_subs(c, mapping) for c in kids)
    if new_kids == kids:
        return e
    return _rebuild(e, new_kids)


def _rebuild(e: Expr, kids: tuple[Expr, ...]) -> Expr:
    flag = {"nonneg": e.nonneg}
    if isinstance(e, Add):
        return Add(kids, **flag)
    if isinstance(e, Mul):
        return Mul(kids, **flag)
    if isinstance(e, Pow):
        return Pow(kids[0], e.exponent, **flag)
    if isinstance(e, Div):
        return Div(kids[0], kids[1], **flag)
    for cls in _UNARY_TYPES:
        if isinstance(e, cls):
            return cls(kids[0], **flag)
    return e


# --------------------------------------------------------------------------
# Simplification
# --------------------------------------------------------------------------

_MAX_PASSES = 64


def simplify(e: Expr) -> Expr:
    """Apply the module's rewrite list to a fixpoint (idempotent)."""
    for _ in range(_MAX_PASSES):
        e2 = _pass(e)
        if e2 == e:
            return e2
        e = e2
    raise RuntimeError("simplify did not reach a fixpoint")  # rewrite-set bug


def _pass(e: Expr) -> Expr:
    kids = _children(e)
    if kids:
        new_kids = tuple(_pass(c) for c in kids)
        if new_kids != kids:
            e = _rebuild(e, new_kids)
    out = _rewrite(e)
    if e.nonneg and not out.nonneg and not isinstance(out, Const):
        out = flagged_nonneg(out)
    return out


def _rewrite(e: Expr) -> Expr:
    if isinstance(e, Add):
        return _rewrite_add(e)
    if isinstance(e, Mul):
        return _rewrite_mul(e)
    if isinstance(e, Pow):
        return _rewrite_pow(e)
    if isinstance(e, Neg):
        return _rewrite_neg(e)
    if isinstance(e, Div):
        return _rewrite_div(e)
    if isinstance(e, Sqrt):
        return _rewrite_sqrt(e)
    if isinstance(e, Exp):
        return ONE if e.arg == ZERO else e
    if isinstance(e, Log):
        return ZERO if e.arg == ONE else e
    if isinstance(e, Sin):
        return ZERO if e.arg == ZERO else e
    if isinstance(e, Cos):
        return ONE if e.arg == ZERO else e
    return e


_TYPE_RANK = {
    Const: 0, Var: 1, Pow: 2, Sqrt: 3, Exp: 4, Log: 5,
    Sin: 6, Cos: 7, Mul: 8, Add: 9, Div: 10, Neg: 11,
}


def _sort_key(e: Expr) -> tuple[int, str]:
    # deterministic total order so commuted operands collapse structurally
    return (_TYPE_RANK[type(e)], render(e))


def _coeff_term(a: Expr) -> tuple[Fraction, Expr | None]:
    # split a summand into (rational coefficient, monomial-or-None)
    if isinstance(a, Const):
        return a.value, None
    if isinstance(a, Neg):
        c, m = _coeff_term(a.arg)
        return -c, m
    if isinstance(a, Mul) and isinstance(a.args[0], Const):
        rest = a.args[1:]
        return a.args[0].value, (rest[0] if len(rest) == 1 else Mul(rest))
    if isinstance(a, Div):
        c, m = _coeff_term(a.num)
        return c, Div(ONE if m is None else m, a.den)
    return Fraction(1), a


def _make_term(c: Fraction, m: Expr) -> Expr:
    if isinstance(m, Div):
        num = Const(c) if m.num == ONE else _make_term(c, m.num)
        return Div(num, m.den)
    if c == 1:
        return m
    if c == -1:
        return Neg(m)
    if isinstance(m, Mul):
        return Mul((Const(c),) + m.args)
    return Mul((Const(c), m))


def _rewrite_add(e: Add) -> Expr:
    const = Fraction(0)
    order: list[Expr] = []
    coeffs: dict[Expr, Fraction] = {}

    def collect(part: Expr, scale: Fraction) -> None:
        nonlocal const
        if isinstance(part, Add):
            for sub in part.args:
                collect(sub, scale)
            return
        c, m = _coeff_term(part)
        c *= scale
        if m is None:
            const += c
        elif isinstance(m, Add):
            # distribute a rational coefficient over a sum so cross terms
            # from factored forms can cancel; no growth beyond the sum size
            collect(m, c)
        else:
            if m not in coeffs:
                order.append(m)
                coeffs[m] = Fraction(0)
            coeffs[m] += c

    for a in e.args:
        collect(a, Fraction(1))
    order.sort(key=_sort_key)
    terms = [_make_term(coeffs[m], m) for m in order if coeffs[m] != 0]
    if const != 0:
        terms.append(Const(const))
    return add_all(terms)


def _as_ratio(e: Expr) -> tuple[Fraction, dict[Expr, int], list[Expr]] | None:
    """Signed-exponent factorization of a product/quotient tree.

    Returns (rational constant, base -> exponent, insertion order), or None
    when a structurally zero denominator blocks the factorization (the node
    is left alone so evaluation can reject it).
    """
    const = Fraction(1)
    order: list[Expr] = []
    exps: dict[Expr, int] = {}
    ok = True

    def feed(a: Expr, m: int) -> None:
        nonlocal const, ok
        if not ok:
            return
        if isinstance(a, Neg):
            const *= Fraction(-1) ** m
            feed(a.arg, m)
        elif isinstance(a, Const):
            if a.value == 0 and m < 0:
                ok = False
                return
            const *= a.value ** m
        elif isinstance(a, Mul):
            for sub in a.args:
                feed(sub, m)
        elif isinstance(a, Div):
            feed(a.num, m)
            feed(a.den, -m)
        elif isinstance(a, Pow):
            feed(a.base, m * a.exponent)
        else:
            if a not in exps:
                order.append(a)
                exps[a] = 0
            exps[a] += m

    feed(e, 1)
    return (const, exps, order) if ok else None


def _rebuild_ratio(const: Fraction, exps: dict[Expr, int], order: list[Expr]) -> Expr:
    if const == 0:
        return ZERO
    bases = sorted((b for b in order if exps[b] != 0), key=_sort_key)
    num_factors = [b if exps[b] == 1 else Pow(b, exps[b]) for b in bases if exps[b] > 0]
    den_factors = [b if exps[b] == -1 else Pow(b, -exps[b]) for b in bases if exps[b] < 0]
    if not num_factors:
        num: Expr = Const(const)
    else:
        body = mul_all(num_factors)
        if const == 1:
            num = body
        elif const == -1:
            num = Neg(body)
        elif isinstance(body, Mul):
            num = Mul((Const(const),) + body.args)
        else:
            num = Mul((Const(const), body))
    if not den_factors:
        return num
    return Div(num, mul_all(den_factors))


def _rewrite_mul(e: Mul) -> Expr:
    ratio = _as_ratio(e)
    return e if ratio is None else _rebuild_ratio(*ratio)


def _rewrite_pow(e: Pow) -> Expr:
    base, k = e.base, e.exponent
    if k == 0:
        return ONE
    if k == 1:
        return base
    if isinstance(base, Const):
        if base.value == 0 and k < 0:
            return e  # undefined; left for evaluation to reject
        return Const(base.value ** k)
    if isinstance(base, Pow):
        return Pow(base.base, base.exponent * k)
    if isinstance(base, Neg):
        inner = Pow(base.arg, k)
        return inner if k % 2 == 0 else Neg(inner)
    if isinstance(base, Div):
        if k > 0:
            return Div(Pow(base.num, k), Pow(base.den, k))
        return Div(Pow(base.den, -k), Pow(base.num, -k))
    if isinstance(base, Sqrt) and k % 2 == 0 and is_nonneg(base.arg):
        half = k // 2
        return base.arg if half == 1 else Pow(base.arg, half)
    if k < 0:
        return Div(ONE, Pow(base, -k))
    return e


def _rewrite_neg(e: Neg) -> Expr:
    a = e.arg
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    if isinstance(a, Add):
        return Add(tuple(Neg(x) for x in a.args))
    if isinstance(a, Mul) and isinstance(a.args[0], Const):
        return Mul((Const(-a.args[0].value),) + a.args[1:])
    if isinstance(a, Div):
        return Div(Neg(a.num), a.den)
    return e


def _rewrite_div(e: Div) -> Expr:
    ratio = _as_ratio(e)
    return e if ratio is None else _rebuild_ratio(*ratio)


def _rewrite_sqrt(e: Sqrt) -> Expr:
    a = e.arg
    if isinstance(a, Const) and a.value >= 0:
        root = _perfect_sqrt(a.value)
        if root is not None:
            return Const(root)
    if isinstance(a, Pow) and a.exponent % 2 == 0 and a.exponent > 0 and is_nonneg(a.base):
        half = a.exponent // 2
        return a.base if half == 1 else Pow(a.base, half)
    return e
