"""Finite-difference cross-validation of the symbolic derivation.

The derived PDE is obtained by differentiating the equation twice in the
parameter; this module re-derives the same quantities with order-2 central
stencils and compares.  Steps are exact rationals, so for rational-closed
fixtures (polynomial data at rational points) the comparison is exact —
a polynomial's second difference quotient IS its second derivative.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .expr import (
    Expr, Number, Point, as_fraction, diff, evaluate,
)
from .feq import (
    DerivedOperator, Equation, apply_field_form, derive_pde, mean_value_lhs,
    residual,
)
from .hormander import SamplingPlan
from .vfield import x_names

__all__ = [
    "FdPlan", "Lemma31Report", "fd_dt_lhs", "fd_residual", "check_lemma31",
    "check_derived_pde", "fd_gradient_check",
]

RESIDUAL_TOL = 1e-9  # a candidate with larger equation defect is not a solution


@dataclass(frozen=True)
class FdPlan:
    """Central-difference plan: step, spatial sample points, tolerance."""

    h: Fraction = Fraction(1, 1000)
    points: tuple[Point, ...] | None = None
    tol: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "h", as_fraction(self.h))
        if self.h <= 0:
            raise ValueError("step size must be positive")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.points is not None:
            object.__setattr__(self, "points", tuple(self.points))

    def resolved_points(self, n: int) -> tuple[Point, ...]:
        if self.points is not None:
            return self.points
        return SamplingPlan().points(n)


def _t_point(eq: Equation, tau: Fraction) -> Point:
    coords = tuple(
        v + tau * w for v, w in zip(eq.t0.coords, eq.param_direction)
    )
    return Point(coords, "parameter")


def fd_dt_lhs(eq: Equation, f: Expr, x: Point, order: int, plan: FdPlan) -> Number:
    """Central difference, in the scalar parameter through the anchor, of
    the averaged side  sum_j a_j(x,t) f(x + phi_j(t)).
    """
    if order not in (1, 2):
        raise ValueError("stencil order must be 1 or 2")
    h = plan.h
    vp = mean_value_lhs(eq, f, x, _t_point(eq, h))
    vm = mean_value_lhs(eq, f, x, _t_point(eq, -h))
    if order == 1:
        return _div(_sub(vp, vm), 2 * h)
    v0 = mean_value_lhs(eq, f, x, _t_point(eq, Fraction(0)))
    return _div(_sub(_add(vp, vm), _mul2(v0)), h * h)


def _fd_dt2_scalar(eq: Equation, e: Expr, x: Point, plan: FdPlan) -> Number:
    # the same stencil applied to a plain expression in (x, t)
    h = plan.h
    xb = x.bindings("x")

    def at(tau: Fraction) -> Number:
        return evaluate(e, {**xb, **eq.t_binding(_t_point(eq, tau))})

    return _div(_sub(_add(at(h), at(-h)), _mul2(at(Fraction(0)))), h * h)


def _add(a: Number, b: Number) -> Number:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a + b
    return float(a) + float(b)


def _sub(a: Number, b: Number) -> Number:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a - b
    return float(a) - float(b)


def _mul2(a: Number) -> Number:
    return a + a if isinstance(a, Fraction) else 2.0 * float(a)


def _div(a: Number, b: Fraction) -> Number:
    if isinstance(a, Fraction):
        return a / b
    return float(a) / float(b)


def fd_residual(eq: Equation, f: Expr, plan: FdPlan) -> Number:
    """Max |equation defect| of f over plan points x and t in {t0-h, t0, t0+h}."""
    worst: Number = Fraction(0)
    taus = (-plan.h, Fraction(0), plan.h)
    for x in plan.resolved_points(eq.n):
        for tau in taus:
            r = residual(eq, f, x, _t_point(eq, tau))
            if abs(r) > abs(worst):
                worst = r
    return abs(worst)


@dataclass(frozen=True)
class Lemma31Row:
    point: Point = None  # type: ignore[assignment]
    fd_deviation: Number = 0       # |FD d2/dt2 of (lhs - b)| at the anchor
    symbolic_deviation: Number = 0  # |derived operator applied to f, minus g|


@dataclass(frozen=True)
class Lemma31Report:
    vacuous: bool = False
    label: str = ""
    residual_max: Number = 0
    rows: tuple[Lemma31Row, ...] = ()
    tol: float = 1e-6

    @property
    def max_fd_deviation(self) -> Number:
        return max((abs(r.fd_deviation) for r in self.rows), default=Fraction(0))

    @property
    def max_symbolic_deviation(self) -> Number:
        return max((abs(r.symbolic_deviation) for r in self.rows), default=Fraction(0))

    @property
    def passed(self) -> bool:
        return (
            not self.vacuous
            and float(self.max_fd_deviation) <= self.tol
            and float(self.max_symbolic_deviation) <= self.tol
        )


def check_lemma31(eq: Equation, f: Expr, plan: FdPlan | None = None) -> Lemma31Report:
    """Validate the derived PDE against a candidate solution f.

    Two independent routes per plan point: (i) a second central difference
    of the equation's averaged side minus the same stencil applied to b
    (pure numerics, no symbolic derivation involved), and (ii) the derived
    operator applied to f minus g, evaluated symbolically-then-pointwise.
    Both must vanish when f solves the equation; if it does not, the
    report is marked vacuous instead of judging the derivation.
    """
    plan = plan if plan is not None else FdPlan()
    pts = plan.resolved_points(eq.n)
    res = fd_residual(eq, f, plan)
    vacuous = float(abs(res)) > RESIDUAL_TOL
    op = derive_pde(eq)
    pde_applied = apply_field_form(op, f)
    rows = []
    for x in pts:
        xb = x.bindings("x")
        fd_lhs = fd_dt_lhs(eq, f, x, 2, plan)
        fd_b = _fd_dt2_scalar(eq, eq.b, x, plan)
        dev_fd = abs(_sub(fd_lhs, fd_b))
        sym = _sub(evaluate(pde_applied, xb), evaluate(op.g, xb))
        rows.append(Lemma31Row(x, dev_fd, abs(sym)))
    label = "vacuous: f is not a solution" if vacuous else "f solves the equation on the validation grid"
    return Lemma31Report(
        vacuous=vacuous,
        label=label,
        residual_max=res,
        rows=tuple(rows),
        tol=plan.tol,
    )


def check_derived_pde(eq: Equation, f: Expr, plan: FdPlan | None = None) -> Lemma31Report:
    """Alias for check_lemma31 under the package's public naming."""
    return check_lemma31(eq, f, plan)


def fd_gradient_check(
    e: Expr,
    v: str,
    points: Sequence[Mapping[str, Number]],
    h: Fraction | float = Fraction(1, 10000),
) -> float:
    """Max |symbolic derivative - central difference| over the bindings."""
    h = as_fraction(h)
    d = diff(e, v)
    worst = 0.0
    for binding in points:
        base = dict(binding)
        up = dict(base)
        dn = dict(base)
        up[v] = base[v] + h
        dn[v] = base[v] - h
        fd = _div(_sub(evaluate(e, up), evaluate(e, dn)), 2 * h)
        err = abs(_sub(evaluate(d, base), fd))
        worst = max(worst, float(err))
    return worst
