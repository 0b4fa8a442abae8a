"""Finite-difference cross-validation of the symbolic derivation."""

from fractions import Fraction
from math import cos

import pytest

from hypocheck.expr import Point, parse
from hypocheck.verify import (
    RESIDUAL_TOL, FdPlan, check_derived_pde, check_lemma31, fd_dt_lhs,
    fd_gradient_check, fd_residual,
)

from conftest import rational_points


# --------------------------------------------------------------------------
# Plans
# --------------------------------------------------------------------------

def test_plan_defaults_and_coercion():
    plan = FdPlan()
    assert plan.h == Fraction(1, 1000)
    assert plan.tol == 1e-6
    assert len(plan.resolved_points(2)) == 9
    assert FdPlan(h="1/500").h == Fraction(1, 500)
    assert FdPlan(h=0.5).h == Fraction(1, 2)  # via shortest repr, not binary


def test_plan_rejects_bad_values():
    with pytest.raises(ValueError):
        FdPlan(h=0)
    with pytest.raises(ValueError):
        FdPlan(tol=-1.0)


def test_plan_explicit_points_win():
    pts = rational_points(3, 4, 1)
    assert FdPlan(points=pts).resolved_points(1) == pts


# --------------------------------------------------------------------------
# Difference quotients of the averaged side
# --------------------------------------------------------------------------

def test_fd_dt_lhs_polynomial_is_exact(equations):
    # for polynomial data the second central difference IS the second
    # derivative, so the quotient is an exact rational
    eq = equations["quadratic"]
    x = Point((Fraction(2, 3),), "spatial")
    got = fd_dt_lhs(eq, parse("x1^2"), x, 2, FdPlan())
    assert got == Fraction(4)
    assert isinstance(got, Fraction)
    assert fd_dt_lhs(eq, parse("x1^2"), x, 1, FdPlan()) == 0  # even in t


def test_fd_dt_lhs_order_guard(equations):
    with pytest.raises(ValueError):
        fd_dt_lhs(equations["jensen"], parse("x1"),
                  Point((Fraction(0),), "spatial"), 3, FdPlan())


def test_fd_residual_flags_nonsolution(equations):
    eq = equations["quadratic"]
    assert fd_residual(eq, parse("x1^2"), FdPlan()) == 0
    bad = fd_residual(eq, parse("x1^2 + 1/100*x1^3"), FdPlan())
    assert float(bad) > RESIDUAL_TOL


# --------------------------------------------------------------------------
# Candidate validation against the derived operator
# --------------------------------------------------------------------------

SOLVED = ("jensen", "quadratic", "heatmv", "quad1d", "threeterms",
          "single_direction")


@pytest.mark.parametrize("name", SOLVED)
def test_candidates_validate_exactly(name, documents):
    doc = documents[name]
    rep = check_lemma31(doc.equation, doc.candidate)
    assert not rep.vacuous
    assert rep.passed
    assert rep.label == "f solves the equation on the validation grid"
    # rational data end to end: both routes are exactly zero
    assert rep.max_fd_deviation == 0
    assert rep.max_symbolic_deviation == 0
    assert rep.residual_max == 0


def test_vacuity_gate(documents):
    doc = documents["quadratic"]
    rep = check_lemma31(doc.equation, parse("x1^2 + 1/100*x1^3"))
    assert rep.vacuous
    assert not rep.passed
    assert rep.label == "vacuous: f is not a solution"
    assert float(rep.residual_max) > RESIDUAL_TOL


def test_rows_cover_plan_points(documents):
    doc = documents["jensen"]
    pts = rational_points(9, 5, 1)
    rep = check_lemma31(doc.equation, doc.candidate, FdPlan(points=pts))
    assert tuple(r.point for r in rep.rows) == pts


def test_check_derived_pde_alias(documents):
    doc = documents["jensen"]
    a = check_lemma31(doc.equation, doc.candidate)
    b = check_derived_pde(doc.equation, doc.candidate)
    assert a == b


# --------------------------------------------------------------------------
# Stencil order
# --------------------------------------------------------------------------

def test_gradient_check_exact_on_polynomials():
    pts = [p.bindings("x") for p in rational_points(17, 6, 1)]
    assert fd_gradient_check(parse("x1^2 - 3*x1"), "x1", pts) == 0.0


def test_gradient_check_second_order_convergence():
    # halving h divides a second-order stencil's error by about four
    e = parse("sin(x1)")
    pts = [{"x1": Fraction(1, 2)}, {"x1": Fraction(-4, 3)}]
    err_h = fd_gradient_check(e, "x1", pts, h=Fraction(1, 50))
    err_h2 = fd_gradient_check(e, "x1", pts, h=Fraction(1, 100))
    assert err_h > 0
    ratio = err_h / err_h2
    assert 3.5 <= ratio <= 4.5
    # and the leading error term matches sin'''= -cos within 5%
    predicted = (1 / 50) ** 2 / 6 * cos(0.5)
    assert abs(err_h - predicted) <= 0.05 * predicted
