"""Acceptance gate: one test per shipped criterion, at the stated tolerance.

Each criterion also contributes an ``ACCEPTANCE n: PASS/FAIL`` line to the
terminal summary (see conftest).  Criteria 1-4 additionally assert their
sub-second runtime budget.
"""

import time
from fractions import Fraction
from random import Random

import numpy as np
import pytest

from hypocheck.cli import load_document, main, run_selftest
from hypocheck.expr import (
    ZERO, add_all, evaluate, mul_all, parse, render, simplify,
)
from hypocheck.feq import (
    Equation, Term, VERDICT_PASS, derive_pde, run_checks,
)
from hypocheck.hormander import SamplingPlan, check_spanning, generate_brackets
from hypocheck.verify import check_lemma31, fd_gradient_check
from hypocheck.vfield import VectorField, apply, lie_bracket

from conftest import EQUATION_FIXTURES, FIELD_FIXTURES, fixture_path, rational_points


class _budget:
    """Assert the block under ``with`` finishes inside the time budget."""

    def __init__(self, seconds: float):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, *rest):
        self.elapsed = time.perf_counter() - self.t0
        if exc_type is None:
            assert self.elapsed < self.seconds, (
                f"runtime budget exceeded: {self.elapsed:.3f}s"
            )
        return False


def _render_matrix(op):
    return [[render(e) for e in row] for row in op.a_matrix]


# --------------------------------------------------------------------------
# 1. Two-point average equation: first-derivative certificate + operator
# --------------------------------------------------------------------------

def test_criterion_1_two_point_average():
    with _budget(1.0):
        doc = load_document(fixture_path("jensen"))
        rep = run_checks(doc.equation, doc.config.sampling)
        assert rep.swiatak.verdict == VERDICT_PASS
        op = derive_pde(doc.equation)
        assert _render_matrix(op) == [["2"]]          # exactly 2 d^2/dx^2
        assert op.c == ZERO and op.g == ZERO
        assert [render(e) for e in op.b_vector] == ["0"]
    assert main(["check", str(fixture_path("jensen"))]) == 0


# --------------------------------------------------------------------------
# 2. Inhomogeneous square equation: g(x) = 4, candidate validation, vacuity
# --------------------------------------------------------------------------

def test_criterion_2_square_inhomogeneity():
    with _budget(1.0):
        doc = load_document(fixture_path("quadratic"))
        op = derive_pde(doc.equation)
        assert render(op.g) == "4"                    # exact, not approximate
        rep = check_lemma31(doc.equation, doc.candidate)
        assert not rep.vacuous
        assert float(rep.max_fd_deviation) <= 1e-12
        assert float(rep.max_symbolic_deviation) <= 1e-12
        perturbed = check_lemma31(doc.equation, parse("x1^2 + 1/100*x1^3"))
        assert perturbed.vacuous
        assert not perturbed.passed


# --------------------------------------------------------------------------
# 3. Parabolic average equation: first derivatives fail, curvature rescues
# --------------------------------------------------------------------------

def test_criterion_3_parabolic_average():
    with _budget(1.0):
        doc = load_document(fixture_path("heatmv"))
        rep = run_checks(doc.equation, doc.config.sampling)
        assert rep.swiatak.verdict == "fail_on_samples"
        assert "rank 1" in rep.swiatak.detail
        assert rep.theorem23.verdict == VERDICT_PASS
        assert "rank 2" in rep.theorem23.detail
        op = derive_pde(doc.equation)
        assert _render_matrix(op) == [["1", "0"], ["0", "0"]]
        assert [render(e) for e in op.b_vector] == ["0", "2"]
        assert op.c == ZERO                           # operator is d^2_x1 + 2 d_x2


# --------------------------------------------------------------------------
# 4. Bracket oracle: the canonical degenerate pair (d_x1, x1 d_x2)
# --------------------------------------------------------------------------

def test_criterion_4_bracket_oracle():
    with _budget(1.0):
        doc = load_document(fixture_path("grushin"))
        plan = SamplingPlan(grid=5)

        shallow = check_spanning(generate_brackets(doc.raw_fields, 0), plan)
        assert not shallow.spanning_everywhere
        assert {p.coords for p in shallow.failing_points} == {
            (Fraction(0), Fraction(-1)), (Fraction(0), Fraction(-1, 2)),
            (Fraction(0), Fraction(0)), (Fraction(0), Fraction(1, 2)),
            (Fraction(0), Fraction(1)),
        }

        deep = check_spanning(generate_brackets(doc.raw_fields, 1), plan)
        assert deep.spanning_everywhere
        assert len(deep.records) == 25
        origin = next(
            r for r in deep.records if r.point.coords == (Fraction(0), Fraction(0))
        )
        assert origin.witness_labels == ("X1", "[X1,X2]")


# --------------------------------------------------------------------------
# 5. Operator factorization identity on the built-in weight fixtures
# --------------------------------------------------------------------------

def test_criterion_5_factorization_identity():
    st = run_selftest()
    assert st["passed"] is True
    assert [c["a"] for c in st["cases"]] == ["1", "exp(x1*x2)", "1+x1^2"]
    for case in st["cases"]:
        assert case["points"] == 20
        assert len(case["testfns"]) == 5
        assert float(case["max_discrepancy"]) <= 1e-10


# --------------------------------------------------------------------------
# 6. Property suites
# --------------------------------------------------------------------------

def _poly(rng: Random, names) -> str:
    terms = []
    for _ in range(rng.randint(1, 3)):
        c = rng.randint(-3, 3) or 1
        v = rng.choice(names)
        p = rng.randint(0, 2)
        terms.append(f"{c}" if p == 0 else f"{c}*{v}^{p}")
    return " + ".join(terms)


def _rand_field(rng: Random, dim: int, label: str) -> VectorField:
    names = [f"x{i}" for i in range(1, dim + 1)]
    return VectorField(tuple(parse(_poly(rng, names)) for _ in names), label)


def test_criterion_6_bracket_algebra_properties():
    rng = Random(660)
    for trial in range(20):
        dim = rng.choice((1, 2, 3))
        X = _rand_field(rng, dim, "X")
        Y = _rand_field(rng, dim, "Y")
        Z = _rand_field(rng, dim, "Z")
        pts = rational_points(700 + trial, 4, dim)
        f = parse(_poly(rng, [f"x{i}" for i in range(1, dim + 1)]))
        g = parse(_poly(rng, [f"x{i}" for i in range(1, dim + 1)]))

        anti = lie_bracket(X, Y)
        flipped = lie_bracket(Y, X)
        jac = [
            add_all((a, b, c))
            for a, b, c in zip(
                lie_bracket(X, lie_bracket(Y, Z)).coeffs,
                lie_bracket(Y, lie_bracket(Z, X)).coeffs,
                lie_bracket(Z, lie_bracket(X, Y)).coeffs,
            )
        ]
        leib_lhs = apply(X, mul_all((f, g)))
        leib_rhs = add_all((mul_all((apply(X, f), g)), mul_all((f, apply(X, g)))))
        for p in pts:
            b = p.bindings("x")
            for ca, cb in zip(anti.coeffs, flipped.coeffs):
                assert abs(float(evaluate(ca, b)) + float(evaluate(cb, b))) <= 1e-10
            for comp in jac:
                assert abs(float(evaluate(comp, b))) <= 1e-10
            assert abs(float(evaluate(leib_lhs, b)) - float(evaluate(leib_rhs, b))) <= 1e-10


def test_criterion_6_stencil_convergence_order():
    pts = [{"x1": Fraction(1, 2)}, {"x1": Fraction(-4, 3)}, {"x1": Fraction(2)}]
    e = parse("sin(x1) + exp(1/2*x1)")
    err_h = fd_gradient_check(e, "x1", pts, h=Fraction(1, 50))
    err_h2 = fd_gradient_check(e, "x1", pts, h=Fraction(1, 100))
    assert err_h > 0
    assert 3.5 <= err_h / err_h2 <= 4.5


@pytest.fixture(scope="module")
def corpus_reports():
    out = {}
    for name in EQUATION_FIXTURES:
        doc = load_document(fixture_path(name))
        out[name] = (doc.equation, run_checks(doc.equation, doc.config.sampling))
    return out


def test_criterion_6_checker_monotonicity(corpus_reports):
    for name, (_, rep) in corpus_reports.items():
        if rep.swiatak.verdict == VERDICT_PASS:
            assert rep.corollary22.verdict == VERDICT_PASS, name
        if rep.corollary22.verdict == VERDICT_PASS:
            assert rep.theorem21.verdict == VERDICT_PASS, name


def test_criterion_6_constant_coefficient_equivalence(corpus_reports):
    checked = 0
    for name, (eq, rep) in corpus_reports.items():
        consts = [term.a for term in eq.terms]
        if any(simplify(a).__class__.__name__ != "Const" for a in consts):
            continue
        if any(evaluate(a, {}) <= 0 for a in consts):
            continue
        checked += 1
        assert (rep.corollary22.verdict == VERDICT_PASS) == (
            rep.theorem23.verdict == VERDICT_PASS
        ), name
    assert checked >= 5  # the corpus keeps this case well represented


def test_criterion_6_positive_scaling_invariance(corpus_reports):
    three = parse("3")
    for name, (eq, rep) in corpus_reports.items():
        scaled = Equation(
            n=eq.n, r=eq.r, k=eq.k,
            terms=tuple(Term(mul_all((three, t.a)), t.phi) for t in eq.terms),
            b=mul_all((three, eq.b)),
            t0=eq.t0, param_direction=eq.param_direction, rhs=eq.rhs,
        )
        rep2 = run_checks(scaled)
        got = tuple(t.verdict for t in rep2.results())
        want = tuple(t.verdict for t in rep.results())
        assert got == want, name


def test_criterion_6_principal_part_psd(corpus_reports):
    for name, (eq, _) in corpus_reports.items():
        op = derive_pde(eq)
        for p in SamplingPlan().points(eq.n):
            b = p.bindings("x")
            A = np.array(
                [[float(evaluate(entry, b)) for entry in row] for row in op.a_matrix]
            )
            eigenvalues = np.linalg.eigvalsh(A)
            assert eigenvalues.min() >= -1e-10, (name, p.coords)


# --------------------------------------------------------------------------
# 7. Byte determinism of machine reports
# --------------------------------------------------------------------------

def test_criterion_7_determinism(tmp_path):
    for name in EQUATION_FIXTURES + FIELD_FIXTURES:
        cmd = "brackets" if name in FIELD_FIXTURES else "check"
        target = tmp_path / f"{name}.json"
        main([cmd, str(fixture_path(name)), "--json", str(target)])
        first = target.read_bytes()
        main([cmd, str(fixture_path(name)), "--json", str(target)])
        assert target.read_bytes() == first, name
        assert first.strip(), name
