"""Bracket generation, sampling plans, and pointwise rank certificates."""

from fractions import Fraction
from random import Random

import pytest

from hypocheck.expr import Fraction as _F, Point, parse, render
from hypocheck.hormander import (
    DEFAULT_EPS_RANK, BracketBasis, SamplingPlan, check_spanning,
    generate_brackets, matrix_rank, rank_at,
)
from hypocheck.vfield import VectorField, zero_field


def _fields(*coeff_rows, labels=None):
    out = []
    for i, row in enumerate(coeff_rows):
        label = labels[i] if labels else f"X{i + 1}"
        out.append(VectorField(tuple(parse(c) for c in row), label))
    return out


GRUSHIN = _fields(("1", "0"), ("0", "x1"))


# --------------------------------------------------------------------------
# Sampling plans
# --------------------------------------------------------------------------

def test_default_plan_is_exact_lattice():
    plan = SamplingPlan()
    pts = plan.points(2)
    assert len(pts) == 9
    assert all(p.is_exact for p in pts)
    assert Point((Fraction(0), Fraction(0)), "spatial") in pts
    assert Point((Fraction(-1), Fraction(1)), "spatial") in pts


def test_plan_respects_box_and_extras():
    extra = Point((Fraction(7),), "spatial")
    plan = SamplingPlan(box=((Fraction(0), Fraction(2)),), grid=3,
                        extra_points=(extra,))
    pts = plan.points(1)
    assert pts[-1] == extra
    assert pts[0].coords[0] == Fraction(0)
    assert pts[-2].coords[0] == Fraction(2)


def test_plan_clamps_grid_to_point_cap():
    plan = SamplingPlan(grid=100)
    # 100^4 would exceed the cap; the per-axis count shrinks until it fits
    pts = plan.points(4)
    assert len(pts) <= 10_000


def test_plan_single_point_grid():
    pts = SamplingPlan(grid=1).points(2)
    assert len(pts) == 1


# --------------------------------------------------------------------------
# Bracket generation
# --------------------------------------------------------------------------

def test_generate_depth0_keeps_generators_verbatim():
    gens = [GRUSHIN[0], zero_field(2), GRUSHIN[0]]  # duplicate + zero kept
    basis = generate_brackets(gens, 0)
    assert len(basis.generated) == 3
    assert [e.depth for e in basis.generated] == [0, 0, 0]
    assert [e.trace for e in basis.generated] == ["X1", "0", "X1"]


def test_generate_grushin_depth1():
    basis = generate_brackets(GRUSHIN, 1)
    assert [e.trace for e in basis.generated] == ["X1", "X2", "[X1,X2]"]
    new = basis.generated[-1]
    assert new.depth == 1
    assert [render(c) for c in new.field.coeffs] == ["0", "1"]
    assert basis.max_depth == 1
    assert not basis.saturated


def test_generate_drops_rational_multiples():
    doubled = _fields(("1", "x1"), ("2", "2*x1"))
    basis = generate_brackets(doubled, 3)
    # depth-0 entries stay; every bracket is zero, so nothing is added
    assert len(basis.generated) == 2
    assert basis.saturated


def test_generate_saturates_when_level_empties():
    basis = generate_brackets(GRUSHIN, 4)
    # after [X1,X2] = (0,1) all further brackets vanish or repeat
    assert basis.max_depth == 1
    assert basis.saturated
    assert basis.requested_depth == 4


def test_generate_validates_input():
    with pytest.raises(ValueError):
        generate_brackets([], 2)
    with pytest.raises(Exception):
        generate_brackets([zero_field(2), zero_field(3)], 1)
    with pytest.raises(ValueError):
        generate_brackets(GRUSHIN, -1)


def test_generate_heisenberg_needs_depth1():
    fields = _fields(("1", "0", "-x2"), ("0", "1", "x1"))
    basis = generate_brackets(fields, 2)
    traces = [e.trace for e in basis.generated]
    assert "[X1,X2]" in traces
    br = next(e for e in basis.generated if e.trace == "[X1,X2]")
    assert [render(c) for c in br.field.coeffs] == ["0", "0", "2"]


# --------------------------------------------------------------------------
# Rank computation
# --------------------------------------------------------------------------

def test_matrix_rank_exact_and_float_agree():
    rng = Random(5)
    for _ in range(25):
        n = rng.randint(1, 4)
        rows = [
            tuple(Fraction(rng.randint(-6, 6), rng.randint(1, 4)) for _ in range(n))
            for _ in range(rng.randint(1, 5))
        ]
        r_exact, w_exact, arith_e, _ = matrix_rank(rows, n, force_arithmetic="exact")
        r_float, w_float, arith_f, pivot = matrix_rank(
            [tuple(float(v) for v in row) for row in rows], n,
            force_arithmetic="floating",
        )
        assert (arith_e, arith_f) == ("exact", "floating")
        assert pivot is None or pivot > 0
        assert r_exact == r_float
        assert w_exact == w_float  # greedy earliest-wins witness is shared


def test_matrix_rank_witness_is_earliest():
    rows = [
        (Fraction(0), Fraction(0)),
        (Fraction(1), Fraction(0)),
        (Fraction(2), Fraction(0)),   # dependent on row 1
        (Fraction(0), Fraction(1)),
    ]
    rank, witness, _, _ = matrix_rank(rows, 2)
    assert rank == 2
    assert witness == (1, 3)


def test_matrix_rank_eps_threshold():
    rows = [(1.0, 0.0), (1.0, 1e-12)]
    rank, _, _, _ = matrix_rank(rows, 2, eps_rank=1e-9)
    assert rank == 1  # the tiny pivot is below eps * row magnitude
    rank_tight, _, _, _ = matrix_rank(rows, 2, eps_rank=1e-15)
    assert rank_tight == 2


def test_matrix_rank_validates_force():
    with pytest.raises(ValueError):
        matrix_rank([(Fraction(1),)], 1, force_arithmetic="quantum")


def test_rank_at_point():
    basis = generate_brackets(GRUSHIN, 1)
    origin = Point((Fraction(0), Fraction(0)), "spatial")
    rank, witness = rank_at(basis, origin)
    assert rank == 2
    labels = tuple(basis.generated[i].trace for i in witness)
    assert labels == ("X1", "[X1,X2]")


# --------------------------------------------------------------------------
# Spanning reports
# --------------------------------------------------------------------------

def test_grushin_depth0_fails_exactly_on_line():
    basis = generate_brackets(GRUSHIN, 0)
    report = check_spanning(basis, SamplingPlan(grid=5))
    assert not report.spanning_everywhere
    failing = report.failing_points
    assert len(failing) == 5
    assert all(p.coords[0] == 0 for p in failing)
    assert "not spanning up to depth 0" in report.describe()


def test_grushin_depth1_spans_everywhere():
    basis = generate_brackets(GRUSHIN, 1)
    report = check_spanning(basis, SamplingPlan(grid=5))
    assert report.spanning_everywhere
    assert len(report.records) == 25
    origin = next(
        r for r in report.records if all(c == 0 for c in r.point.coords)
    )
    assert origin.witness_labels == ("X1", "[X1,X2]")
    assert origin.min_depth_to_span == 1
    off_line = next(
        r for r in report.records if r.point.coords[0] != 0
    )
    assert off_line.min_depth_to_span == 0
    assert "spanning on sampled set (25 points" in report.describe()


def test_spanning_mentions_saturation_on_failure():
    fields = _fields(("1", "0"), ("2", "0"))
    basis = generate_brackets(fields, 3)
    report = check_spanning(basis, SamplingPlan())
    assert not report.spanning_everywhere
    assert "saturated" in report.describe()


def test_undefined_coefficients_are_reported():
    fields = _fields(("log(x1)", "0"), ("0", "1"))
    basis = generate_brackets(fields, 0)
    report = check_spanning(basis, SamplingPlan())
    assert report.undefined
    point, msg = report.undefined[0]
    assert point.coords[0] <= 0
    assert "undefined" in msg


def test_float_path_matches_exact_verdict():
    basis = generate_brackets(GRUSHIN, 1)
    exact = check_spanning(basis, SamplingPlan(grid=5))
    floating = check_spanning(
        basis, SamplingPlan(grid=5), force_arithmetic="floating"
    )
    assert floating.spanning_everywhere == exact.spanning_everywhere
    for re, rf in zip(exact.records, floating.records):
        assert re.rank == rf.rank
        assert rf.arithmetic == "floating"
        assert rf.min_singular_pivot is not None


def test_sqrt_coefficients_force_float_path():
    fields = _fields(("sqrt(2 + x1^2)", "0"), ("0", "1"))
    basis = generate_brackets(fields, 0)
    report = check_spanning(basis, SamplingPlan())
    assert report.spanning_everywhere
    assert all(r.arithmetic == "floating" for r in report.records)


def test_exact_path_with_thread_cap(monkeypatch):
    monkeypatch.setenv("HYPOCHECK_THREADS", "4")
    basis = generate_brackets(GRUSHIN, 1)
    report = check_spanning(basis, SamplingPlan(grid=5))
    assert report.spanning_everywhere
    assert all(r.arithmetic == "exact" for r in report.records)
