"""Shared fixtures: corpus paths, loaded equations, seeded point makers."""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path
from random import Random

import pytest

from hypocheck.cli import load_document, load_spec
from hypocheck.expr import Point

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

# The ten equation files used by the corpus-wide property tests, with the
# expected verdict of each certificate (pass / fail_on_samples /
# not_applicable) in the order swiatak, corollary22, theorem23, theorem21.
EQUATION_EXPECTATIONS = {
    "jensen": ("pass", "pass", "pass", "pass"),
    "quadratic": ("pass", "pass", "pass", "pass"),
    "threeterms": ("pass", "pass", "pass", "pass"),
    "heatmv": ("fail_on_samples", "pass", "pass", "pass"),
    "quad1d": ("fail_on_samples", "pass", "pass", "pass"),
    "drift": ("fail_on_samples", "pass", "not_applicable", "pass"),
    "expdrift": ("fail_on_samples", "pass", "not_applicable", "pass"),
    "degenerate": ("fail_on_samples", "pass", "not_applicable", "pass"),
    "exp_fail": ("fail_on_samples", "fail_on_samples", "not_applicable",
                 "fail_on_samples"),
    "single_direction": ("fail_on_samples", "fail_on_samples",
                         "fail_on_samples", "fail_on_samples"),
}
EQUATION_FIXTURES = tuple(EQUATION_EXPECTATIONS)
FIELD_FIXTURES = ("grushin", "basis2d")


def fixture_path(name: str) -> Path:
    return FIXTURES / f"{name}.toml"


@pytest.fixture(scope="session")
def equations():
    return {name: load_spec(fixture_path(name)) for name in EQUATION_FIXTURES}


@pytest.fixture(scope="session")
def documents():
    return {
        name: load_document(fixture_path(name))
        for name in EQUATION_FIXTURES + FIELD_FIXTURES
    }


def rational_points(seed: int, count: int, dim: int, span: int = 2) -> tuple[Point, ...]:
    """Deterministic rational points in [-span, span]^dim, seeded."""
    rng = Random(seed)
    pts = []
    for _ in range(count):
        coords = tuple(
            Fraction(rng.randint(-20 * span, 20 * span), rng.randint(10, 20))
            for _ in range(dim)
        )
        pts.append(Point(coords, "spatial"))
    return tuple(pts)


# --------------------------------------------------------------------------
# Acceptance summary: one PASS/FAIL line per criterion in the terminal
# report, aggregated over every test named test_criterion_<n>*.
# --------------------------------------------------------------------------

import re as _re

_ACCEPTANCE: dict[int, bool] = {}
_CRITERION_RE = _re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def pytest_runtest_logreport(report):
    m = _CRITERION_RE.search(report.nodeid)
    if not m:
        return
    num = int(m.group(1))
    if report.when == "call":
        _ACCEPTANCE[num] = _ACCEPTANCE.get(num, True) and report.passed
    elif report.failed:  # setup/teardown error
        _ACCEPTANCE[num] = False


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        verdict = "PASS" if _ACCEPTANCE[num] else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {num}: {verdict}")
