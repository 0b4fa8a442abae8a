"""Command-line interface: equation files in, classification reports out.

Subcommands
    check     full classification: assumptions, all four certificates,
              the derived operator, and the candidate validation when a
              candidate solution is present
    derive    the derived operator only
    brackets  bracket generation and spanning for raw user-supplied fields
    verify    finite-difference validation of the derived operator against
              the candidate solution
    selftest  the built-in operator-identity fixtures

Exit codes: 0 when the run's positive outcome holds (some certificate
passes / the operation succeeds), 1 when it does not, 2 for input errors,
3 for internal evaluation errors.  Machine reports (--json) are
byte-identical across runs on identical input: dictionary order is fixed,
rationals are rendered "p/q", floats with 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from random import Random
from typing import Any, Mapping, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib  # type: ignore[no-redef]

from .expr import (
    Expr, ExprError, Number, ParseError, Point, as_fraction, parse, render,
)
from .feq import (
    AssumptionReport, CheckReport, DerivedOperator, Equation,
    InapplicableError, RhsSpec, Term, TheoremResult, VERDICT_ERROR,
    derive_pde, run_checks, verify_square_identity,
)
from .hormander import (
    DEFAULT_EPS_RANK, BracketBasis, RankReport, SamplingPlan, check_spanning,
    generate_brackets,
)
from .verify import FdPlan, Lemma31Report, check_lemma31
from .vfield import VectorField, t_names, x_names

__all__ = ["main", "load_spec", "SpecError"]


class SpecError(Exception):
    """Input-file problem; carries the offending key for diagnostics."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


# --------------------------------------------------------------------------
# Input loading
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckConfig:
    depth: int = 4
    sampling: SamplingPlan = SamplingPlan()
    eps_rank: float = DEFAULT_EPS_RANK
    tol_fd: float = 1e-6
    h_fd: Fraction = Fraction(1, 1000)


@dataclass(frozen=True)
class Document:
    equation: Equation | None = None
    config: CheckConfig = CheckConfig()
    candidate: Expr | None = None
    raw_fields: tuple[VectorField, ...] = ()


def _want(table: Mapping, key: str, kinds, where: str):
    if key not in table:
        raise SpecError(where, f"missing key '{key}'")
    v = table[key]
    if not isinstance(v, kinds):
        raise SpecError(f"{where}.{key}", f"unexpected type {type(v).__name__}")
    return v


def _reject_unknown(table: Mapping, known: frozenset[str], where: str) -> None:
    # Unknown keys error out rather than being silently ignored; the usual
    # culprit is a top-level key placed after a [[term]] block, which TOML
    # attaches to that table.
    stray = sorted(set(table) - known)
    if stray:
        raise SpecError(where, f"unknown key '{stray[0]}' (known: {', '.join(sorted(known))})")


_TOP_KEYS = frozenset({"equation", "term", "b", "rhs", "check", "candidate", "field"})
_EQUATION_KEYS = frozenset({"n", "r", "k", "t0", "param_direction", "b"})
_TERM_KEYS = frozenset({"a", "phi"})
_CHECK_KEYS = frozenset(
    {"depth", "grid", "box", "extra_points", "eps_rank", "tol_fd", "h_fd"}
)
_CANDIDATE_KEYS = frozenset({"f"})
_FIELD_KEYS = frozenset({"coeffs", "label"})


def _rational(v, where: str) -> Fraction:
    try:
        return as_fraction(v)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise SpecError(where, f"not a rational number: {v!r} ({exc})") from None


def _expr(src, where: str, allowed) -> Expr:
    if not isinstance(src, str):
        raise SpecError(where, f"expected an expression string, got {type(src).__name__}")
    try:
        return parse(src, allowed)
    except ParseError as exc:
        raise SpecError(where, str(exc)) from None


def _load_equation(doc: Mapping) -> Equation:
    eqt = _want(doc, "equation", dict, "")
    _reject_unknown(eqt, _EQUATION_KEYS, "[equation]")
    n = _want(eqt, "n", int, "[equation]")
    r = _want(eqt, "r", int, "[equation]")
    k = _want(eqt, "k", int, "[equation]")
    if n < 1 or r < 1 or k < 1:
        raise SpecError("[equation]", "n, r and k must be positive")
    xs, ts = set(x_names(n)), set(t_names(r))

    t0_raw = _want(eqt, "t0", list, "[equation]")
    if len(t0_raw) != r:
        raise SpecError("[equation].t0", f"has {len(t0_raw)} coordinates, expected r={r}")
    t0 = Point(
        tuple(_rational(v, f"[equation].t0[{i}]") for i, v in enumerate(t0_raw)),
        "parameter",
    )

    direction: tuple[Fraction, ...] = ()
    if "param_direction" in eqt:
        raw = _want(eqt, "param_direction", list, "[equation]")
        if len(raw) != r:
            raise SpecError(
                "[equation].param_direction", f"has {len(raw)} components, expected r={r}"
            )
        direction = tuple(
            _rational(v, f"[equation].param_direction[{i}]") for i, v in enumerate(raw)
        )

    terms_raw = doc.get("term", [])
    if not isinstance(terms_raw, list) or not all(isinstance(t, dict) for t in terms_raw):
        raise SpecError("[[term]]", "terms must be [[term]] tables")
    if len(terms_raw) != k:
        raise SpecError("[[term]]", f"term count mismatch: k={k} but {len(terms_raw)} [[term]] blocks")
    terms = []
    for i, tr in enumerate(terms_raw, 1):
        where = f"[[term]] #{i}"
        _reject_unknown(tr, _TERM_KEYS, where)
        a = _expr(_want(tr, "a", str, where), f"{where}.a", xs | ts)
        phi_raw = _want(tr, "phi", list, where)
        if len(phi_raw) != n:
            raise SpecError(f"{where}.phi", f"has {len(phi_raw)} components, expected n={n}")
        phi = tuple(
            _expr(src, f"{where}.phi[{l}]", ts) for l, src in enumerate(phi_raw)
        )
        terms.append(Term(a, phi))

    b_src = doc.get("b", eqt.get("b", "0"))
    b = _expr(b_src, "b", xs | ts)

    rhs = None
    if "rhs" in doc:
        rt = _want(doc, "rhs", dict, "")
        s = _want(rt, "s", int, "[rhs]")
        if s < 0:
            raise SpecError("[rhs].s", "must be nonnegative")
        _reject_unknown(
            rt, frozenset({"s", "F"} | {f"lambda_{i}" for i in range(1, s + 1)}),
            "[rhs]",
        )
        zs = {f"z{i}" for i in range(1, s + 1)}
        F = _expr(_want(rt, "F", str, "[rhs]"), "[rhs].F", xs | zs)
        lambdas = []
        for i in range(1, s + 1):
            key = f"lambda_{i}"
            lam_raw = _want(rt, key, list, "[rhs]")
            if len(lam_raw) != n:
                raise SpecError(
                    f"[rhs].{key}", f"has {len(lam_raw)} components, expected n={n}"
                )
            lambdas.append(tuple(
                _expr(src, f"[rhs].{key}[{l}]", xs) for l, src in enumerate(lam_raw)
            ))
        rhs = RhsSpec(s, F, tuple(lambdas))

    try:
        return Equation(
            n=n, r=r, k=k, terms=tuple(terms), b=b, t0=t0,
            param_direction=direction, rhs=rhs,
        )
    except ValueError as exc:
        raise SpecError("[equation]", str(exc)) from None


def _load_config(doc: Mapping, n_hint: int | None) -> CheckConfig:
    ct = doc.get("check", {})
    if not isinstance(ct, dict):
        raise SpecError("[check]", "must be a table")
    _reject_unknown(ct, _CHECK_KEYS, "[check]")
    depth = ct.get("depth", 4)
    if not isinstance(depth, int) or depth < 0:
        raise SpecError("[check].depth", "must be a nonnegative integer")
    grid = ct.get("grid", 3)
    if not isinstance(grid, int) or grid < 1:
        raise SpecError("[check].grid", "must be a positive integer")
    box = None
    if "box" in ct:
        raw = _want(ct, "box", list, "[check]")
        pairs = []
        for i, pair in enumerate(raw):
            if not isinstance(pair, list) or len(pair) != 2:
                raise SpecError(f"[check].box[{i}]", "must be a [lo, hi] pair")
            lo = _rational(pair[0], f"[check].box[{i}][0]")
            hi = _rational(pair[1], f"[check].box[{i}][1]")
            pairs.append((lo, hi))
        box = tuple(pairs)
        if n_hint is not None and len(box) != n_hint:
            raise SpecError("[check].box", f"has {len(box)} axes, expected n={n_hint}")
    extra = []
    if "extra_points" in ct:
        raw = _want(ct, "extra_points", list, "[check]")
        for i, coords in enumerate(raw):
            if not isinstance(coords, list):
                raise SpecError(f"[check].extra_points[{i}]", "must be a coordinate array")
            extra.append(Point(
                tuple(_rational(v, f"[check].extra_points[{i}][{l}]")
                      for l, v in enumerate(coords)),
                "spatial",
            ))
    eps_rank = ct.get("eps_rank", DEFAULT_EPS_RANK)
    tol_fd = ct.get("tol_fd", 1e-6)
    for key, v in (("eps_rank", eps_rank), ("tol_fd", tol_fd)):
        if not isinstance(v, (int, float)) or v <= 0:
            raise SpecError(f"[check].{key}", "must be a positive number")
    h_fd = _rational(ct.get("h_fd", Fraction(1, 1000)), "[check].h_fd")
    if h_fd <= 0:
        raise SpecError("[check].h_fd", "must be positive")
    try:
        sampling = SamplingPlan(box=box, grid=grid, extra_points=tuple(extra))
    except ValueError as exc:
        raise SpecError("[check]", str(exc)) from None
    return CheckConfig(
        depth=depth, sampling=sampling, eps_rank=float(eps_rank),
        tol_fd=float(tol_fd), h_fd=h_fd,
    )


def _load_fields(doc: Mapping) -> tuple[VectorField, ...]:
    raw = doc.get("field", [])
    if not isinstance(raw, list) or not all(isinstance(t, dict) for t in raw):
        raise SpecError("[[field]]", "fields must be [[field]] tables")
    fields = []
    dim = None
    for i, ft in enumerate(raw, 1):
        where = f"[[field]] #{i}"
        _reject_unknown(ft, _FIELD_KEYS, where)
        coeffs_raw = _want(ft, "coeffs", list, where)
        if dim is None:
            dim = len(coeffs_raw)
        elif len(coeffs_raw) != dim:
            raise SpecError(f"{where}.coeffs", f"has {len(coeffs_raw)} components, expected {dim}")
        xs = set(x_names(dim))
        label = ft.get("label", f"X{i}")
        if not isinstance(label, str):
            raise SpecError(f"{where}.label", "must be a string")
        coeffs = tuple(
            _expr(src, f"{where}.coeffs[{l}]", xs) for l, src in enumerate(coeffs_raw)
        )
        fields.append(VectorField(coeffs, label))
    return tuple(fields)


def load_document(path: str | Path) -> Document:
    p = Path(path)
    try:
        blob = p.read_bytes()
    except OSError as exc:
        raise SpecError(str(path), f"cannot read file: {exc}") from None
    try:
        doc = tomllib.loads(blob.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise SpecError(str(path), f"not valid TOML: {exc}") from None
    _reject_unknown(doc, _TOP_KEYS, str(path))

    equation = _load_equation(doc) if "equation" in doc else None
    raw_fields = _load_fields(doc)
    if equation is None and not raw_fields:
        raise SpecError(str(path), "file declares neither [equation] nor [[field]] blocks")
    config = _load_config(doc, equation.n if equation else None)

    candidate = None
    if "candidate" in doc:
        cand = _want(doc, "candidate", dict, "")
        _reject_unknown(cand, _CANDIDATE_KEYS, "[candidate]")
        if equation is None:
            raise SpecError("[candidate]", "candidate requires an [equation]")
        candidate = _expr(
            _want(cand, "f", str, "[candidate]"), "[candidate].f",
            set(x_names(equation.n)),
        )
    return Document(equation, config, candidate, raw_fields)


def load_spec(path: str | Path) -> Equation:
    """The equation instance from a document file (input errors -> SpecError)."""
    doc = load_document(path)
    if doc.equation is None:
        raise SpecError(str(path), "file has no [equation] table")
    return doc.equation


# --------------------------------------------------------------------------
# Report rendering
# --------------------------------------------------------------------------

def _num(v: Number | int) -> str:
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, int):
        return str(v)
    return f"{float(v):.17g}"


def _point(p: Point) -> list[str]:
    return [_num(c) for c in p.coords]


def _assumptions_dict(a: AssumptionReport) -> dict[str, Any]:
    return {
        "anchor_ok": a.anchor_ok,
        "anchor_residuals": [[_num(v) for v in row] for row in a.anchor_residuals],
        "nonnegativity": (
            "holds on sampled set" if a.nonneg_ok
            else f"violated at {len(a.nonneg_violations)} sampled points"
        ),
        "nonneg_violations": [
            {"term": j, "x": _point(xp), "t": _point(tp), "value": _num(v)}
            for j, xp, tp, v in a.nonneg_violations
        ],
        "positivity_at_anchor": (
            "positive on sampled set" if a.positivity_ok
            else f"not positive at {len(a.positivity_violations)} sampled points"
        ),
        "positivity_violations": [
            {"term": j, "x": _point(xp), "value": _num(v)}
            for j, xp, v in a.positivity_violations
        ],
        "degenerate_points": [
            {"term": j, "x": _point(xp)} for j, xp in a.degenerate_points
        ],
        "eval_errors": list(a.eval_errors),
    }


def _theorem_dict(t: TheoremResult) -> dict[str, Any]:
    return {
        "verdict": t.verdict,
        "detail": t.detail,
        "witnesses": list(t.witness_labels),
        "failing_points": [_point(p) for p in t.failing_points],
        "excluded_points": [_point(p) for p in t.excluded_points],
        "depth_used": t.depth_used,
        "warnings": list(t.warnings),
    }


def _pde_dict(op: DerivedOperator) -> dict[str, Any]:
    fields: dict[str, Any] = {}
    for X in op.l_fields:
        fields[X.label] = [render(c) for c in X.coeffs]
    fields[op.l0.label] = [render(c) for c in op.l0.coeffs]
    return {
        "fields": fields,
        "psi": {
            "coeffs": [render(c) for c in op.psi.coeffs],
            "terms": [
                {
                    "drift": [render(c) for c in part.drift],
                    "correction": [render(c) for c in part.correction],
                    "curvature": [render(c) for c in part.curvature],
                }
                for part in op.psi.parts
            ],
        },
        "expansion": {
            "A": [[render(c) for c in row] for row in op.a_matrix],
            "B": [render(c) for c in op.b_vector],
            "c": render(op.c),
            "g": render(op.g),
        },
    }


def _lemma31_dict(rep: Lemma31Report) -> dict[str, Any]:
    return {
        "label": rep.label,
        "vacuous": rep.vacuous,
        "passed": rep.passed,
        "tol": _num(float(rep.tol)),
        "residual_max": _num(rep.residual_max),
        "max_fd_deviation": _num(rep.max_fd_deviation),
        "max_symbolic_deviation": _num(rep.max_symbolic_deviation),
        "rows": [
            {
                "point": _point(r.point),
                "fd_deviation": _num(r.fd_deviation),
                "symbolic_deviation": _num(r.symbolic_deviation),
            }
            for r in rep.rows
        ],
    }


def _rank_report_dict(rep: RankReport) -> dict[str, Any]:
    return {
        "summary": rep.describe(),
        "spanning_everywhere": rep.spanning_everywhere,
        "records": [
            {
                "point": _point(r.point),
                "rank": r.rank,
                "witness": list(r.witness),
                "witness_labels": list(r.witness_labels),
                "arithmetic": r.arithmetic,
                "min_singular_pivot": (
                    None if r.min_singular_pivot is None else _num(r.min_singular_pivot)
                ),
                "min_depth_to_span": r.min_depth_to_span,
            }
            for r in rep.records
        ],
        "undefined_points": [
            {"point": _point(p), "message": m} for p, m in rep.undefined
        ],
    }


def _basis_dict(basis: BracketBasis) -> dict[str, Any]:
    return {
        "generators": [
            {"label": g.label, "coeffs": [render(c) for c in g.coeffs]}
            for g in basis.generators
        ],
        "generated": [
            {
                "trace": e.trace,
                "depth": e.depth,
                "coeffs": [render(c) for c in e.field.coeffs],
            }
            for e in basis.generated
        ],
        "requested_depth": basis.requested_depth,
        "max_depth": basis.max_depth,
    }


# --------------------------------------------------------------------------
# Selftest fixtures
# --------------------------------------------------------------------------

_SELFTEST_COEFFS = ("1", "exp(x1*x2)", "1+x1^2")
_SELFTEST_TESTFNS = ("x1", "x1^2*x2", "x1^3", "x2^2", "x1*x2 + x2^3")
_SELFTEST_TOL = 1e-10


def _selftest_points(rng: Random, count: int) -> tuple[Point, ...]:
    # Rational points in [-2, 2]^2: small enough that exp factors stay
    # well-conditioned, varied enough to catch coefficient mistakes.
    pts = []
    for _ in range(count):
        coords = tuple(
            Fraction(rng.randint(-40, 40), rng.randint(20, 40)) for _ in range(2)
        )
        pts.append(Point(coords, "spatial"))
    return tuple(pts)


def run_selftest() -> dict[str, Any]:
    rng = Random(20250815)
    points = _selftest_points(rng, 20)
    testfns = [parse(src) for src in _SELFTEST_TESTFNS]
    cases = []
    worst = 0.0
    for a_src in _SELFTEST_COEFFS:
        rep = verify_square_identity(
            parse(a_src), (Fraction(1), Fraction(0)), testfns, points
        )
        worst = max(worst, rep.max_discrepancy)
        cases.append({
            "a": a_src,
            "phi_prime": ["1", "0"],
            "testfns": list(_SELFTEST_TESTFNS),
            "points": len(points),
            "max_discrepancy": _num(rep.max_discrepancy),
        })
    return {
        "identity": "(sqrt(a)*v.grad)^2 == a*(v.grad)^2 + sqrt(a)*(v.grad sqrt(a))*(v.grad)",
        "tol": _num(_SELFTEST_TOL),
        "max_discrepancy": _num(worst),
        "passed": worst <= _SELFTEST_TOL,
        "cases": cases,
    }


# --------------------------------------------------------------------------
# Subcommand drivers
# --------------------------------------------------------------------------

def _require_equation(doc: Document, path: str) -> Equation:
    if doc.equation is None:
        raise SpecError(path, "this subcommand needs an [equation] table")
    return doc.equation


def _cmd_check(doc: Document, path: str) -> tuple[int, dict[str, Any], list[str]]:
    eq = _require_equation(doc, path)
    cfg = doc.config
    rep = run_checks(eq, cfg.sampling, cfg.depth, cfg.eps_rank)
    out: dict[str, Any] = {
        "command": "check",
        "assumptions": _assumptions_dict(rep.assumptions),
        "theorems": {
            t.name: _theorem_dict(t) for t in rep.results()
        },
    }
    try:
        op = derive_pde(eq)
        out["derived_pde"] = _pde_dict(op)
    except InapplicableError as exc:
        out["derived_pde"] = {"error": str(exc)}
        op = None
    lemma = None
    if doc.candidate is not None and op is not None:
        plan = FdPlan(h=cfg.h_fd, points=cfg.sampling.points(eq.n), tol=cfg.tol_fd)
        lemma = check_lemma31(eq, doc.candidate, plan)
        out["lemma31_check"] = _lemma31_dict(lemma)

    lines = _human_check(rep, out, lemma)
    if rep.any_pass:
        code = 0
    elif any(t.verdict == VERDICT_ERROR for t in rep.results()):
        code = 3
    else:
        code = 1
    return code, out, lines


def _human_check(rep: CheckReport, out: dict, lemma: Lemma31Report | None) -> list[str]:
    a = rep.assumptions
    lines = [
        f"anchor condition (shifts vanish at t0): {'ok' if a.anchor_ok else 'VIOLATED'}",
        f"coefficient nonnegativity: {out['assumptions']['nonnegativity']}",
        f"coefficient positivity at anchor: {out['assumptions']['positivity_at_anchor']}",
        "",
    ]
    for t in rep.results():
        lines.append(f"{t.name:<12} {t.verdict:<16} {t.detail}")
        if t.witness_labels:
            lines.append(f"{'':<12} witness: {', '.join(t.witness_labels)}")
        for w in t.warnings:
            lines.append(f"{'':<12} warning: {w}")
    pde = out.get("derived_pde", {})
    lines.append("")
    if "error" in pde:
        lines.append(f"derived operator: refused ({pde['error']})")
    else:
        lines.append("derived operator (sum_j L_j^2 + L0 + c, applied to f, equals g):")
        for label, coeffs in pde["fields"].items():
            lines.append(f"  {label} = ({', '.join(coeffs)})")
        exp = pde["expansion"]
        lines.append(f"  A = {exp['A']}")
        lines.append(f"  B = {exp['B']}")
        lines.append(f"  c = {exp['c']}")
        lines.append(f"  g = {exp['g']}")
    if lemma is not None:
        lines.append("")
        lines.append(f"candidate validation: {lemma.label}")
        lines.append(
            f"  max deviations: finite-difference {float(lemma.max_fd_deviation):.3g}, "
            f"symbolic {float(lemma.max_symbolic_deviation):.3g} (tol {lemma.tol:g})"
        )
    return lines


def _cmd_derive(doc: Document, path: str) -> tuple[int, dict[str, Any], list[str]]:
    eq = _require_equation(doc, path)
    out: dict[str, Any] = {"command": "derive"}
    try:
        op = derive_pde(eq)
    except InapplicableError as exc:
        out["derived_pde"] = {"error": str(exc)}
        return 1, out, [f"derivation refused: {exc}"]
    out["derived_pde"] = _pde_dict(op)
    pde = out["derived_pde"]
    lines = ["derived operator (sum_j L_j^2 + L0 + c, applied to f, equals g):"]
    for label, coeffs in pde["fields"].items():
        lines.append(f"  {label} = ({', '.join(coeffs)})")
    exp = pde["expansion"]
    lines += [
        f"  A = {exp['A']}",
        f"  B = {exp['B']}",
        f"  c = {exp['c']}",
        f"  g = {exp['g']}",
    ]
    return 0, out, lines


def _cmd_brackets(doc: Document, path: str) -> tuple[int, dict[str, Any], list[str]]:
    if doc.raw_fields:
        fields = list(doc.raw_fields)
    elif doc.equation is not None:
        from .vfield import build_l0, build_lj

        eq = doc.equation
        fields = [build_lj(eq, j) for j in range(1, eq.k + 1)]
        fields.append(build_l0(eq))
    else:
        raise SpecError(path, "brackets needs [[field]] blocks or an [equation]")
    cfg = doc.config
    basis = generate_brackets(fields, cfg.depth)
    rep = check_spanning(basis, cfg.sampling, cfg.eps_rank)
    out = {
        "command": "brackets",
        "basis": _basis_dict(basis),
        "rank_report": _rank_report_dict(rep),
    }
    lines = [f"{len(basis.generators)} generators, {len(basis.generated)} fields "
             f"after bracket generation to depth {basis.requested_depth}"]
    for e in basis.generated:
        lines.append(f"  depth {e.depth}: {e.trace} = ({', '.join(render(c) for c in e.field.coeffs)})")
    lines.append(rep.describe())
    return (0 if rep.spanning_everywhere else 1), out, lines


def _cmd_verify(doc: Document, path: str) -> tuple[int, dict[str, Any], list[str]]:
    eq = _require_equation(doc, path)
    if doc.candidate is None:
        raise SpecError("[candidate]", "verify needs [candidate].f")
    cfg = doc.config
    plan = FdPlan(h=cfg.h_fd, points=cfg.sampling.points(eq.n), tol=cfg.tol_fd)
    try:
        rep = check_lemma31(eq, doc.candidate, plan)
    except InapplicableError as exc:
        return 1, {"command": "verify", "error": str(exc)}, [f"verification refused: {exc}"]
    out = {"command": "verify", "lemma31_check": _lemma31_dict(rep)}
    lines = [
        f"candidate validation: {rep.label}",
        f"  equation defect max: {float(rep.residual_max):.3g}",
        f"  max deviations: finite-difference {float(rep.max_fd_deviation):.3g}, "
        f"symbolic {float(rep.max_symbolic_deviation):.3g} (tol {rep.tol:g})",
        f"  result: {'pass' if rep.passed else 'fail'}",
    ]
    return (0 if rep.passed else 1), out, lines


def _cmd_selftest(doc: Document | None, path: str) -> tuple[int, dict[str, Any], list[str]]:
    out = {"command": "selftest", "selftest": run_selftest()}
    st = out["selftest"]
    lines = [
        f"operator identity self-test: {st['identity']}",
    ]
    for case in st["cases"]:
        lines.append(
            f"  a = {case['a']:<12} max discrepancy {case['max_discrepancy']} "
            f"({case['points']} points x {len(case['testfns'])} test functions)"
        )
    lines.append(f"overall: {'pass' if st['passed'] else 'fail'} (tol {st['tol']})")
    return (0 if st["passed"] else 1), out, lines


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hypocheck",
        description="Regularity certificates for mean-value functional equations.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    specs = {
        "check": "run assumptions, all certificates, the derived operator",
        "derive": "derive the second-order operator only",
        "brackets": "bracket generation and spanning for raw fields",
        "verify": "validate the derived operator against [candidate].f",
        "selftest": "run the built-in operator-identity fixtures",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        if name == "selftest":
            p.add_argument("spec", nargs="?", default=None, help="ignored for selftest")
        else:
            p.add_argument("spec", help="equation document (TOML)")
        p.add_argument("--json", metavar="PATH", default=None,
                       help="also write the machine-readable report here")
        p.add_argument("--depth", type=int, default=None, help="bracket depth bound")
        p.add_argument("--grid", type=int, default=None, help="sample points per axis")
        p.add_argument("--eps-rank", type=float, default=None,
                       help="relative pivot threshold for floating rank")
        p.add_argument("--h", default=None, help="finite-difference step")
        p.add_argument("--tol", type=float, default=None,
                       help="finite-difference acceptance tolerance")
    return ap


def _apply_overrides(cfg: CheckConfig, args: argparse.Namespace) -> CheckConfig:
    depth = cfg.depth if args.depth is None else args.depth
    if depth < 0:
        raise SpecError("--depth", "must be nonnegative")
    sampling = cfg.sampling
    if args.grid is not None:
        if args.grid < 1:
            raise SpecError("--grid", "must be at least 1")
        sampling = SamplingPlan(
            box=sampling.box, grid=args.grid, extra_points=sampling.extra_points
        )
    eps = cfg.eps_rank if args.eps_rank is None else args.eps_rank
    if eps <= 0:
        raise SpecError("--eps-rank", "must be positive")
    tol = cfg.tol_fd if args.tol is None else args.tol
    if tol <= 0:
        raise SpecError("--tol", "must be positive")
    h = cfg.h_fd if args.h is None else _rational(args.h, "--h")
    if h <= 0:
        raise SpecError("--h", "must be positive")
    return CheckConfig(depth=depth, sampling=sampling, eps_rank=eps, tol_fd=tol, h_fd=h)


_DRIVERS = {
    "check": _cmd_check,
    "derive": _cmd_derive,
    "brackets": _cmd_brackets,
    "verify": _cmd_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            code, report, lines = _cmd_selftest(None, "")
        else:
            doc = load_document(args.spec)
            doc = Document(
                equation=doc.equation,
                config=_apply_overrides(doc.config, args),
                candidate=doc.candidate,
                raw_fields=doc.raw_fields,
            )
            code, report, lines = _DRIVERS[args.command](doc, args.spec)
    except SpecError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except ExprError as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, ArithmeticError, KeyError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3

    for line in lines:
        print(line)
    if args.json is not None:
        blob = json.dumps(report, indent=2, ensure_ascii=True) + "\n"
        try:
            Path(args.json).write_text(blob, encoding="utf-8")
        except OSError as exc:
            print(f"input error: cannot write {args.json}: {exc}", file=sys.stderr)
            return 2
    return code
