"""The mean-value equation model and its regularity certificates.

An equation  sum_j a_j(x,t) f(x + phi_j(t)) = F(x, f(lam_1(x)), ...) + b(x,t)
with an anchor t0 where every shift vanishes is differentiated twice in the
parameter to obtain a second-order PDE for f.  Four sufficient conditions
for smoothness of continuous solutions are checked, ordered from the
strongest hypothesis to the weakest:

* first-derivative spanning: {phi_j'(t0)} spans the x-space (constant
  vectors, exact rank)
* drift-augmented spanning: {phi_j'(t0)} plus the drift vector Psi(x,t0)
  span at each sampled x
* constant-coefficient spanning: {phi_j'(t0)} plus sum_j a_j phi_j''(t0)
  span (requires every a_j to be a positive constant)
* bracket-generated spanning: the fields L_1..L_k, L_0 and their iterated
  commutators span at each sampled x

Verdicts are sample-based wherever a condition quantifies over x: "pass"
certifies the sampled set only, and a failure at a sampled point is
definitive for that point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .expr import (
    Const, DomainError, Expr, ExprError, Mul, Neg, Number, Point, Sqrt,
    UnboundVariableError, ZERO, add_all, as_fraction, diff, directional_diff,
    evaluate, flagged_nonneg, free_vars, mul_all, render, simplify, subs,
)
from .hormander import (
    DEFAULT_EPS_RANK, BracketBasis, RankReport, SamplingPlan, check_spanning,
    generate_brackets, matrix_rank,
)
from .vfield import (
    PsiField, VectorField, apply, build_l0, build_lj, build_psi, t_names,
    x_names,
)

__all__ = [
    "Term", "RhsSpec", "Equation", "DerivedOperator", "TheoremResult",
    "AssumptionReport", "CheckReport", "InapplicableError",
    "check_assumptions", "check_swiatak", "check_corollary",
    "check_theorem23", "check_theorem21", "derive_pde", "run_checks",
    "apply_field_form", "apply_expansion", "mean_value_lhs", "residual",
    "verify_square_identity", "IdentityReport",
    "VERDICT_PASS", "VERDICT_FAIL", "VERDICT_NA", "VERDICT_ERROR",
]

VERDICT_PASS = "pass"
VERDICT_FAIL = "fail_on_samples"
VERDICT_NA = "not_applicable"
VERDICT_ERROR = "error"


class InapplicableError(ValueError):
    """The derivation's precondition does not hold for this equation."""


# --------------------------------------------------------------------------
# Equation data
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Term:
    """One summand a(x,t) f(x + phi(t)); phi has one component per x-axis."""

    a: Expr = None  # type: ignore[assignment]
    phi: tuple[Expr, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(self.phi))


@dataclass(frozen=True)
class RhsSpec:
    """Right-hand side F(x, z_1..z_s) with z_i standing for f(lam_i(x))."""

    s: int = 0
    F: Expr = ZERO
    lambdas: tuple[tuple[Expr, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "lambdas", tuple(tuple(m) for m in self.lambdas)
        )
        if len(self.lambdas) != self.s:
            raise ValueError(f"{self.s} inner maps declared, {len(self.lambdas)} given")
        stray = {v for v in free_vars(self.F) if v.startswith("t")}
        if stray:
            raise ValueError(
                f"right-hand side must not depend on parameter variables (found {sorted(stray)})"
            )
        for i, m in enumerate(self.lambdas, 1):
            for comp in m:
                bad = {v for v in free_vars(comp) if not v.startswith("x")}
                if bad:
                    raise ValueError(
                        f"inner map {i} may depend on x only (found {sorted(bad)})"
                    )


@dataclass(frozen=True)
class Equation:
    """The full equation instance: dimensions, terms, inhomogeneity, anchor."""

    n: int = 1
    r: int = 1
    k: int = 1
    terms: tuple[Term, ...] = ()
    b: Expr = ZERO
    t0: Point = None  # type: ignore[assignment]
    param_direction: tuple[Fraction, ...] = ()
    rhs: RhsSpec | None = None

    def __post_init__(self):
        if self.n < 1 or self.r < 1:
            raise ValueError("dimensions n and r must be at least 1")
        terms = tuple(
            Term(simplify(t.a), tuple(simplify(p) for p in t.phi))
            for t in self.terms
        )
        object.__setattr__(self, "terms", terms)
        if self.k != len(terms):
            raise ValueError(f"k={self.k} but {len(terms)} terms given")
        if self.k < 1:
            raise ValueError("at least one term is required")
        xs = set(x_names(self.n))
        ts = set(t_names(self.r))
        for j, term in enumerate(terms, 1):
            if len(term.phi) != self.n:
                raise ValueError(
                    f"term {j}: shift has {len(term.phi)} components, expected {self.n}"
                )
            bad = free_vars(term.a) - xs - ts
            if bad:
                raise ValueError(f"term {j}: coefficient uses {sorted(bad)}")
            for l, comp in enumerate(term.phi, 1):
                bad = free_vars(comp) - ts
                if bad:
                    raise ValueError(
                        f"term {j}: shift component {l} must depend on parameters only "
                        f"(found {sorted(bad)})"
                    )
        object.__setattr__(self, "b", simplify(self.b))
        bad = free_vars(self.b) - xs - ts
        if bad:
            raise ValueError(f"inhomogeneous part uses {sorted(bad)}")

        t0 = self.t0 if self.t0 is not None else Point((Fraction(0),) * self.r, "parameter")
        if t0.kind != "parameter":
            t0 = Point(t0.coords, "parameter")
        if t0.dim != self.r:
            raise ValueError(f"anchor has dimension {t0.dim}, expected {self.r}")
        if not t0.is_exact():
            raise ValueError("anchor coordinates must be exact rationals")
        object.__setattr__(self, "t0", t0)

        direction = self.param_direction or ((Fraction(1),) + (Fraction(0),) * (self.r - 1))
        direction = tuple(as_fraction(w) for w in direction)
        if len(direction) != self.r:
            raise ValueError(
                f"parameter direction has {len(direction)} components, expected {self.r}"
            )
        if all(w == 0 for w in direction):
            raise ValueError("parameter direction must be nonzero")
        object.__setattr__(self, "param_direction", direction)

    # -- parameter calculus -------------------------------------------------

    def dt(self, e: Expr) -> Expr:
        """Derivative along the chosen parameter direction."""
        return directional_diff(e, t_names(self.r), self.param_direction)

    def at_anchor(self, e: Expr) -> Expr:
        """Freeze every parameter variable at the anchor value."""
        mapping = {
            name: Const(v) for name, v in zip(t_names(self.r), self.t0.coords)
        }
        return subs(e, mapping)

    def phi_prime(self, j: int) -> tuple[Expr, ...]:
        """phi_j'(t0) componentwise (1-based term index)."""
        return tuple(self.at_anchor(self.dt(c)) for c in self.terms[j - 1].phi)

    def phi_second(self, j: int) -> tuple[Expr, ...]:
        """phi_j''(t0) componentwise (1-based term index)."""
        return tuple(self.at_anchor(self.dt(self.dt(c))) for c in self.terms[j - 1].phi)

    def a_at_anchor(self, j: int) -> Expr:
        return self.at_anchor(flagged_nonneg(self.terms[j - 1].a))

    def t_binding(self, t: Point) -> dict[str, Number]:
        return {name: v for name, v in zip(t_names(self.r), t.coords)}


# --------------------------------------------------------------------------
# Assumption diagnostics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AssumptionReport:
    """Sampled evidence for the standing hypotheses.

    anchor_ok certifies exactly (every shift is identically 0 at the
    anchor); the nonnegativity and positivity entries certify only the
    sampled points.
    """

    anchor_ok: bool = True
    anchor_residuals: tuple[tuple[Number, ...], ...] = ()
    nonneg_violations: tuple[tuple[int, Point, Point, Number], ...] = ()
    positivity_violations: tuple[tuple[int, Point, Number], ...] = ()
    eval_errors: tuple[str, ...] = ()

    @property
    def degenerate_points(self) -> tuple[tuple[int, Point], ...]:
        return tuple(
            (j, p) for j, p, v in self.positivity_violations if v == 0
        )

    @property
    def nonneg_ok(self) -> bool:
        return not self.nonneg_violations

    @property
    def positivity_ok(self) -> bool:
        return not self.positivity_violations


def _parameter_plan(eq: Equation) -> SamplingPlan:
    # A-1 is sampled on a parameter box of radius 1 around the anchor
    box = tuple((v - 1, v + 1) for v in eq.t0.coords)
    return SamplingPlan(box=box, grid=3)


def check_assumptions(eq: Equation, sampling: SamplingPlan) -> AssumptionReport:
    """Evaluate the standing hypotheses on the sample set.

    Violations are findings, not exceptions; expressions that cannot be
    evaluated at a sample point are recorded in eval_errors.
    """
    errors: list[str] = []

    anchor_binding = eq.t_binding(eq.t0)
    residuals: list[tuple[Number, ...]] = []
    anchor_ok = True
    for j, term in enumerate(eq.terms, 1):
        row: list[Number] = []
        for comp in term.phi:
            try:
                v = evaluate(comp, anchor_binding)
            except ExprError as exc:
                errors.append(f"shift {j} at anchor: {exc}")
                v = float("nan")
                anchor_ok = False
            row.append(v)
            if v != 0:
                anchor_ok = False
        residuals.append(tuple(row))

    xpts = sampling.points(eq.n)
    tpts = _parameter_plan(eq).points(eq.r)

    nonneg: list[tuple[int, Point, Point, Number]] = []
    for j, term in enumerate(eq.terms, 1):
        for xp in xpts:
            xb = xp.bindings("x")
            for tp in tpts:
                binding = {**xb, **eq.t_binding(tp)}
                try:
                    v = evaluate(term.a, binding)
                except ExprError as exc:
                    errors.append(f"coefficient {j} at ({xp.coords}, {tp.coords}): {exc}")
                    continue
                if v < 0:
                    nonneg.append((j, xp, tp, v))

    positivity: list[tuple[int, Point, Number]] = []
    for j in range(1, eq.k + 1):
        a0 = eq.a_at_anchor(j)
        for xp in xpts:
            try:
                v = evaluate(a0, xp.bindings("x"))
            except ExprError as exc:
                errors.append(f"coefficient {j} at anchor, x={xp.coords}: {exc}")
                continue
            if v <= 0:
                positivity.append((j, xp, v))

    return AssumptionReport(
        anchor_ok=anchor_ok,
        anchor_residuals=tuple(residuals),
        nonneg_violations=tuple(nonneg),
        positivity_violations=tuple(positivity),
        eval_errors=tuple(errors),
    )


# --------------------------------------------------------------------------
# Theorem checkers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TheoremResult:
    name: str = ""
    verdict: str = VERDICT_NA
    detail: str = ""
    witness_labels: tuple[str, ...] = ()
    failing_points: tuple[Point, ...] = ()
    excluded_points: tuple[Point, ...] = ()
    depth_used: int | None = None
    warnings: tuple[str, ...] = ()


_ANCHOR_MSG = "anchor condition fails: some shift is nonzero at t0"


def _fmt_point(p: Point) -> str:
    return "(" + ", ".join(str(c) for c in p.coords) + ")"


def _eval_vector(comps: Sequence[Expr]) -> list[Number]:
    return [evaluate(c, {}) for c in comps]


def check_swiatak(
    eq: Equation,
    sampling: SamplingPlan,
    assumptions: AssumptionReport | None = None,
) -> TheoremResult:
    """First-derivative spanning: the constant vectors {phi_j'(t0)} alone.

    Requires positivity of every coefficient at the anchor on the sampled
    x-grid; the spanning decision itself is exact (constant vectors).
    """
    name = "swiatak"
    if assumptions is None:
        assumptions = check_assumptions(eq, sampling)
    if not assumptions.anchor_ok:
        return TheoremResult(name, VERDICT_NA, _ANCHOR_MSG)
    try:
        rows = [_eval_vector(eq.phi_prime(j)) for j in range(1, eq.k + 1)]
    except ExprError as exc:
        return TheoremResult(name, VERDICT_ERROR, f"shift derivative evaluation failed: {exc}")
    labels = [f"phi{j}'" for j in range(1, eq.k + 1)]
    rank, witness, arith, _ = matrix_rank(rows, eq.n)
    if not assumptions.positivity_ok:
        pts = tuple(p for _, p, _ in assumptions.positivity_violations)
        return TheoremResult(
            name, VERDICT_FAIL,
            "positivity hypothesis fails on sampled set: some a_j(x, t0) <= 0",
            failing_points=pts,
        )
    if rank == eq.n:
        return TheoremResult(
            name, VERDICT_PASS,
            f"first shift derivatives span (rank {rank}, {arith} arithmetic)",
            witness_labels=tuple(labels[i] for i in witness),
        )
    return TheoremResult(
        name, VERDICT_FAIL,
        f"first shift derivatives have rank {rank} < {eq.n}",
    )


def check_theorem23(
    eq: Equation,
    sampling: SamplingPlan,
    assumptions: AssumptionReport | None = None,
) -> TheoremResult:
    """Constant-coefficient spanning: {phi_j'(t0)} plus sum_j a_j phi_j''(t0).

    Applies only when every coefficient is a positive constant; the rank
    decision is exact for rational data and point-independent either way.
    """
    name = "theorem23"
    if assumptions is None:
        assumptions = check_assumptions(eq, sampling)
    if not assumptions.anchor_ok:
        return TheoremResult(name, VERDICT_NA, _ANCHOR_MSG)
    nonconst = [
        j for j, term in enumerate(eq.terms, 1) if free_vars(term.a)
    ]
    if nonconst:
        return TheoremResult(
            name, VERDICT_NA,
            f"coefficient a_{nonconst[0]} is not constant; "
            "the drift-augmented check covers this case",
        )
    try:
        a_vals = [evaluate(eq.terms[j - 1].a, {}) for j in range(1, eq.k + 1)]
        if any(v <= 0 for v in a_vals):
            bad = next(j for j, v in enumerate(a_vals, 1) if v <= 0)
            return TheoremResult(
                name, VERDICT_FAIL,
                f"constant coefficient a_{bad} is not positive",
            )
        rows = [_eval_vector(eq.phi_prime(j)) for j in range(1, eq.k + 1)]
        curvature = [
            add_all(tuple(
                mul_all((eq.terms[j - 1].a, comp))
                for j, comp in zip(range(1, eq.k + 1), comps)
            ))
            for comps in zip(*(eq.phi_second(j) for j in range(1, eq.k + 1)))
        ]
        rows.append(_eval_vector([simplify(c) for c in curvature]))
    except ExprError as exc:
        return TheoremResult(name, VERDICT_ERROR, f"evaluation failed: {exc}")
    labels = [f"phi{j}'" for j in range(1, eq.k + 1)] + ["sum_j a_j*phi_j''"]
    rank, witness, arith, _ = matrix_rank(rows, eq.n)
    if rank == eq.n:
        return TheoremResult(
            name, VERDICT_PASS,
            f"shift derivatives plus mean curvature vector span (rank {rank}, {arith} arithmetic)",
            witness_labels=tuple(labels[i] for i in witness),
        )
    return TheoremResult(
        name, VERDICT_FAIL,
        f"shift derivatives plus mean curvature vector have rank {rank} < {eq.n}",
    )


def check_corollary(
    eq: Equation,
    sampling: SamplingPlan,
    assumptions: AssumptionReport | None = None,
    eps_rank: float = DEFAULT_EPS_RANK,
) -> TheoremResult:
    """Drift-augmented spanning: {phi_j'(t0)} plus Psi(x,t0), per sampled x.

    Sample points where some a_j(x,t0) <= 0 are excluded (the positivity
    hypothesis fails there) and reported; they do not count as failures
    of the spanning condition.
    """
    name = "corollary22"
    if assumptions is None:
        assumptions = check_assumptions(eq, sampling)
    if not assumptions.anchor_ok:
        return TheoremResult(name, VERDICT_NA, _ANCHOR_MSG)
    try:
        const_rows = [_eval_vector(eq.phi_prime(j)) for j in range(1, eq.k + 1)]
    except ExprError as exc:
        return TheoremResult(name, VERDICT_ERROR, f"shift derivative evaluation failed: {exc}")
    labels = [f"phi{j}'" for j in range(1, eq.k + 1)] + ["Psi"]
    psi = build_psi(eq, t_frozen=True)
    a0 = [eq.a_at_anchor(j) for j in range(1, eq.k + 1)]

    excluded: list[Point] = []
    failing: list[Point] = []
    warnings: list[str] = []
    witness: tuple[str, ...] = ()
    checked = 0
    for p in sampling.points(eq.n):
        xb = p.bindings("x")
        try:
            avals = [evaluate(a, xb) for a in a0]
        except ExprError as exc:
            excluded.append(p)
            warnings.append(f"coefficient undefined at {_fmt_point(p)}: {exc}")
            continue
        if any(v <= 0 for v in avals):
            excluded.append(p)
            kind = "degenerates to zero" if all(v >= 0 for v in avals) else "is negative"
            warnings.append(
                f"positivity hypothesis fails at {_fmt_point(p)}: some a_j(x, t0) {kind}"
            )
            continue
        try:
            psi_row = [evaluate(c, xb) for c in psi.coeffs]
        except ExprError as exc:
            return TheoremResult(
                name, VERDICT_ERROR,
                f"drift vector evaluation failed at {_fmt_point(p)}: {exc}",
            )
        rank, w, _, _ = matrix_rank(const_rows + [psi_row], eq.n, eps_rank)
        checked += 1
        if rank < eq.n:
            failing.append(p)
        elif not witness:
            witness = tuple(labels[i] for i in w)
    if failing:
        return TheoremResult(
            name, VERDICT_FAIL,
            f"shift derivatives plus drift vector below full rank at "
            f"{len(failing)} of {checked} checked points",
            failing_points=tuple(failing),
            excluded_points=tuple(excluded),
            warnings=tuple(warnings),
        )
    if checked == 0:
        return TheoremResult(
            name, VERDICT_NA,
            "positivity hypothesis fails at every sampled point",
            excluded_points=tuple(excluded),
            warnings=tuple(warnings),
        )
    return TheoremResult(
        name, VERDICT_PASS,
        f"shift derivatives plus drift vector spanning on sampled set "
        f"({checked} points)",
        witness_labels=witness,
        excluded_points=tuple(excluded),
        warnings=tuple(warnings),
    )


def check_theorem21(
    eq: Equation,
    sampling: SamplingPlan,
    max_depth: int = 4,
    assumptions: AssumptionReport | None = None,
    eps_rank: float = DEFAULT_EPS_RANK,
) -> TheoremResult:
    """Bracket-generated spanning of L_1..L_k, L_0 and their commutators.

    Degenerate points (some a_j(x,t0) = 0) stay in the sample: the field
    coefficients evaluate to 0 there, and a warning records the finite-
    order caveat for each such point.
    """
    name = "theorem21"
    if assumptions is None:
        assumptions = check_assumptions(eq, sampling)
    if not assumptions.anchor_ok:
        return TheoremResult(name, VERDICT_NA, _ANCHOR_MSG)
    generators = [build_lj(eq, j) for j in range(1, eq.k + 1)]
    generators.append(build_l0(eq))
    # Iterative deepening: brackets of awkward coefficients can grow fast,
    # so stop at the shallowest depth that already spans (the verdict and
    # the witnesses are the same ones a full-depth run would report).
    depth = 0
    while True:
        basis = generate_brackets(generators, depth)
        report = check_spanning(basis, sampling, eps_rank)
        if report.undefined or report.spanning_everywhere:
            break
        if depth >= max_depth or basis.saturated:
            break
        depth += 1

    warnings = [
        f"coefficient a_{j} degenerates to zero at {_fmt_point(p)}; "
        "bracket criterion still applies for finite-order degeneracy"
        for j, p in assumptions.degenerate_points
    ]
    if report.undefined:
        return TheoremResult(
            name, VERDICT_ERROR,
            "field coefficients undefined at sampled points: "
            + "; ".join(msg for _, msg in report.undefined),
            excluded_points=tuple(p for p, _ in report.undefined),
            warnings=tuple(warnings),
        )
    if report.spanning_everywhere:
        needed = max(
            (r.min_depth_to_span or 0) for r in report.records
        )
        first = report.records[0]
        return TheoremResult(
            name, VERDICT_PASS,
            f"bracket-generated fields {report.describe()}",
            witness_labels=first.witness_labels,
            depth_used=needed,
        )
    return TheoremResult(
        name, VERDICT_FAIL,
        f"bracket-generated fields {report.describe()}",
        failing_points=report.failing_points,
        depth_used=basis.requested_depth,
        warnings=tuple(warnings),
    )


# --------------------------------------------------------------------------
# The derived operator
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DerivedOperator:
    """The second-order operator obtained by differentiating the equation
    twice in the parameter at the anchor.

    Two equivalent representations are kept: the sum-of-squares field form
    sum_j L_j^2 + L_0 + c, and the coordinate expansion
    sum_{p,q} A[p][q] d_p d_q + sum_p B[p] d_p + c.  The inhomogeneity g
    is the second parameter derivative of b at the anchor.
    """

    n: int = 1
    l_fields: tuple[VectorField, ...] = ()
    l0: VectorField = None  # type: ignore[assignment]
    psi: PsiField = None  # type: ignore[assignment]
    c: Expr = ZERO
    g: Expr = ZERO
    a_matrix: tuple[tuple[Expr, ...], ...] = ()
    b_vector: tuple[Expr, ...] = ()


def derive_pde(eq: Equation) -> DerivedOperator:
    """Build the derived operator; refuses when the anchor condition fails.

    The coordinate expansion is assembled directly from the second
    parameter derivative of the left-hand side, independently of the
    field form; their agreement is a checkable identity, not a given.
    """
    anchor_binding = eq.t_binding(eq.t0)
    for j, term in enumerate(eq.terms, 1):
        for comp in term.phi:
            try:
                v = evaluate(comp, anchor_binding)
            except ExprError as exc:
                raise InapplicableError(
                    f"shift {j} cannot be evaluated at the anchor: {exc}"
                ) from exc
            if v != 0:
                raise InapplicableError("shift-at-anchor nonzero: Lemma 3.1 inapplicable")

    l_fields = tuple(build_lj(eq, j) for j in range(1, eq.k + 1))
    psi = build_psi(eq, t_frozen=True)
    l0 = VectorField(psi.coeffs, "L0")

    c = simplify(add_all(tuple(
        eq.at_anchor(eq.dt(eq.dt(term.a))) for term in eq.terms
    )))
    g = simplify(eq.at_anchor(eq.dt(eq.dt(eq.b))))

    a_anchor = [eq.a_at_anchor(j) for j in range(1, eq.k + 1)]
    dprime = [eq.phi_prime(j) for j in range(1, eq.k + 1)]
    dsecond = [eq.phi_second(j) for j in range(1, eq.k + 1)]
    da_anchor = [
        eq.at_anchor(eq.dt(flagged_nonneg(term.a))) for term in eq.terms
    ]

    a_matrix = tuple(
        tuple(
            simplify(add_all(tuple(
                mul_all((a_anchor[j], dprime[j][p], dprime[j][q]))
                for j in range(eq.k)
            )))
            for q in range(eq.n)
        )
        for p in range(eq.n)
    )
    b_vector = tuple(
        simplify(add_all(tuple(
            add_all((
                mul_all((Const(Fraction(2)), da_anchor[j], dprime[j][p])),
                mul_all((a_anchor[j], dsecond[j][p])),
            ))
            for j in range(eq.k)
        )))
        for p in range(eq.n)
    )

    return DerivedOperator(
        n=eq.n, l_fields=l_fields, l0=l0, psi=psi, c=c, g=g,
        a_matrix=a_matrix, b_vector=b_vector,
    )


def apply_field_form(op: DerivedOperator, f: Expr) -> Expr:
    """(sum_j L_j^2 + L_0 + c) applied to f, symbolically."""
    parts = [apply(X, apply(X, f)) for X in op.l_fields]
    parts.append(apply(op.l0, f))
    if op.c != ZERO:
        parts.append(mul_all((op.c, f)))
    return simplify(add_all(tuple(parts)))


def apply_expansion(op: DerivedOperator, f: Expr) -> Expr:
    """(sum A_pq d_p d_q + sum B_p d_p + c) applied to f, symbolically."""
    names = x_names(op.n)
    parts = []
    for p in range(op.n):
        dp = diff(f, names[p])
        for q in range(op.n):
            if op.a_matrix[p][q] == ZERO:
                continue
            parts.append(mul_all((op.a_matrix[p][q], diff(dp, names[q]))))
        if op.b_vector[p] != ZERO:
            parts.append(mul_all((op.b_vector[p], dp)))
    if op.c != ZERO:
        parts.append(mul_all((op.c, f)))
    return simplify(add_all(tuple(parts))) if parts else ZERO


# --------------------------------------------------------------------------
# Identity self-test and residuals
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class IdentityCase:
    testfn: Expr = ZERO
    point: Point = None  # type: ignore[assignment]
    lhs: float = 0.0
    rhs: float = 0.0

    @property
    def discrepancy(self) -> float:
        return abs(self.lhs - self.rhs)


@dataclass(frozen=True)
class IdentityReport:
    cases: tuple[IdentityCase, ...] = ()

    @property
    def max_discrepancy(self) -> float:
        return max((c.discrepancy for c in self.cases), default=0.0)


def verify_square_identity(
    a: Expr,
    phi_prime: Sequence[Fraction],
    testfns: Sequence[Expr],
    points: Sequence[Point],
) -> IdentityReport:
    """Check (sqrt(a) v.grad)^2 == a (v.grad)^2 + sqrt(a)(v.grad sqrt(a)) v.grad
    by applying both sides to test functions and comparing values.
    """
    direction = tuple(as_fraction(w) for w in phi_prime)
    a = flagged_nonneg(simplify(a))
    root = simplify(Sqrt(a))
    L = VectorField(
        tuple(simplify(mul_all((root, Const(w)))) for w in direction), "L"
    )
    Y = VectorField(tuple(Const(w) for w in direction), "Y")
    y_root = apply(Y, root)
    cases = []
    for f in testfns:
        lhs_expr = apply(L, apply(L, f))
        rhs_expr = simplify(add_all((
            mul_all((a, apply(Y, apply(Y, f)))),
            mul_all((root, y_root, apply(Y, f))),
        )))
        for p in points:
            binding = p.bindings("x")
            lhs = float(evaluate(lhs_expr, binding))
            rhs = float(evaluate(rhs_expr, binding))
            cases.append(IdentityCase(f, p, lhs, rhs))
    return IdentityReport(tuple(cases))


def mean_value_lhs(eq: Equation, f: Expr, x: Point, t: Point) -> Number:
    """sum_j a_j(x,t) f(x + phi_j(t)) evaluated at one (x, t)."""
    if x.dim != eq.n or t.dim != eq.r:
        raise ValueError("point dimensions do not match the equation")
    xb = x.bindings("x")
    tb = eq.t_binding(t)
    joint = {**xb, **tb}
    total: Number = Fraction(0)
    for term in eq.terms:
        a_val = evaluate(term.a, joint)
        shift = [evaluate(comp, tb) for comp in term.phi]
        shifted = {
            name: _num_sum(xv, sv)
            for (name, xv), sv in zip(xb.items(), shift)
        }
        f_val = evaluate(f, shifted)
        total = _num_sum(total, _num_prod(a_val, f_val))
    return total


def residual(eq: Equation, f: Expr, x: Point, t: Point) -> Number:
    """Pointwise defect of f in the equation at (x, t).

    sum_j a_j(x,t) f(x + phi_j(t)) - F(x, f(lam_1(x)), ...) - b(x,t);
    zero everywhere exactly when f is a solution.
    """
    xb = x.bindings("x")
    tb = eq.t_binding(t)
    joint = {**xb, **tb}
    total = mean_value_lhs(eq, f, x, t)
    if eq.rhs is not None:
        zb = dict(xb)
        for i, lam in enumerate(eq.rhs.lambdas, 1):
            inner = {
                name: evaluate(comp, xb)
                for name, comp in zip(x_names(eq.n), lam)
            }
            zb[f"z{i}"] = evaluate(f, inner)
        total = _num_sum(total, _num_neg(evaluate(eq.rhs.F, zb)))
    total = _num_sum(total, _num_neg(evaluate(eq.b, joint)))
    return total


def _num_sum(a: Number, b: Number) -> Number:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a + b
    return float(a) + float(b)


def _num_prod(a: Number, b: Number) -> Number:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a * b
    return float(a) * float(b)


def _num_neg(a: Number) -> Number:
    return -a


# --------------------------------------------------------------------------
# Orchestration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckReport:
    assumptions: AssumptionReport = None  # type: ignore[assignment]
    swiatak: TheoremResult = None  # type: ignore[assignment]
    corollary22: TheoremResult = None  # type: ignore[assignment]
    theorem23: TheoremResult = None  # type: ignore[assignment]
    theorem21: TheoremResult = None  # type: ignore[assignment]

    def results(self) -> tuple[TheoremResult, ...]:
        return (self.swiatak, self.corollary22, self.theorem23, self.theorem21)

    @property
    def any_pass(self) -> bool:
        return any(t.verdict == VERDICT_PASS for t in self.results())


def run_checks(
    eq: Equation,
    sampling: SamplingPlan | None = None,
    max_depth: int = 4,
    eps_rank: float = DEFAULT_EPS_RANK,
) -> CheckReport:
    """All four certificates over one shared sample set."""
    plan = sampling if sampling is not None else SamplingPlan()
    assumptions = check_assumptions(eq, plan)
    return CheckReport(
        assumptions=assumptions,
        swiatak=check_swiatak(eq, plan, assumptions),
        corollary22=check_corollary(eq, plan, assumptions, eps_rank),
        theorem23=check_theorem23(eq, plan, assumptions),
        theorem21=check_theorem21(eq, plan, max_depth, assumptions, eps_rank),
    )
