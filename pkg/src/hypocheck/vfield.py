"""First-order homogeneous differential operators with symbolic coefficients.

A vector field here is the operator sum(coeffs[l] * d/dx_{l+1}); these carry
the generators sqrt(a_j) phi_j' . grad_x, the drift Psi . grad_x, and every
iterated commutator derived from them.  Coefficients are expressions over
the spatial variables (parameter variables may appear only in an unfrozen
drift field, tagged as such).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Sequence

from .expr import (
    Add, Const, Expr, Mul, Neg, Sqrt, ZERO, add_all, diff, directional_diff,
    flagged_nonneg, free_vars, mul_all, simplify, subs,
)

if TYPE_CHECKING:  # pragma: no cover
    from .feq import Equation

__all__ = [
    "VectorField", "PsiField", "DimensionMismatch",
    "apply", "lie_bracket", "zero_field", "scale_field",
    "build_lj", "build_psi", "build_l0",
    "x_names", "t_names",
]


class DimensionMismatch(ValueError):
    """Operands live on spaces of different dimension."""


def x_names(n: int) -> tuple[str, ...]:
    return tuple(f"x{i + 1}" for i in range(n))


def t_names(r: int) -> tuple[str, ...]:
    return tuple(f"t{i + 1}" for i in range(r))


@dataclass(frozen=True)
class VectorField:
    """sum_l coeffs[l] d/dx_{l+1}; label records how the field was formed."""

    coeffs: tuple[Expr, ...] = ()
    label: str = ""
    frozen: bool = True  # False only while parameter variables remain

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(self.coeffs))
        for c in self.coeffs:
            bad = {v for v in free_vars(c) if v.startswith("z")}
            if bad:
                raise ValueError(f"field coefficient contains {sorted(bad)}")
            if self.frozen:
                stray = {v for v in free_vars(c) if v.startswith("t")}
                if stray:
                    raise ValueError(
                        f"frozen field coefficient contains parameter variables {sorted(stray)}"
                    )

    @property
    def dim(self) -> int:
        return len(self.coeffs)

    def is_zero(self) -> bool:
        return all(c == ZERO for c in self.coeffs)

    def __str__(self) -> str:
        body = ", ".join(str(c) for c in self.coeffs)
        return f"{self.label or 'field'}({body})"


def zero_field(n: int, label: str = "0") -> VectorField:
    return VectorField(tuple(ZERO for _ in range(n)), label)


def scale_field(c: Fraction, X: VectorField, label: str | None = None) -> VectorField:
    coeffs = tuple(simplify(Mul((Const(c), e))) for e in X.coeffs)
    return VectorField(coeffs, label if label is not None else X.label, X.frozen)


def apply(X: VectorField, e: Expr) -> Expr:
    """Directional derivative sum_l coeffs[l] * de/dx_{l+1}, simplified."""
    over = {
        v for v in free_vars(e)
        if v.startswith("x") and int(v[1:]) > X.dim
    }
    if over:
        raise DimensionMismatch(
            f"expression uses {sorted(over)} but the field has dimension {X.dim}"
        )
    names = x_names(X.dim)
    terms = []
    for c, v in zip(X.coeffs, names):
        if c == ZERO:
            continue
        d = simplify(diff(e, v))
        if d == ZERO:
            continue
        if c == Const(Fraction(1)):
            terms.append(d)
        elif isinstance(d, Add):
            # distribute the coefficient over the summands so quotient
            # factors can cancel (e.g. sqrt(u) times u'/sqrt(u))
            terms.extend(mul_all((c, part)) for part in d.args)
        else:
            terms.append(mul_all((c, d)))
    return simplify(add_all(terms)) if terms else ZERO


def lie_bracket(X: VectorField, Y: VectorField) -> VectorField:
    """Commutator [X, Y]: first-order again, coefficients X(Y_l) - Y(X_l)."""
    if X.dim != Y.dim:
        raise DimensionMismatch(f"bracket of dim {X.dim} with dim {Y.dim}")
    coeffs = tuple(
        simplify(add_all((apply(X, yl), Neg(apply(Y, xl)))))
        for xl, yl in zip(X.coeffs, Y.coeffs)
    )
    return VectorField(coeffs, f"[{X.label},{Y.label}]", X.frozen and Y.frozen)


# --------------------------------------------------------------------------
# Construction from equation data
# --------------------------------------------------------------------------

def _dt(eq: "Equation", e: Expr) -> Expr:
    # d/dt along the chosen parameter direction (the scalar-parameter view)
    return directional_diff(e, t_names(eq.r), eq.param_direction)


def _at_anchor(eq: "Equation", e: Expr) -> Expr:
    mapping = {
        name: Const(v) for name, v in zip(t_names(eq.r), eq.t0.coords)
    }
    return subs(e, mapping)


def build_lj(eq: "Equation", j: int) -> VectorField:
    """Generator number j (1-based): sqrt(a_j(x, t0)) * phi_j'(t0) . grad_x."""
    if not 1 <= j <= eq.k:
        raise IndexError(f"term index {j} outside 1..{eq.k}")
    term = eq.terms[j - 1]
    a0 = _at_anchor(eq, flagged_nonneg(term.a))
    root = simplify(Sqrt(a0))
    coeffs = []
    for comp in term.phi:
        slope = _at_anchor(eq, _dt(eq, comp))
        coeffs.append(simplify(mul_all((root, slope))))
    return VectorField(tuple(coeffs), f"L{j}")


@dataclass(frozen=True)
class PsiTermParts:
    """Per-term summand groups of the drift vector, kept for reporting.

    Componentwise: drift = 2 (da_j/dt) phi_j', correction =
    -(1/2)(phi_j' . grad_x a_j) phi_j', curvature = a_j phi_j''.  The
    correction is the chain-rule form of -sqrt(a_j)(phi_j' . grad_x
    sqrt(a_j)) phi_j', which stays defined where a_j vanishes.
    """

    drift: tuple[Expr, ...]
    correction: tuple[Expr, ...]
    curvature: tuple[Expr, ...]

    def total(self) -> tuple[Expr, ...]:
        return tuple(
            simplify(add_all(parts))
            for parts in zip(self.drift, self.correction, self.curvature)
        )


@dataclass(frozen=True)
class PsiField:
    """The drift vector with its per-term decomposition preserved."""

    field: VectorField = None  # type: ignore[assignment]
    parts: tuple[PsiTermParts, ...] = ()

    @property
    def coeffs(self) -> tuple[Expr, ...]:
        return self.field.coeffs

    @property
    def dim(self) -> int:
        return self.field.dim


def build_psi(eq: "Equation", t_frozen: bool = True) -> PsiField:
    """Assemble the drift vector

        Psi(x,t) = sum_j [ {2 da_j/dt - (1/2)(phi_j' . grad_x a_j)} phi_j'
                           + a_j phi_j'' ]

    keeping the three summand groups of each term.  The middle scalar is
    sqrt(a_j)(phi_j' . grad_x sqrt(a_j)) written via the chain rule, so no
    radicals enter the coefficients.  With ``t_frozen`` the parameter is
    substituted with the anchor value everywhere.
    """
    names = x_names(eq.n)
    freeze = (lambda e: _at_anchor(eq, e)) if t_frozen else simplify
    per_term: list[PsiTermParts] = []
    for term in eq.terms:
        a = flagged_nonneg(term.a)
        dphi = [_dt(eq, comp) for comp in term.phi]
        ddphi = [_dt(eq, d) for d in dphi]
        da = _dt(eq, a)
        dot = add_all(
            tuple(mul_all((dp, diff(a, v))) for dp, v in zip(dphi, names))
        ) if eq.n else ZERO
        scalar_drift = mul_all((Const(Fraction(2)), da))
        scalar_corr = Neg(mul_all((Const(Fraction(1, 2)), dot)))
        drift = tuple(freeze(mul_all((scalar_drift, dp))) for dp in dphi)
        corr = tuple(freeze(mul_all((scalar_corr, dp))) for dp in dphi)
        curv = tuple(freeze(mul_all((a, dd))) for dd in ddphi)
        per_term.append(PsiTermParts(drift, corr, curv))

    coeffs = tuple(
        simplify(add_all(tuple(
            add_all((p.drift[l], p.correction[l], p.curvature[l]))
            for p in per_term
        )))
        for l in range(eq.n)
    )
    field = VectorField(coeffs, "Psi", frozen=t_frozen)
    return PsiField(field, tuple(per_term))


def build_l0(eq: "Equation") -> VectorField:
    """The drift operator Psi(x, t0) . grad_x."""
    psi = build_psi(eq, t_frozen=True)
    return VectorField(psi.coeffs, "L0")
