"""hypocheck: regularity certificates for mean-value functional equations.

Given an equation whose unknown is averaged over parameter-dependent
shifts, the package derives the associated second-order operator in
sum-of-squares form, generates iterated commutators of its vector fields,
and checks pointwise spanning conditions that certify which smoothness
statement applies.  A finite-difference harness cross-validates the
symbolic derivation on concrete solutions.
"""

from .expr import (
    Add, Const, Cos, Div, DomainError, Exp, Expr, ExprError, Log, Mul, Neg,
    ParseError, Point, Pow, Sin, Sqrt, UnboundVariableError,
    UnknownIdentifierError, Var, diff, evaluate, parse, render, simplify,
    substitute,
)
from .vfield import (
    PsiField, VectorField, apply, build_l0, build_lj, build_psi, lie_bracket,
)
from .hormander import (
    BracketBasis, RankReport, SamplingPlan, check_spanning, generate_brackets,
    rank_at,
)
from .feq import (
    AssumptionReport, CheckReport, DerivedOperator, Equation,
    InapplicableError, RhsSpec, Term, TheoremResult, VERDICT_ERROR,
    VERDICT_FAIL, VERDICT_NA, VERDICT_PASS, apply_expansion, apply_field_form,
    check_assumptions, check_corollary, check_swiatak, check_theorem21,
    check_theorem23, derive_pde, mean_value_lhs, residual, run_checks,
    verify_square_identity,
)
from .verify import (
    FdPlan, Lemma31Report, check_derived_pde, check_lemma31, fd_dt_lhs,
    fd_gradient_check, fd_residual,
)
from .cli import SpecError, load_document, load_spec

__version__ = "0.1.0"
