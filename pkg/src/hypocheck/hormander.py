"""Bracket generation and pointwise spanning decisions.

Given generator fields, this module produces all left-nested iterated
commutators up to a depth bound and decides, at each point of a sampling
plan, whether the generated fields span the whole space.  A negative
verdict at a sampled point is definitive for that point; a positive
verdict certifies the sampled set only, and every report says so
("spanning on sampled set" — a sampler can never certify more).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .expr import (
    Add, Const, DomainError, Expr, ExprError, Mul, Neg, Point,
    UnboundVariableError, ZERO, evaluate, is_rational_closed, simplify,
)
from .vfield import DimensionMismatch, VectorField, lie_bracket, x_names

__all__ = [
    "SamplingPlan", "BasisEntry", "BracketBasis", "PointRank", "RankReport",
    "CoefficientUndefined", "generate_brackets", "matrix_rank", "rank_at",
    "check_spanning",
]

MAX_GRID_POINTS = 10_000
DEFAULT_EPS_RANK = 1e-9


class CoefficientUndefined(ExprError):
    """A field coefficient could not be evaluated at a sample point."""

    def __init__(self, label: str, point: Point, cause: Exception):
        self.label = label
        self.point = point
        self.cause = cause
        coords = ", ".join(str(c) for c in point.coords)
        super().__init__(
            f"coefficient undefined at point ({coords}): field {label}: {cause}"
        )


# --------------------------------------------------------------------------
# Sampling
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplingPlan:
    """Axis-aligned rational grid on a box, plus optional explicit points.

    ``box`` is one (lo, hi) pair per axis; None means [-1, 1] on every
    axis of whatever dimension the caller supplies.  The grid is clamped
    so its total size never exceeds MAX_GRID_POINTS (points per axis is
    reduced; explicit extra points are always kept).
    """

    box: tuple[tuple[Fraction, Fraction], ...] | None = None
    grid: int = 3
    extra_points: tuple[Point, ...] = ()

    def __post_init__(self):
        if self.grid < 1:
            raise ValueError("grid must be at least 1 point per axis")
        if self.box is not None:
            norm = tuple((Fraction(lo), Fraction(hi)) for lo, hi in self.box)
            for lo, hi in norm:
                if lo > hi:
                    raise ValueError(f"empty box axis [{lo}, {hi}]")
            object.__setattr__(self, "box", norm)
        object.__setattr__(self, "extra_points", tuple(self.extra_points))

    def resolved_box(self, n: int) -> tuple[tuple[Fraction, Fraction], ...]:
        if self.box is None:
            one = Fraction(1)
            return tuple((-one, one) for _ in range(n))
        if len(self.box) != n:
            raise DimensionMismatch(
                f"box has {len(self.box)} axes for dimension {n}"
            )
        return self.box

    def axis_count(self, n: int) -> int:
        g = self.grid
        while g > 1 and g ** n > MAX_GRID_POINTS:
            g -= 1
        return g

    def points(self, n: int) -> tuple[Point, ...]:
        box = self.resolved_box(n)
        g = self.axis_count(n)
        axes: list[tuple[Fraction, ...]] = []
        for lo, hi in box:
            if g == 1:
                axes.append(((lo + hi) / 2,))
            else:
                step = (hi - lo) / (g - 1)
                axes.append(tuple(lo + step * i for i in range(g)))
        coords: list[tuple[Fraction, ...]] = [()]
        for axis in axes:
            coords = [c + (v,) for c in coords for v in axis]
        pts = [Point(c, "spatial") for c in coords]
        for p in self.extra_points:
            if p.dim != n:
                raise DimensionMismatch(
                    f"extra point of dimension {p.dim} in dimension {n}"
                )
            pts.append(p)
        return tuple(pts)


# --------------------------------------------------------------------------
# Bracket generation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BasisEntry:
    field: VectorField = None  # type: ignore[assignment]
    depth: int = 0
    trace: str = ""


@dataclass(frozen=True)
class BracketBasis:
    generators: tuple[VectorField, ...] = ()
    generated: tuple[BasisEntry, ...] = ()
    requested_depth: int = 0

    @property
    def dim(self) -> int:
        return self.generators[0].dim if self.generators else 0

    @property
    def max_depth(self) -> int:
        return max((e.depth for e in self.generated), default=0)

    @property
    def saturated(self) -> bool:
        # deeper levels were requested but produced no new independent fields
        return self.max_depth < self.requested_depth

    def fields(self) -> tuple[VectorField, ...]:
        return tuple(e.field for e in self.generated)


def _coeff_split(e: Expr) -> tuple[Fraction, Expr | None]:
    # leading rational coefficient and the residual monomial (None for pure constants)
    if isinstance(e, Const):
        return e.value, None
    if isinstance(e, Neg):
        c, m = _coeff_split(e.arg)
        return -c, m
    if isinstance(e, Mul) and isinstance(e.args[0], Const):
        rest = e.args[1:]
        return e.args[0].value, (rest[0] if len(rest) == 1 else Mul(rest))
    return Fraction(1), e


def _rational_multiple(x: Sequence[Expr], y: Sequence[Expr]) -> bool:
    """True when x == q*y for one exact rational q, proven structurally.

    Sound but incomplete: dependence the simplifier cannot expose is left
    for the pointwise rank check to resolve.
    """
    ratio: Fraction | None = None
    for xi, yi in zip(x, y):
        xz, yz = xi == ZERO, yi == ZERO
        if xz and yz:
            continue
        if xz != yz:
            return False
        cx, mx = _coeff_split(xi)
        cy, my = _coeff_split(yi)
        if mx != my or cy == 0:
            return False
        q = cx / cy
        if ratio is None:
            ratio = q
        elif q != ratio:
            return False
    if ratio is None:
        return True  # both zero fields
    # confirm by exact subtraction, so a wrong split cannot slip through
    return all(
        simplify(Add((xi, Neg(Mul((Const(ratio), yi)))))) == ZERO
        for xi, yi in zip(x, y)
    )


def generate_brackets(generators: Sequence[VectorField], max_depth: int) -> BracketBasis:
    """All left-nested brackets [g, [g', [...]]] up to ``max_depth``.

    Depth-0 entries are exactly the generators, kept verbatim (even zero
    or duplicate generators stay, so witness indices match the caller's
    numbering).  At depth >= 1, structural zeros are dropped, as is any
    field equal to an exact rational multiple of an earlier entry.
    """
    gens = tuple(generators)
    if not gens:
        raise ValueError("at least one generator is required")
    dims = {g.dim for g in gens}
    if len(dims) != 1:
        raise DimensionMismatch(f"generators of mixed dimensions {sorted(dims)}")
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")

    entries: list[BasisEntry] = [BasisEntry(g, 0, g.label) for g in gens]
    level = list(entries)
    for depth in range(1, max_depth + 1):
        new_level: list[BasisEntry] = []
        for g in gens:
            for prev in level:
                br = lie_bracket(g, prev.field)
                if br.is_zero():
                    continue
                if any(
                    _rational_multiple(br.coeffs, old.field.coeffs)
                    for old in entries + new_level
                ):
                    continue
                new_level.append(BasisEntry(br, depth, br.label))
        if not new_level:
            break
        entries.extend(new_level)
        level = new_level
    return BracketBasis(gens, tuple(entries), max_depth)


# --------------------------------------------------------------------------
# Rank decisions
# --------------------------------------------------------------------------

def _eval_rows(basis: BracketBasis, p: Point) -> list[list]:
    binding = p.bindings("x")
    rows = []
    for entry in basis.generated:
        row = []
        for c in entry.field.coeffs:
            try:
                row.append(evaluate(c, binding))
            except (DomainError, UnboundVariableError) as exc:
                raise CoefficientUndefined(entry.field.label, p, exc) from exc
        rows.append(row)
    return rows


def _exact_rank(rows: list[list[Fraction]], n: int) -> tuple[int, list[int]]:
    pivots: list[tuple[int, list[Fraction]]] = []  # (pivot column, reduced row)
    witness: list[int] = []
    for idx, row in enumerate(rows):
        r = list(row)
        for col, prow in pivots:
            if r[col]:
                f = r[col] / prow[col]
                r = [a - f * b for a, b in zip(r, prow)]
        lead = next((c for c, v in enumerate(r) if v != 0), None)
        if lead is None:
            continue
        pivots.append((lead, r))
        witness.append(idx)
        if len(witness) == n:
            break
    return len(witness), witness


def _float_rank(
    rows: list[list[float]], n: int, eps_rank: float
) -> tuple[int, list[int], float]:
    scale = max((max(abs(v) for v in row) for row in rows if row), default=0.0)
    if scale == 0.0:
        return 0, [], 0.0
    thresh = eps_rank * scale
    pivots: list[tuple[int, list[float]]] = []
    witness: list[int] = []
    min_pivot = math.inf
    for idx, row in enumerate(rows):
        r = [float(v) for v in row]
        for col, prow in pivots:
            f = r[col] / prow[col]
            if f:
                r = [a - f * b for a, b in zip(r, prow)]
        lead, best = -1, 0.0
        for c, v in enumerate(r):
            if abs(v) > best:
                lead, best = c, abs(v)
        if best <= thresh:
            continue
        pivots.append((lead, r))
        witness.append(idx)
        min_pivot = min(min_pivot, best)
        if len(witness) == n:
            break
    return len(witness), witness, (0.0 if min_pivot is math.inf else min_pivot)


def matrix_rank(
    rows: Sequence[Sequence],
    n: int,
    eps_rank: float = DEFAULT_EPS_RANK,
    force_arithmetic: str | None = None,
) -> tuple[int, tuple[int, ...], str, float | None]:
    """Greedy row-by-row rank with earliest-wins witness.

    Exact rational elimination whenever every entry is rational;
    otherwise floating elimination with a pivot threshold relative to
    the largest entry magnitude.  Returns (rank, witness row indices,
    arithmetic used, min accepted pivot on the floating path).
    """
    if force_arithmetic not in (None, "exact", "floating"):
        raise ValueError(f"unknown arithmetic {force_arithmetic!r}")
    exact = all(isinstance(v, Fraction) for row in rows for v in row)
    if force_arithmetic == "floating":
        exact = False
    elif force_arithmetic == "exact" and not exact:
        raise ValueError("exact arithmetic forced but evaluation produced floats")
    if exact:
        rank, witness = _exact_rank([list(r) for r in rows], n)
        return rank, tuple(witness), "exact", None
    rank, witness, min_pivot = _float_rank([list(r) for r in rows], n, eps_rank)
    return rank, tuple(witness), "floating", min_pivot


def rank_at(
    basis: BracketBasis,
    p: Point,
    eps_rank: float = DEFAULT_EPS_RANK,
    force_arithmetic: str | None = None,
) -> tuple[int, tuple[int, ...]]:
    """Rank of the evaluated coefficient rows at ``p``, with its witness.

    The witness is the greedy earliest independent subset in generation
    order, so among all maximal independent subsets it is the one using
    the shallowest brackets.
    """
    rank, witness, _, _ = _rank_detail(basis, p, eps_rank, force_arithmetic)
    return rank, witness


def _rank_detail(basis, p, eps_rank, force_arithmetic=None):
    n = basis.dim
    if p.dim != n:
        raise DimensionMismatch(f"point of dimension {p.dim} in dimension {n}")
    rows = _eval_rows(basis, p)
    return matrix_rank(rows, n, eps_rank, force_arithmetic)


@dataclass(frozen=True)
class PointRank:
    point: Point = None  # type: ignore[assignment]
    rank: int = 0
    witness: tuple[int, ...] = ()
    witness_labels: tuple[str, ...] = ()
    arithmetic: str = "exact"
    min_singular_pivot: float | None = None
    min_depth_to_span: int | None = None  # None when rank < n


@dataclass(frozen=True)
class RankReport:
    basis: BracketBasis = None  # type: ignore[assignment]
    records: tuple[PointRank, ...] = ()
    undefined: tuple[tuple[Point, str], ...] = ()  # (point, message)
    spanning_everywhere: bool = False

    @property
    def failing_points(self) -> tuple[Point, ...]:
        return tuple(r.point for r in self.records if r.rank < self.basis.dim)

    def describe(self) -> str:
        n = self.basis.dim
        if self.spanning_everywhere:
            return (
                f"spanning on sampled set ({len(self.records)} points, "
                f"rank {n} everywhere, brackets up to depth {self.basis.max_depth})"
            )
        bad = len(self.failing_points) + len(self.undefined)
        note = (
            f" (bracket generation saturated at depth {self.basis.max_depth}; "
            "deeper brackets cannot add new directions)"
            if self.basis.saturated
            else ""
        )
        return (
            f"not spanning up to depth {self.basis.requested_depth} on sampled set: "
            f"{bad} of {len(self.records) + len(self.undefined)} points below rank {n}{note}"
        )


def _worker_count() -> int:
    raw = os.environ.get("HYPOCHECK_THREADS", "").strip()
    try:
        w = int(raw) if raw else 0
    except ValueError:
        w = 0
    if w <= 0:
        w = os.cpu_count() or 1
    return w


def _batch_rows(basis: BracketBasis, pts: Sequence[Point], eps_rank: float):
    """Evaluate every coefficient at every point in one float pass.

    Used when some coefficient is not rational-closed, so exactness is
    unattainable anyway and the batch kernel can carry the whole grid.
    Yields per point either ("ok", rows) or ("undef", message).
    """
    from . import batcheval  # deferred: pulls in the compiled kernel

    import numpy as np

    n = basis.dim
    exprs = [c for entry in basis.generated for c in entry.field.coeffs]
    coords = np.array(
        [[float(c) for c in p.coords] for p in pts], dtype=np.float64
    )
    values = batcheval.evaluate_many(exprs, x_names(n), coords)
    per_point = values.reshape(len(pts), len(basis.generated), n)
    out = []
    for i, p in enumerate(pts):
        mat = per_point[i]
        if not np.all(np.isfinite(mat)):
            bad = int(np.argwhere(~np.isfinite(mat))[0][0])
            label = basis.generated[bad].field.label
            coords_s = ", ".join(str(c) for c in p.coords)
            out.append((
                "undef",
                f"coefficient undefined at point ({coords_s}): field {label}: "
                "non-finite value (domain violation)",
            ))
            continue
        out.append(("ok", [list(map(float, row)) for row in mat]))
    return out


def check_spanning(
    basis: BracketBasis,
    sampling: SamplingPlan,
    eps_rank: float = DEFAULT_EPS_RANK,
    force_arithmetic: str | None = None,
) -> RankReport:
    """rank_at over every sampled point, assembled in point order.

    Points whose coefficients cannot be evaluated are reported in
    ``undefined`` rather than skipped; they also block a spanning verdict.
    When any coefficient leaves the rational-closed fragment the whole
    grid is evaluated by the batch kernel in one float pass; otherwise
    each point is ranked exactly (in parallel when HYPOCHECK_THREADS
    allows), so the report is identical regardless of worker count.
    """
    n = basis.dim
    pts = sampling.points(n)
    if not pts:
        raise ValueError("sampling plan produced no points")

    all_closed = all(
        is_rational_closed(c) for e in basis.generated for c in e.field.coeffs
    )
    exact_points = all(p.is_exact() for p in pts)
    use_batch = force_arithmetic == "floating" or not (all_closed and exact_points)

    outcomes: list[tuple[str, object]] = []
    if use_batch:
        for status, payload in _batch_rows(basis, pts, eps_rank):
            if status == "undef":
                outcomes.append(("undef", payload))
            else:
                rank, witness, arith, min_pivot = matrix_rank(
                    payload, n, eps_rank, "floating"
                )
                outcomes.append(("ok", (rank, witness, arith, min_pivot)))
    else:
        def rank_one(p: Point):
            try:
                return ("ok", _rank_detail(basis, p, eps_rank, force_arithmetic))
            except CoefficientUndefined as exc:
                return ("undef", str(exc))

        workers = min(_worker_count(), len(pts))
        if workers > 1 and len(pts) > 8:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(rank_one, pts))
        else:
            outcomes = [rank_one(p) for p in pts]

    records: list[PointRank] = []
    undefined: list[tuple[Point, str]] = []
    for p, (status, payload) in zip(pts, outcomes):
        if status == "undef":
            undefined.append((p, payload))  # type: ignore[arg-type]
            continue
        rank, witness, arith, min_pivot = payload  # type: ignore[misc]
        depth = (
            max((basis.generated[i].depth for i in witness), default=0)
            if rank == n
            else None
        )
        records.append(
            PointRank(
                point=p,
                rank=rank,
                witness=witness,
                witness_labels=tuple(basis.generated[i].trace for i in witness),
                arithmetic=arith,
                min_singular_pivot=min_pivot,
                min_depth_to_span=depth,
            )
        )
    spanning = bool(records) and not undefined and all(r.rank == n for r in records)
    return RankReport(
        basis=basis,
        records=tuple(records),
        undefined=tuple(undefined),
        spanning_everywhere=spanning,
    )
