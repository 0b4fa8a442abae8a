"""Backend selection and the batch-evaluation entry point.

The compiled kernel is preferred when importable; otherwise the numpy
fallback interprets the identical program encoding.  Set
``HYPOCHECK_BACKEND=compiled`` or ``HYPOCHECK_BACKEND=fallback`` to force
one (forcing the compiled kernel when it is absent is an import error,
which beats silently benchmarking the wrong thing).
"""

from __future__ import annotations

import os

import numpy as np

from .expr import Expr
from .program import Program, compile_expr

_requested = os.environ.get("HYPOCHECK_BACKEND", "").strip().lower()

if _requested == "fallback":
    from . import _kernel_py as _impl
elif _requested == "compiled":
    from . import _kernel as _impl
elif _requested:
    raise ImportError(
        f"HYPOCHECK_BACKEND={_requested!r} not recognized (use 'compiled' or 'fallback')"
    )
else:
    try:
        from . import _kernel as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _kernel_py as _impl  # type: ignore[no-redef]

BACKEND: str = _impl.BACKEND

_cache: dict[tuple[Expr, tuple[str, ...]], Program] = {}


def program_for(e: Expr, var_order: tuple[str, ...]) -> Program:
    key = (e, var_order)
    prog = _cache.get(key)
    if prog is None:
        prog = _cache[key] = compile_expr(e, var_order)
    return prog


def evaluate_batch(e: Expr, var_order: tuple[str, ...], points: np.ndarray) -> np.ndarray:
    """Float values of ``e`` at each row of ``points``; NaN where undefined."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != len(var_order):
        raise ValueError(f"points must be (m, {len(var_order)}), got {pts.shape}")
    prog = program_for(e, var_order)
    return _impl.evaluate_batch(prog.ops, prog.iargs, prog.dargs, prog.max_stack, pts)


def evaluate_many(exprs, var_order: tuple[str, ...], points: np.ndarray) -> np.ndarray:
    """Stack evaluate_batch over several expressions: result (m, len(exprs))."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    cols = [evaluate_batch(e, var_order, pts) for e in exprs]
    if not cols:
        return np.empty((pts.shape[0], 0), dtype=np.float64)
    return np.stack(cols, axis=1)
