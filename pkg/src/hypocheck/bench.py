"""Benchmark the two batch-evaluation backends on the rank-check hot loop.

The workload mirrors what spanning checks do: evaluate a panel of
coefficient expressions over a large grid of sample points.  Both the
compiled kernel and the numpy fallback interpret the same program
encoding, so the comparison isolates interpreter overhead.

Run as ``python3 -m hypocheck.bench [--points N] [--repeats K]``.
"""

from __future__ import annotations

import argparse
import time
from typing import Sequence

import numpy as np

from .expr import parse
from .program import compile_expr

# Coefficient shapes that show up in derived operators: constants and
# monomials (cheap), radicals of positive polynomials, exponentials from
# parameter-dependent weights, and a trig/log mix for the general case.
WORKLOAD = (
    "1/2",
    "x1",
    "x1^2 - 2*x1*x2 + x2^2",
    "sqrt(1 + x1^2)",
    "sqrt(1 + x1^2 + x2^2) * x2",
    "exp(x1*x2/4)",
    "2*exp(x1/2) + x2^3",
    "sin(x1)*cos(x2) + 1/2",
    "log(2 + x1^2)",
    "(x1 + x2)^3 / (1 + x2^2)",
)
VAR_ORDER = ("x1", "x2")


def _load_backends():
    backends = []
    from . import _kernel_py

    backends.append(("fallback", _kernel_py))
    try:
        from . import _kernel

        backends.append(("compiled", _kernel))
    except ImportError:
        pass
    return backends


def _time_backend(impl, programs, points: np.ndarray, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for prog in programs:
            impl.evaluate_batch(prog.ops, prog.iargs, prog.dargs, prog.max_stack, points)
        best = min(best, time.perf_counter() - start)
    return best


def run(n_points: int, repeats: int) -> dict[str, float]:
    """Best wall time per backend for one pass over the whole workload."""
    rng = np.random.default_rng(20250815)
    points = np.ascontiguousarray(rng.uniform(-1.0, 1.0, size=(n_points, 2)))
    programs = [compile_expr(parse(src), VAR_ORDER) for src in WORKLOAD]
    backends = _load_backends()

    # Agreement check before timing: NaN patterns and values must match.
    for prog in programs:
        results = [
            impl.evaluate_batch(prog.ops, prog.iargs, prog.dargs, prog.max_stack, points)
            for _, impl in backends
        ]
        for other in results[1:]:
            if not np.array_equal(np.isnan(results[0]), np.isnan(other)):
                raise AssertionError("backends disagree on undefined points")
            mask = ~np.isnan(results[0])
            if not np.allclose(results[0][mask], other[mask], rtol=1e-12, atol=1e-12):
                raise AssertionError("backends disagree on values")

    # Warm-up happened above; now time.
    return {
        name: _time_backend(impl, programs, points, repeats)
        for name, impl in backends
    }


def _print_block(n_points: int, repeats: int, timings: dict[str, float]) -> None:
    work = n_points * len(WORKLOAD)
    print(f"{len(WORKLOAD)} expressions x {n_points} points "
          f"({work} evaluations per pass, best of {repeats})")
    for name, seconds in timings.items():
        rate = work / seconds / 1e6
        print(f"  {name:<10} {seconds * 1e3:10.3f} ms   {rate:6.1f} M evals/s")
    if "compiled" in timings and "fallback" in timings:
        print(f"  speedup    {timings['fallback'] / timings['compiled']:.1f}x "
              f"(compiled over fallback)")
    else:
        print("  compiled kernel unavailable; fallback only")


def main(argv: Sequence[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="python3 -m hypocheck.bench",
        description="Time the compiled and fallback batch-evaluation backends.",
    )
    ap.add_argument("--points", type=int, default=None,
                    help="sample points per run (default: a small and a large batch)")
    ap.add_argument("--repeats", type=int, default=None,
                    help="repeats; best time wins")
    args = ap.parse_args(argv)
    if args.points is not None and args.points < 1:
        ap.error("--points must be positive")
    if args.repeats is not None and args.repeats < 1:
        ap.error("--repeats must be positive")

    if args.points is not None:
        sizes = ((args.points, args.repeats or 5),)
    else:
        # Small batches are the spanning-check shape (one sampling grid);
        # large batches show the throughput ceiling.
        sizes = ((25, args.repeats or 400), (200_000, args.repeats or 5))
    for n_points, repeats in sizes:
        _print_block(n_points, repeats, run(n_points, repeats))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
