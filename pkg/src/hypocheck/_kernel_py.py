"""Pure-Python batch evaluator: the fallback when the compiled kernel is
unavailable.  Interprets the same postfix encoding with numpy vectorized
over the point axis, and the same NaN convention for out-of-domain points.
"""

from __future__ import annotations

import numpy as np

from .program import (
    OP_ADD, OP_CONST, OP_COS, OP_DIV, OP_EXP, OP_LOG, OP_MUL, OP_NEG,
    OP_POW, OP_SIN, OP_SQRT, OP_VAR,
)

BACKEND = "fallback"


def evaluate_batch(ops, iargs, dargs, max_stack, points):
    """Run one program at each row of ``points`` (shape m x nvars)."""
    m = points.shape[0]
    stack = np.empty((max_stack, m), dtype=np.float64)
    sp = 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for k in range(len(ops)):
            op = ops[k]
            if op == OP_CONST:
                stack[sp] = dargs[k]
                sp += 1
            elif op == OP_VAR:
                stack[sp] = points[:, iargs[k]]
                sp += 1
            elif op == OP_ADD:
                sp -= 1
                stack[sp - 1] += stack[sp]
            elif op == OP_MUL:
                sp -= 1
                stack[sp - 1] *= stack[sp]
            elif op == OP_POW:
                e = int(iargs[k])
                base = stack[sp - 1]
                if e < 0:
                    out = np.where(base == 0.0, np.nan, base)
                    stack[sp - 1] = out ** e
                else:
                    stack[sp - 1] = base ** e
            elif op == OP_SQRT:
                a = stack[sp - 1]
                stack[sp - 1] = np.where(a < 0.0, np.nan, np.sqrt(np.abs(a)))
            elif op == OP_EXP:
                stack[sp - 1] = np.exp(stack[sp - 1])
            elif op == OP_LOG:
                a = stack[sp - 1]
                stack[sp - 1] = np.where(a <= 0.0, np.nan, np.log(np.where(a <= 0.0, 1.0, a)))
            elif op == OP_SIN:
                stack[sp - 1] = np.sin(stack[sp - 1])
            elif op == OP_COS:
                stack[sp - 1] = np.cos(stack[sp - 1])
            elif op == OP_NEG:
                stack[sp - 1] = -stack[sp - 1]
            elif op == OP_DIV:
                sp -= 1
                den = stack[sp]
                stack[sp - 1] = np.where(den == 0.0, np.nan, stack[sp - 1] / np.where(den == 0.0, 1.0, den))
    return stack[0].copy()
