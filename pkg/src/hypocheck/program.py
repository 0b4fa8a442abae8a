"""Compilation of expression trees to a flat postfix program.

The program is the exchange format between the symbolic layer and the
batch evaluators: three parallel arrays (opcode, integer argument, float
argument) executed by a stack machine.  Both the compiled kernel and the
pure-Python fallback interpret exactly this encoding, which is what makes
their outputs comparable element-for-element.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import (
    Add, Const, Cos, Div, Exp, Expr, Log, Mul, Neg, Pow, Sin, Sqrt, Var,
)

OP_CONST = 0
OP_VAR = 1
OP_ADD = 2
OP_MUL = 3
OP_POW = 4
OP_SQRT = 5
OP_EXP = 6
OP_LOG = 7
OP_SIN = 8
OP_COS = 9
OP_NEG = 10
OP_DIV = 11

_UNARY_OPS = {Sqrt: OP_SQRT, Exp: OP_EXP, Log: OP_LOG, Sin: OP_SIN, Cos: OP_COS, Neg: OP_NEG}


@dataclass(frozen=True)
class Program:
    """Postfix instruction stream for one scalar expression."""

    ops: np.ndarray      # int32 opcodes
    iargs: np.ndarray    # int32: variable index for VAR, exponent for POW
    dargs: np.ndarray    # float64: value for CONST
    max_stack: int
    nvars: int

    def __len__(self) -> int:
        return len(self.ops)


def compile_expr(e: Expr, var_order: tuple[str, ...]) -> Program:
    """Flatten ``e`` into a postfix program over the given variable order.

    Constants degrade to float64 here; exactness is the business of the
    symbolic evaluator, the kernels exist for throughput.
    """
    index = {name: i for i, name in enumerate(var_order)}
    ops: list[int] = []
    iargs: list[int] = []
    dargs: list[float] = []

    def emit(op: int, i: int = 0, d: float = 0.0):
        ops.append(op)
        iargs.append(i)
        dargs.append(d)

    def walk(node: Expr):
        if isinstance(node, Const):
            emit(OP_CONST, d=float(node.value))
            return
        if isinstance(node, Var):
            try:
                emit(OP_VAR, i=index[node.name])
            except KeyError:
                raise KeyError(f"variable {node.name} not in evaluation order {var_order}") from None
            return
        if isinstance(node, (Add, Mul)):
            op = OP_ADD if isinstance(node, Add) else OP_MUL
            walk(node.args[0])
            for a in node.args[1:]:
                walk(a)
                emit(op)
            return
        if isinstance(node, Pow):
            walk(node.base)
            emit(OP_POW, i=node.exponent)
            return
        if isinstance(node, Div):
            walk(node.num)
            walk(node.den)
            emit(OP_DIV)
            return
        for cls, op in _UNARY_OPS.items():
            if isinstance(node, cls):
                walk(node.arg)
                emit(op)
                return
        raise TypeError(f"cannot compile {node!r}")

    walk(e)

    depth = peak = 0
    for op in ops:
        if op in (OP_CONST, OP_VAR):
            depth += 1
        elif op in (OP_ADD, OP_MUL, OP_DIV):
            depth -= 1
        peak = max(peak, depth)
    assert depth == 1, "postfix stream must leave exactly one value"

    return Program(
        ops=np.asarray(ops, dtype=np.int32),
        iargs=np.asarray(iargs, dtype=np.int32),
        dargs=np.asarray(dargs, dtype=np.float64),
        max_stack=peak,
        nvars=len(var_order),
    )
