# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled stack-machine evaluator for postfix expression programs.

Evaluates one program over a batch of points; out-of-domain operations
(negative sqrt, log of a nonpositive, division by zero, 0^negative) yield
NaN for that point rather than raising, so callers can mark individual
sample points as undefined.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos as c_cos
from libc.math cimport exp as c_exp
from libc.math cimport log as c_log
from libc.math cimport sin as c_sin
from libc.math cimport sqrt as c_sqrt
from libc.math cimport NAN, pow as c_pow

cnp.import_array()

DEF OP_CONST = 0
DEF OP_VAR = 1
DEF OP_ADD = 2
DEF OP_MUL = 3
DEF OP_POW = 4
DEF OP_SQRT = 5
DEF OP_EXP = 6
DEF OP_LOG = 7
DEF OP_SIN = 8
DEF OP_COS = 9
DEF OP_NEG = 10
DEF OP_DIV = 11

BACKEND = "compiled"


cdef inline double ipow(double base, int k) nogil:
    cdef double acc = 1.0
    cdef double b = base
    cdef int n = k
    if n < 0:
        if base == 0.0:
            return NAN
        b = 1.0 / base
        n = -n
    while n:
        if n & 1:
            acc *= b
        b *= b
        n >>= 1
    return acc


def evaluate_batch(
    cnp.ndarray[cnp.int32_t, ndim=1] ops,
    cnp.ndarray[cnp.int32_t, ndim=1] iargs,
    cnp.ndarray[cnp.float64_t, ndim=1] dargs,
    int max_stack,
    cnp.ndarray[cnp.float64_t, ndim=2] points,
):
    """Run the program at each row of ``points`` (shape m x nvars)."""
    cdef Py_ssize_t m = points.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] stack = np.empty(max_stack, dtype=np.float64)
    cdef Py_ssize_t n_ops = ops.shape[0]
    cdef Py_ssize_t p, i
    cdef int sp, op
    cdef double a, b

    with nogil:
        for p in range(m):
            sp = 0
            for i in range(n_ops):
                op = ops[i]
                if op == OP_CONST:
                    stack[sp] = dargs[i]
                    sp += 1
                elif op == OP_VAR:
                    stack[sp] = points[p, iargs[i]]
                    sp += 1
                elif op == OP_ADD:
                    sp -= 1
                    stack[sp - 1] = stack[sp - 1] + stack[sp]
                elif op == OP_MUL:
                    sp -= 1
                    stack[sp - 1] = stack[sp - 1] * stack[sp]
                elif op == OP_POW:
                    stack[sp - 1] = ipow(stack[sp - 1], iargs[i])
                elif op == OP_SQRT:
                    a = stack[sp - 1]
                    stack[sp - 1] = NAN if a < 0.0 else c_sqrt(a)
                elif op == OP_EXP:
                    stack[sp - 1] = c_exp(stack[sp - 1])
                elif op == OP_LOG:
                    a = stack[sp - 1]
                    stack[sp - 1] = NAN if a <= 0.0 else c_log(a)
                elif op == OP_SIN:
                    stack[sp - 1] = c_sin(stack[sp - 1])
                elif op == OP_COS:
                    stack[sp - 1] = c_cos(stack[sp - 1])
                elif op == OP_NEG:
                    stack[sp - 1] = -stack[sp - 1]
                elif op == OP_DIV:
                    sp -= 1
                    b = stack[sp]
                    a = stack[sp - 1]
                    stack[sp - 1] = NAN if b == 0.0 else a / b
            out[p] = stack[0]
    return out
