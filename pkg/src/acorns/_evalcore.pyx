# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled tape executor; see acorns.interp for the instruction set."""

from libc.math cimport pow, log, exp, sin, cos, tan, sqrt
from libc.stdlib cimport malloc, free


def eval_tape(int[:, ::1] ops, double[::1] consts, int[::1] out_regs,
              double[:, ::1] points, double[:, ::1] out):
    cdef Py_ssize_t n_ops = ops.shape[0]
    cdef Py_ssize_t n_points = points.shape[0]
    cdef Py_ssize_t n_out = out_regs.shape[0]
    cdef Py_ssize_t p, k, j
    cdef int op, a, b
    cdef double* regs = <double*> malloc(n_ops * sizeof(double))
    if regs == NULL:
        raise MemoryError()
    try:
        for p in range(n_points):
            for k in range(n_ops):
                op = ops[k, 0]
                a = ops[k, 1]
                b = ops[k, 2]
                if op == 0:
                    regs[k] = points[p, a]
                elif op == 1:
                    regs[k] = consts[a]
                elif op == 2:
                    regs[k] = regs[a] + regs[b]
                elif op == 3:
                    regs[k] = regs[a] - regs[b]
                elif op == 4:
                    regs[k] = regs[a] * regs[b]
                elif op == 5:
                    regs[k] = regs[a] / regs[b]
                elif op == 6:
                    regs[k] = -regs[a]
                elif op == 7:
                    regs[k] = pow(regs[a], regs[b])
                elif op == 8:
                    regs[k] = log(regs[a])
                elif op == 9:
                    regs[k] = exp(regs[a])
                elif op == 10:
                    regs[k] = sin(regs[a])
                elif op == 11:
                    regs[k] = cos(regs[a])
                elif op == 12:
                    regs[k] = tan(regs[a])
                elif op == 13:
                    regs[k] = sqrt(regs[a])
                elif op == 14:
                    regs[k] = 1.0 if regs[a] < regs[b] else 0.0
                elif op == 15:
                    regs[k] = 1.0 if regs[a] <= regs[b] else 0.0
                elif op == 16:
                    regs[k] = 1.0 if regs[a] > regs[b] else 0.0
                elif op == 17:
                    regs[k] = 1.0 if regs[a] >= regs[b] else 0.0
                elif op == 18:
                    regs[k] = 1.0 if regs[a] == regs[b] else 0.0
                else:
                    regs[k] = 1.0 if regs[a] != regs[b] else 0.0
            for j in range(n_out):
                out[p, j] = regs[out_regs[j]]
    finally:
        free(regs)
    return out
