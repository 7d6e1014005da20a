# cython: boundscheck=False, wraparound=False, cdivision=True
"""Single-pass Cython implementations of the per-sample reductions."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def row_top_two_f64(cnp.float64_t[::1] flat, cnp.int64_t[::1] offsets):
    cdef Py_ssize_t rows = offsets.shape[0] - 1
    if rows < 0:
        rows = 0
    top_arr = np.empty(rows, dtype=np.float64)
    second_arr = np.empty(rows, dtype=np.float64)
    tied_arr = np.empty(rows, dtype=np.int64)
    cdef cnp.float64_t[::1] top = top_arr
    cdef cnp.float64_t[::1] second = second_arr
    cdef cnp.int64_t[::1] tied = tied_arr
    cdef Py_ssize_t i, j, lo, hi
    cdef cnp.float64_t best, runner, x
    cdef cnp.int64_t count
    cdef cnp.float64_t neg_inf = -np.inf
    for i in range(rows):
        lo = offsets[i]
        hi = offsets[i + 1]
        best = neg_inf
        runner = neg_inf
        count = 0
        for j in range(lo, hi):
            x = flat[j]
            if x > best:
                runner = best
                best = x
                count = 1
            elif x == best:
                runner = best
                count += 1
            elif x > runner:
                runner = x
        top[i] = best
        second[i] = runner
        tied[i] = count
    return top_arr, second_arr, tied_arr


def row_top_two_i64(cnp.int64_t[::1] flat, cnp.int64_t[::1] offsets):
    cdef Py_ssize_t rows = offsets.shape[0] - 1
    if rows < 0:
        rows = 0
    top_arr = np.empty(rows, dtype=np.int64)
    second_arr = np.empty(rows, dtype=np.int64)
    tied_arr = np.empty(rows, dtype=np.int64)
    cdef cnp.int64_t[::1] top = top_arr
    cdef cnp.int64_t[::1] second = second_arr
    cdef cnp.int64_t[::1] tied = tied_arr
    cdef Py_ssize_t i, j, lo, hi
    cdef cnp.int64_t best, runner, x, count
    for i in range(rows):
        lo = offsets[i]
        hi = offsets[i + 1]
        best = 0
        runner = 0
        count = 0
        for j in range(lo, hi):
            x = flat[j]
            if x > best:
                runner = best
                best = x
                count = 1
            elif x == best and count > 0:
                runner = best
                count += 1
            elif x > runner:
                runner = x
        top[i] = best
        second[i] = runner
        tied[i] = count
    return top_arr, second_arr, tied_arr
