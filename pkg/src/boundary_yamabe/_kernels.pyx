# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tridiagonal kernels."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def thomas(double[::1] sub, double[::1] diag, double[::1] sup, double[::1] rhs, double pivot_tol):
    """Solve a tridiagonal system; returns (x, bad_row) with bad_row = -1 on success."""
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    cdef double piv, m
    x_arr = np.empty(n, dtype=np.float64)
    c_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[::1] c = c_arr
    piv = diag[0]
    if fabs(piv) <= pivot_tol:
        return x_arr, 0
    c[0] = sup[0] / piv if n > 1 else 0.0
    x[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - sub[i - 1] * c[i - 1]
        if fabs(piv) <= pivot_tol:
            return x_arr, i
        if i < n - 1:
            c[i] = sup[i] / piv
        x[i] = (rhs[i] - sub[i - 1] * x[i - 1]) / piv
    for i in range(n - 2, -1, -1):
        x[i] -= c[i] * x[i + 1]
    return x_arr, -1


def negative_pivots(double[::1] sub, double[::1] diag, double[::1] sup):
    """Number of negative pivots of the LDL^T sweep (inertia of a symmetric tridiagonal)."""
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    cdef Py_ssize_t count = 0
    cdef double d = diag[0]
    if d < 0:
        count += 1
    for i in range(1, n):
        if d == 0.0:
            d = 1e-300
        d = diag[i] - sub[i - 1] * sup[i - 1] / d
        if d < 0:
            count += 1
    return count


def matvec(double[::1] sub, double[::1] diag, double[::1] sup, double[::1] x):
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    y_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] y = y_arr
    for i in range(n):
        y[i] = diag[i] * x[i]
        if i > 0:
            y[i] += sub[i - 1] * x[i - 1]
        if i < n - 1:
            y[i] += sup[i] * x[i + 1]
    return y_arr
