"""Pure-Python versions of the compiled tridiagonal kernels."""

import numpy as np


def thomas(sub, diag, sup, rhs, pivot_tol):
    sub = sub.tolist()
    diag = diag.tolist()
    sup = sup.tolist()
    rhs = rhs.tolist()
    n = len(diag)
    c = [0.0] * n
    x = [0.0] * n
    piv = diag[0]
    if abs(piv) <= pivot_tol:
        return np.array(x), 0
    c[0] = sup[0] / piv if n > 1 else 0.0
    x[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - sub[i - 1] * c[i - 1]
        if abs(piv) <= pivot_tol:
            return np.array(x), i
        if i < n - 1:
            c[i] = sup[i] / piv
        x[i] = (rhs[i] - sub[i - 1] * x[i - 1]) / piv
    for i in range(n - 2, -1, -1):
        x[i] -= c[i] * x[i + 1]
    return np.array(x), -1


def negative_pivots(sub, diag, sup):
    sub = sub.tolist()
    diag = diag.tolist()
    sup = sup.tolist()
    d = diag[0]
    count = 1 if d < 0 else 0
    for i in range(1, len(diag)):
        if d == 0.0:
            d = 1e-300
        d = diag[i] - sub[i - 1] * sup[i - 1] / d
        if d < 0:
            count += 1
    return count


def matvec(sub, diag, sup, x):
    y = diag * x
    y[1:] += sub * x[:-1]
    y[:-1] += sup * x[1:]
    return y
