"""Independent dense reference computations for small systems (size <= 64).

These avoid the code paths they check: Gaussian elimination is written out
by hand, and eigenvalues come from bisection on determinant signs of leading
principal minors of K - eta*M (Sylvester's law of inertia).
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, SingularSystemError

MAX_ORACLE_SIZE = 64


def _check_size(n):
    if n > MAX_ORACLE_SIZE:
        raise DimensionError(f"dense oracle limited to size <= {MAX_ORACLE_SIZE}")


def gauss_solve(matrix, rhs):
    """Gaussian elimination with partial pivoting, written out explicitly."""
    a = np.array(matrix, dtype=float)
    b = np.array(rhs, dtype=float)
    n = a.shape[0]
    _check_size(n)
    for k in range(n):
        piv = k + int(np.argmax(np.abs(a[k:, k])))
        if a[piv, k] == 0.0:
            raise SingularSystemError("oracle: singular matrix")
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            b[[k, piv]] = b[[piv, k]]
        for i in range(k + 1, n):
            f = a[i, k] / a[k, k]
            a[i, k:] -= f * a[k, k:]
            b[i] -= f * b[k]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - np.dot(a[i, i + 1:], x[i + 1:])) / a[i, i]
    return x


def count_below(K, M, eta):
    """Number of generalized eigenvalues below ``eta`` from leading-minor sign changes."""
    a = np.array(K, dtype=float) - eta * np.diag(np.asarray(M, dtype=float))
    prev = 1.0
    changes = 0
    for k in range(1, a.shape[0] + 1):
        d = np.linalg.det(a[:k, :k])
        if d == 0.0:
            d = -1e-300 * np.sign(prev)
        if np.sign(d) != np.sign(prev):
            changes += 1
        prev = d
    return changes


def smallest_eig_bisection(K, M, rtol=1e-14):
    """Smallest eigenvalue of K x = eta M x by bisection on the inertia count."""
    k = np.array(K, dtype=float)
    m = np.asarray(M, dtype=float)
    n = k.shape[0]
    _check_size(n)
    radius = np.sum(np.abs(k), axis=1) - np.abs(np.diag(k))
    lo = float(np.min((np.diag(k) - radius) / m)) - 1.0
    hi = float(np.max((np.diag(k) + radius) / m)) + 1.0
    while hi - lo > rtol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if count_below(k, m, mid) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
