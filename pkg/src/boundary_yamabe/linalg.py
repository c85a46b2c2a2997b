"""Tridiagonal (with optional corners) and dense solves, smallest generalized eigenpair."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernels
from .errors import ConvergenceError, DimensionError, SingularSystemError

PIVOT_RTOL = 1e-14
RESIDUAL_RTOL = 1e-10
POLISH_STEPS = 4
BRACKET_STEPS = 200
BRACKET_RTOL = 1e-6


@dataclass(frozen=True)
class BandedSystem:
    """Tridiagonal matrix; ``corner_lo`` sits at (0, 2) and ``corner_hi`` at (n-1, n-3)."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    corner_lo: float = 0.0
    corner_hi: float = 0.0

    def __post_init__(self):
        n = len(self.diag)
        if len(self.sub) != n - 1 or len(self.sup) != n - 1:
            raise DimensionError("band lengths inconsistent with size")
        if n < 3 and (self.corner_lo or self.corner_hi):
            raise DimensionError("corner entries need size >= 3")

    @property
    def size(self) -> int:
        return len(self.diag)

    def matvec(self, x):
        x = np.ascontiguousarray(x, dtype=float)
        y = kernels.matvec(self.sub, self.diag, self.sup, x)
        if self.corner_lo:
            y[0] += self.corner_lo * x[2]
        if self.corner_hi:
            y[-1] += self.corner_hi * x[-3]
        return y

    def to_dense(self):
        n = self.size
        m = np.diag(self.diag)
        m[np.arange(1, n), np.arange(n - 1)] = self.sub
        m[np.arange(n - 1), np.arange(1, n)] = self.sup
        if self.corner_lo:
            m[0, 2] += self.corner_lo
        if self.corner_hi:
            m[-1, -3] += self.corner_hi
        return m

    def norm_inf(self) -> float:
        row = np.abs(self.diag).copy()
        row[1:] += np.abs(self.sub)
        row[:-1] += np.abs(self.sup)
        row[0] += abs(self.corner_lo)
        row[-1] += abs(self.corner_hi)
        return float(row.max())

    def shifted(self, diag_add):
        """Copy with ``diag_add`` added to the diagonal."""
        return BandedSystem(self.sub, self.diag + diag_add, self.sup, self.corner_lo, self.corner_hi)

    def is_symmetric(self, rtol=1e-12) -> bool:
        scale = max(self.norm_inf(), 1e-300)
        return (not self.corner_lo and not self.corner_hi
                and float(np.max(np.abs(self.sub - self.sup), initial=0.0)) <= rtol * scale)


def banded(sub, diag, sup, corner_lo=0.0, corner_hi=0.0) -> BandedSystem:
    f = lambda a: np.ascontiguousarray(a, dtype=float)
    return BandedSystem(f(sub), f(diag), f(sup), float(corner_lo), float(corner_hi))


def _residual_ok(apply, x, rhs, norm_a):
    res = np.max(np.abs(apply(x) - rhs))
    bound = RESIDUAL_RTOL * (norm_a * np.max(np.abs(x)) + np.max(np.abs(rhs)))
    return res <= bound, res


def solve_banded(system: BandedSystem, rhs) -> np.ndarray:
    """Solve ``system @ x = rhs`` by the Thomas sweep (corners eliminated first)."""
    rhs = np.ascontiguousarray(rhs, dtype=float)
    n = system.size
    if rhs.shape != (n,):
        raise DimensionError(f"rhs has shape {rhs.shape}, system size {n}")
    norm_a = system.norm_inf()
    tol = PIVOT_RTOL * norm_a
    sub, diag, sup = system.sub.copy(), system.diag.copy(), system.sup.copy()
    b = rhs.copy()
    if system.corner_lo:
        # row0 -= f * row1 removes the (0, 2) entry
        if abs(sup[1]) <= tol:
            raise SingularSystemError("corner elimination hit a zero coupling", row=1)
        f = system.corner_lo / sup[1]
        diag[0] -= f * sub[0]
        sup[0] -= f * diag[1]
        b[0] -= f * b[1]
    if system.corner_hi:
        if abs(sub[-2]) <= tol:
            raise SingularSystemError("corner elimination hit a zero coupling", row=n - 2)
        f = system.corner_hi / sub[-2]
        diag[-1] -= f * sup[-1]
        sub[-1] -= f * diag[-2]
        b[-1] -= f * b[-2]
    x, bad = kernels.thomas(sub, diag, sup, b, tol)
    if bad >= 0:
        raise SingularSystemError(f"pivot below {PIVOT_RTOL:g}*||A|| at row {bad}", row=int(bad))
    ok, res = _residual_ok(system.matvec, x, rhs, norm_a)
    if not ok:
        raise SingularSystemError(f"tridiagonal solve residual {res:.3e} exceeds bound")
    return x


def solve_dense(matrix, rhs) -> np.ndarray:
    """Partial-pivot LU solve of a dense square system."""
    a = np.array(matrix, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError("dense matrix must be square")
    if rhs.shape != (a.shape[0],):
        raise DimensionError("rhs length mismatch")
    norm_a = float(np.max(np.sum(np.abs(a), axis=1)))
    with np.errstate(all="ignore"):
        lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    if np.min(np.abs(np.diag(lu))) <= PIVOT_RTOL * norm_a:
        raise SingularSystemError("dense matrix is singular to working precision")
    x = scipy.linalg.lu_solve((lu, piv), rhs)
    ok, res = _residual_ok(lambda y: a @ y, x, rhs, norm_a)
    if not ok:
        raise SingularSystemError(f"dense solve residual {res:.3e} exceeds bound")
    return x


def _as_operator(K):
    """Return (matvec, solve_shifted, inertia, dense-or-None, diag, offdiag-abs-rowsum, norm)."""
    if isinstance(K, BandedSystem):
        if not K.is_symmetric():
            raise DimensionError("eigen solve needs a symmetric tridiagonal matrix")
        rowsum = np.zeros(K.size)
        rowsum[1:] += np.abs(K.sub)
        rowsum[:-1] += np.abs(K.sup)

        def solve(sigma, m, rhs):
            return solve_banded(K.shifted(-sigma * m), rhs)

        def inertia(sigma, m):
            return kernels.negative_pivots(K.sub, K.diag - sigma * m, K.sup)

        return K.matvec, solve, inertia, K.diag, rowsum, K.norm_inf()
    a = np.array(K, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError("dense matrix must be square")
    scale = max(np.max(np.abs(a)), 1e-300)
    if np.max(np.abs(a - a.T)) > 1e-12 * scale:
        raise DimensionError("eigen solve needs a symmetric matrix")
    a = 0.5 * (a + a.T)
    rowsum = np.sum(np.abs(a), axis=1) - np.abs(np.diag(a))

    def solve(sigma, m, rhs):
        return solve_dense(a - sigma * np.diag(m), rhs)

    def inertia(sigma, m):
        _, d, _ = scipy.linalg.ldl(a - sigma * np.diag(m))
        return int(np.sum(np.linalg.eigvalsh(d) < 0))

    return (lambda x: a @ x), solve, inertia, np.diag(a).copy(), rowsum, float(np.max(np.sum(np.abs(a), axis=1)))


def gershgorin_lower(diag, offsum, m) -> float:
    """Lower bound for the spectrum of M^-1 K (row-scaled Gershgorin discs)."""
    return float(np.min((diag - offsum) / m))


def smallest_eig_generalized(K, M, tol=1e-10, max_iter=500, x0=None):
    """Algebraically smallest eigenpair of K x = eta M x (K symmetric, M positive diagonal).

    Shift-and-invert power iteration.  The shift starts below the Gershgorin
    bound and moves up towards the Rayleigh quotient once a residual bound
    brackets the eigenvalue; an inertia count keeps it below the bottom of the
    spectrum.  Returns ``(eta, phi)`` with phi M-normalised and its largest
    entry positive.
    """
    m = np.ascontiguousarray(M, dtype=float)
    if np.any(m <= 0):
        raise DimensionError("mass diagonal must be strictly positive")
    apply, solve, inertia, diag, offsum, norm_k = _as_operator(K)
    n = len(m)
    if len(diag) != n:
        raise DimensionError("mass and matrix sizes differ")
    g = gershgorin_lower(diag, offsum, m)
    spread = max(abs(g), float(np.max(np.abs(diag) / m)), 1.0)
    sigma = g - 1e-3 * spread
    if x0 is None:
        x = np.ones(n) + 1e-3 * np.cos(np.arange(n) * 1.7)
    else:
        x = np.asarray(x0, dtype=float).copy()
    x /= np.sqrt(np.dot(m, x * x))
    rho = float(np.dot(x, apply(x)))
    # bracket eta_1 by inertia bisection: [sigma, rho] with no eigenvalue below sigma
    lo, hi = sigma, rho + 1e-12 * spread
    for _ in range(BRACKET_STEPS):
        if hi - lo <= BRACKET_RTOL * max(1.0, abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if inertia(mid, m) == 0:
            lo = mid
        else:
            hi = mid
    sigma = lo - BRACKET_RTOL * max(1.0, abs(lo))
    target = 1e-9 * norm_k
    for it in range(1, max_iter + 1):
        y = solve(sigma, m, m * x)
        x = y / np.sqrt(np.dot(m, y * y))
        kx = apply(x)
        rho_new = float(np.dot(x, kx))
        r = kx - rho_new * m * x
        res_m = float(np.sqrt(np.dot(r, r / m)))
        # x^T K x carries ~eps*||K||*|x|^2 of cancellation error
        jitter = 64.0 * np.finfo(float).eps * norm_k * float(np.dot(x, x))
        done = (abs(rho_new - rho) <= max(tol * max(1.0, abs(rho_new)), jitter)
                and np.max(np.abs(r)) <= target)
        rho = rho_new
        if done:
            break
        trial = rho - 2.0 * res_m - 1e-9 * spread
        if trial > sigma and inertia(trial, m) == 0:
            sigma = trial
    else:
        raise ConvergenceError("inverse iteration did not converge", last_rayleigh=rho, iterations=max_iter)
    # polish the vector: a few more steps while the residual keeps halving
    best = float(np.max(np.abs(r)))
    for _ in range(POLISH_STEPS):
        y = solve(sigma, m, m * x)
        y /= np.sqrt(np.dot(m, y * y))
        ky = apply(y)
        rho_y = float(np.dot(y, ky))
        res_y = float(np.max(np.abs(ky - rho_y * m * y)))
        if res_y > 0.5 * best:
            break
        x, rho, best = y, rho_y, res_y
    k = int(np.argmax(np.abs(x)))
    if x[k] < 0:
        x = -x
    return rho, x
