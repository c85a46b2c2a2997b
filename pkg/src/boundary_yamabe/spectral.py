"""First Robin eigenvalues, the admissible boundary shift, and Yamabe-type quotients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, PreconditionError
from .geometry import RadialGeometry, resample, sphere_area
from .linalg import banded, smallest_eig_generalized, solve_banded
from .operators import assemble, box_system

ZERO_FACTOR = 10.0
ZERO_FLOOR = 1e-9
STALL_RTOL = 1e-9


def sharp_bound(n: int) -> float:
    """Hemisphere constant 2^(-2/n) * n(n-2)/4 * Vol(S^n)^(2/n)."""
    return 2.0 ** (-2.0 / n) * n * (n - 2) / 4.0 * sphere_area(n) ** (2.0 / n)


def first_robin_eigen(geom: RadialGeometry, shift_c0, beta: float = 0.0):
    """Smallest eigenpair of -a*Lap_g + shift_c0 with du/dnu + (k*h_g - beta) u = 0.

    Returns ``(eta, phi)``, phi positive and normalised in the lumped mass.
    """
    if beta < 0:
        raise PreconditionError("beta must be nonnegative")
    rc = geom.robin_c
    sys = assemble(geom, shift_c0, (rc[0] - beta, rc[1] - beta))
    eta, phi = smallest_eig_generalized(sys.form_K, sys.mass_M)
    if np.min(phi) <= 0:
        raise ConvergenceError("first eigenvector is not strictly positive", min_entry=float(np.min(phi)))
    return float(eta), phi


def robin_eta(geom: RadialGeometry, tau: float = 0.0, beta: float = 0.0) -> float:
    return first_robin_eigen(geom, geom.R + tau, beta)[0]


@dataclass(frozen=True)
class SignClass:
    label: str  # "positive" | "negative" | "zero"
    eta1: float
    eta1_coarse: float
    error_estimate: float
    threshold: float


def classify_eta(eta_fine: float, eta_coarse: float, scale: float = 1.0) -> SignClass:
    """Sign trichotomy with a Richardson estimate of the O(h^2) error of ``eta_fine``."""
    err = abs(eta_fine - eta_coarse) / 3.0
    threshold = ZERO_FACTOR * err + ZERO_FLOOR * max(1.0, scale)
    if abs(eta_fine) <= threshold:
        label = "zero"
    elif eta_fine > 0:
        label = "positive"
    else:
        label = "negative"
    return SignClass(label, float(eta_fine), float(eta_coarse), float(err), float(threshold))


def classify_geometry(geom: RadialGeometry, coarse: RadialGeometry | None = None) -> SignClass:
    """Classify sign(eta1); the coarse grid defaults to every other node."""
    if coarse is None:
        m = geom.num_nodes - 1
        coarse = resample(geom, m // 2 + 1)
    scale = float(np.max(np.abs(geom.R)))
    return classify_eta(robin_eta(geom), robin_eta(coarse), scale)


def find_c_eta1(geom: RadialGeometry, rtol: float = 1e-6) -> float:
    """Largest beta in [0, beta_max] with eta_{1,beta} > 0 (bisection)."""
    if geom.h_inner <= 0 or geom.h_outer <= 0:
        raise PreconditionError("boundary mean curvature must be positive on both components")
    eta0 = robin_eta(geom)
    if eta0 <= 0:
        raise PreconditionError(f"first eigenvalue must be positive, got {eta0:.6g}")
    beta_max = 2.0 * geom.dim.robin_coeff * max(geom.h_inner, geom.h_outer)
    if robin_eta(geom, beta=beta_max) > 0:
        return beta_max
    lo, hi = 0.0, beta_max
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if robin_eta(geom, beta=mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------- quotients


def _pnorm_mass(m, u, p):
    return float(np.dot(m, np.abs(u) ** p) ** (1.0 / p))


def yamabe_quotient(geom: RadialGeometry, tau: float, u) -> float:
    """[u^T K_tau u] / ||u||_p^2 with the lumped mass in both numerator and denominator."""
    u = np.asarray(u, dtype=float)
    if not np.any(u != 0):
        raise PreconditionError("quotient undefined for the zero field")
    sys = box_system(geom, tau)
    return float(np.dot(u, sys.apply_form(u)) / _pnorm_mass(sys.mass_M, u, geom.dim.p) ** 2)


@dataclass
class QuotientRun:
    value: float
    minimizer: np.ndarray
    iterations: int
    history: list = field(default_factory=list)


def minimize_quotient(K, m, p, x0, grad_tol=None, decrease_tol=1e-10, patience=5, max_iter=5000):
    """Projected, preconditioned gradient descent for u^T K u / ||u||_p^2 over u >= 0.

    K is a symmetric tridiagonal ``BandedSystem``, m the positive lumped mass.
    The search direction is the gradient mapped through (K + s M)^-1, which
    keeps the iteration count independent of the grid; steps are projected on
    the nonnegative cone, renormalised to ||u||_p = 1 and accepted by Armijo
    backtracking.  Stops after ``patience`` successive decreases below
    ``decrease_tol`` (and, if ``grad_tol`` is given, once the stationarity
    residual max|K u - Q m u^(p-1)| / m is below it).
    """
    eta, _ = smallest_eig_generalized(K, m)
    shift = max(0.0, -eta) + max(1.0, abs(eta))
    P = K.shifted(shift * m)
    u = np.maximum(np.asarray(x0, dtype=float), 0.0)
    if not np.any(u > 0):
        raise PreconditionError("initial field must have a positive entry")
    u = u / _pnorm_mass(m, u, p)
    Ku = K.matvec(u)
    Q = float(np.dot(u, Ku))
    quiet = 0
    history = [Q]
    for it in range(1, max_iter + 1):
        up = u ** (p - 1)
        g = Ku - Q * m * up
        d = -solve_banded(P, g)
        slope = 2.0 * float(np.dot(g, d))
        t = 1.0
        accepted = False
        for _ in range(40):
            trial = np.maximum(u + t * d, 0.0)
            if np.any(trial > 0):
                trial /= _pnorm_mass(m, trial, p)
                Kt = K.matvec(trial)
                Qt = float(np.dot(trial, Kt))
                if Qt <= Q + 1e-4 * 2.0 * float(np.dot(g, trial - u)) or Qt <= Q + 1e-4 * t * slope:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            # no descent possible at this precision: stationary to round-off
            break
        dec = Q - Qt
        u, Ku, Q = trial, Kt, Qt
        history.append(Q)
        quiet = quiet + 1 if dec < decrease_tol else 0
        if quiet >= patience:
            if grad_tol is None:
                break
            res = np.max(np.abs(Ku - Q * m * u ** (p - 1)) / m)
            if res <= grad_tol:
                break
    else:
        raise ConvergenceError("quotient minimisation hit the iteration cap", last_value=Q, iterations=max_iter)
    return QuotientRun(Q, u, it, history)


def polish_critical_point(K, m, p, u, tol=1e-13, max_iter=50):
    """Newton refinement of a nonnegative critical point of the quotient.

    Solves K w = m w^(p-1) starting from the rescaled ``u``; returns
    ``(Q, v)`` with v = w/||w||_p and Q = ||w||_p^(p-2), so K v = Q m v^(p-1).
    """
    u = np.asarray(u, dtype=float)
    Q = float(np.dot(u, K.matvec(u))) / _pnorm_mass(m, u, p) ** 2
    if Q <= 0:
        raise PreconditionError("Newton polish needs a positive quotient")
    w = u / _pnorm_mass(m, u, p) * Q ** (1.0 / (p - 2))
    prev = np.inf
    for _ in range(max_iter):
        F = K.matvec(w) - m * w ** (p - 1)
        J = K.shifted(-(p - 1) * m * w ** (p - 2))
        step = solve_banded(J, F)
        w = w - step
        if np.any(w <= 0):
            raise ConvergenceError("Newton polish left the positive cone")
        rel = float(np.max(np.abs(step))) / float(np.max(w))
        # below tol, or stalled at the round-off level of an ill-conditioned Jacobian
        if rel <= tol or (rel <= STALL_RTOL and rel > 0.25 * prev):
            break
        prev = rel
    else:
        raise ConvergenceError("Newton polish did not converge", iterations=max_iter)
    norm = _pnorm_mass(m, w, p)
    return norm ** (p - 2), w / norm


def minimize_yamabe_quotient(geom: RadialGeometry, tau: float = 0.0, seed: int = 0, restarts: int = 3,
                             x0=None, info: dict | None = None):
    """lambda_tau and a minimiser (normalised ||u||_p = 1 in the lumped mass).

    Starts from the first Robin eigenfunction (or ``x0``) and from ``restarts``
    random positive fields; the smallest value wins.  ``info`` receives the
    spread of the restart values and iteration counts.
    """
    if tau > 0:
        raise PreconditionError("tau must be <= 0")
    sys = box_system(geom, tau)
    p = geom.dim.p
    starts = [x0 if x0 is not None else first_robin_eigen(geom, geom.R + tau)[1]]
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        starts.append(rng.uniform(0.2, 1.0, geom.num_nodes))
    runs = [minimize_quotient(sys.form_K, sys.mass_M, p, s) for s in starts]
    best = min(runs, key=lambda r: r.value)
    values = [r.value for r in runs]
    if info is not None:
        info.update(values=values, spread=max(values) - min(values),
                    iterations=[r.iterations for r in runs])
    # flux form differences first, so the reported value avoids the matvec cancellation
    value = float(np.dot(best.minimizer, sys.apply_form(best.minimizer))
                  / _pnorm_mass(sys.mass_M, best.minimizer, p) ** 2)
    return value, best.minimizer


def unit_volume_tau_factor(geom: RadialGeometry) -> float:
    """Factor converting tau differences to the unit-volume normalisation (Vol^(2/n))."""
    return geom.volume ** (2.0 / geom.dim.n)


@dataclass
class SpectralReport:
    eta1: float
    phi: np.ndarray
    lambda_M: float
    sharp_bound: float
    sign: SignClass
    tau: float = 0.0
    lambda_tau: float | None = None
    minimizer: np.ndarray | None = None
    beta: float | None = None
    eta1_beta: float | None = None


def spectral_report(geom: RadialGeometry, tau: float = 0.0, seed: int = 0, coarse=None) -> SpectralReport:
    eta1, phi = first_robin_eigen(geom, geom.R)
    sign = classify_geometry(geom, coarse)
    lam_M, u_M = minimize_yamabe_quotient(geom, 0.0, seed=seed)
    rep = SpectralReport(eta1=eta1, phi=phi, lambda_M=lam_M, sharp_bound=sharp_bound(geom.dim.n), sign=sign)
    if tau != 0.0:
        rep.tau = tau
        rep.lambda_tau, rep.minimizer = minimize_yamabe_quotient(geom, tau, seed=seed)
    else:
        rep.lambda_tau, rep.minimizer = lam_M, u_M
    return rep


def dirichlet_eigen(K_sub, m_sub):
    """Smallest eigenpair of a principal (Dirichlet) block."""
    return smallest_eig_generalized(K_sub, m_sub)


def principal_block(K, lo: int, hi: int):
    """Rows/columns lo..hi (inclusive) of a symmetric tridiagonal system."""
    return banded(K.sub[lo:hi], K.diag[lo:hi + 1], K.sup[lo:hi])


def stationarity(K, m, u, p):
    Ku = K.matvec(u)
    Q = float(np.dot(u, Ku)) / float(np.dot(m, np.abs(u) ** p)) ** (2.0 / p)
    return np.abs(Ku - Q * m * np.abs(u) ** (p - 1)) / m


__all__ = [
    "sharp_bound", "first_robin_eigen", "robin_eta", "classify_eta", "classify_geometry",
    "find_c_eta1", "yamabe_quotient", "minimize_yamabe_quotient", "minimize_quotient",
    "SpectralReport", "spectral_report", "SignClass", "unit_volume_tau_factor",
]
