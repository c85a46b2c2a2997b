"""Sub/super-solution pairs for the three sign cases, the local Dirichlet solve and the gluing step."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BarrierValidationError,
    DomainSizeError,
    GlueFailureError,
    PreconditionError,
    WrongCaseError,
)
from .geometry import RadialGeometry
from .linalg import smallest_eig_generalized, solve_banded
from .operators import assemble, box_system, discrete_residual, residual_scale, roundoff_floor
from .spectral import (
    SignClass,
    classify_geometry,
    find_c_eta1,
    first_robin_eigen,
    minimize_quotient,
    minimize_yamabe_quotient,
    polish_critical_point,
    principal_block,
)

ZERO_EIGEN = "ZeroEigen"
NEGATIVE_EIGEN = "NegativeEigen"
POSITIVE_EIGEN = "PositiveEigen"

BARRIER_RTOL = 1e-8
SHIFT_GRID = 64
MAX_SHRINK = 8
MAX_HALVINGS = 12
NULL_PASSES = 60


@dataclass
class BarrierPair:
    u_minus: np.ndarray
    u_plus: np.ndarray
    lam: float
    zeta: float
    A: float
    tau: float
    case_tag: str
    diagnostics: dict = field(default_factory=dict)


@dataclass
class GlueData:
    omega_bounds: tuple
    u1: np.ndarray
    phi_scaled: np.ndarray
    gamma: float
    theta: float
    chi: tuple
    regions: dict
    attempts: int = 1


# ---------------------------------------------------------------- shared helpers


def select_shift(geom: RadialGeometry, tau: float, lam: float, u_lo: float, u_hi: float) -> float:
    """Iteration constant A with A - R - tau + lam*(p-1)*s^(p-2) > 0 on [u_lo, u_hi], plus one.

    A is also kept large enough that the shifted Robin matrix has positive
    row sums when a boundary coefficient is negative (discrete inverse positivity).
    """
    p = geom.dim.p
    c0 = np.asarray(geom.R) + tau
    if lam <= 0:
        s = np.array([u_lo, u_hi], dtype=float)
    else:
        s = np.linspace(u_lo, u_hi, SHIFT_GRID)
    worst = np.max(c0[:, None] - lam * (p - 1) * s[None, :] ** (p - 2))
    A = max(0.0, float(worst)) + 1.0
    sys = box_system(geom, tau)
    for j in (0, -1):
        rc = sys.robin_c[j]
        if rc < 0:
            A = max(A, -sys.robin_load[j] * rc / sys.mass_M[j] + 1.0)
    return A


def check_pair(geom: RadialGeometry, pair: BarrierPair, rtol: float = BARRIER_RTOL) -> dict:
    """Worst violations of ordering, sub- and super-solution inequalities (no raising)."""
    sys = box_system(geom, pair.tau)
    lo, hi = np.asarray(pair.u_minus, float), np.asarray(pair.u_plus, float)
    scale = max(residual_scale(sys, hi, pair.lam), residual_scale(sys, lo, pair.lam))
    tol = max(rtol * scale, roundoff_floor(sys, hi), roundoff_floor(sys, lo))
    sub = discrete_residual(sys, lo, pair.lam, pair.zeta)
    sup = discrete_residual(sys, hi, pair.lam, pair.zeta)
    order = lo - hi
    return {
        "tol": tol,
        "sub_worst": float(np.max(sub)),
        "sub_node": int(np.argmax(sub)),
        "super_worst": float(np.min(sup)),
        "super_node": int(np.argmin(sup)),
        "order_worst": float(np.max(order)),
        "order_node": int(np.argmax(order)),
        "negative_min": float(np.min(lo)),
        "nontrivial": bool(np.any(lo > 0)),
    }


def validate_pair(geom: RadialGeometry, pair: BarrierPair, rtol: float = BARRIER_RTOL) -> dict:
    """Raise BarrierValidationError naming the worst node unless the pair is admissible."""
    c = check_pair(geom, pair, rtol)
    tol = c["tol"]
    if c["negative_min"] < 0 or not c["nontrivial"]:
        raise BarrierValidationError("sub-solution must be nonnegative and not identically zero",
                                     stage="validate", node=int(np.argmin(pair.u_minus)))
    if c["order_worst"] > 1e-12 * max(1.0, float(np.max(pair.u_plus))):
        raise BarrierValidationError("u_minus exceeds u_plus", stage="validate",
                                     node=c["order_node"], value=c["order_worst"])
    if c["sub_worst"] > tol:
        raise BarrierValidationError("sub-solution inequality violated", stage="validate",
                                     node=c["sub_node"], value=c["sub_worst"], tol=tol)
    if c["super_worst"] < -tol:
        raise BarrierValidationError("super-solution inequality violated", stage="validate",
                                     node=c["super_node"], value=c["super_worst"], tol=tol)
    p = geom.dim.p
    s = np.linspace(float(np.min(pair.u_minus)), float(np.max(pair.u_plus)), SHIFT_GRID)
    margin = -(np.asarray(geom.R) + pair.tau)[:, None] + pair.lam * (p - 1) * s[None, :] ** (p - 2) + pair.A
    if np.min(margin) <= 0:
        raise BarrierValidationError("iteration constant A too small", stage="validate",
                                     value=float(np.min(margin)))
    return c


def _require_positive_h(geom):
    if geom.h_inner <= 0 or geom.h_outer <= 0:
        raise PreconditionError(
            "mean curvature must be positive on both boundary spheres; apply a preconditioning factor",
            h_inner=geom.h_inner, h_outer=geom.h_outer)


# ---------------------------------------------------------------- zero and negative cases


def case_zero(geom: RadialGeometry, sign: SignClass | None = None):
    """Positive null eigenfunction scaled to sup 1; returns ``(phi, 0.0, 0.0)``.

    Any multiple solves the problem; sup 1 keeps the conformal metric at the
    scale of g, so curvature checks are not inflated by phi^(2-p).
    """
    sign = sign or classify_geometry(geom)
    if sign.label != "zero":
        raise WrongCaseError(f"first eigenvalue classified {sign.label}", stage="case_zero",
                             eta1=sign.eta1, threshold=sign.threshold)
    _, phi = first_robin_eigen(geom, geom.R)
    return phi / np.max(phi), 0.0, 0.0


def _null_fixed_point(geom: RadialGeometry, phi, A: float, max_passes: int = NULL_PASSES):
    """Make phi a fixed point of the shifted linear step to round-off.

    The degenerate pair leaves no room between u_minus and u_plus, so the
    eigenvector is refined with the iteration map itself, and the round-off
    eigenvalue is removed as a shift tau of R chosen by Newton so that the
    step's multiplier along phi is exactly one.  Returns ``(phi, tau, passes)``
    with sup phi = 1.
    """
    box = box_system(geom)
    step = assemble(geom, A, geom.robin_c)
    m = box.mass_M
    u = np.asarray(phi, dtype=float) / np.max(phi)
    tau = -float(np.dot(u, box.apply_form(u)) / np.dot(m, u * u))
    eps = np.finfo(float).eps
    for passes in range(1, max_passes + 1):
        new = solve_banded(step.form_K, m * (A - np.asarray(geom.R) - tau) * u)
        weight = float(np.dot(m * u, u))
        mult = float(np.dot(m * u, new)) / weight
        slope = -float(np.dot(m * u, solve_banded(step.form_K, m * u))) / weight
        tau += (1.0 - mult) / slope
        new /= np.max(new)
        change = float(np.max(np.abs(new - u)))
        u = new
        if change <= 4 * eps and abs(mult - 1.0) <= 4 * eps:
            break
    return u, tau, passes


def zero_pair(geom: RadialGeometry, sign: SignClass | None = None) -> BarrierPair:
    """Degenerate pair u_minus = u_plus = phi for the eigenfunction case."""
    sign = sign or classify_geometry(geom)
    phi, lam, zeta = case_zero(geom, sign)
    A = select_shift(geom, 0.0, 0.0, float(phi.min()), float(phi.max()))
    phi, tau, passes = _null_fixed_point(geom, phi, A)
    pair = BarrierPair(phi, phi.copy(), lam, zeta, A, tau, ZERO_EIGEN,
                       {"eta1": sign.eta1, "threshold": sign.threshold, "A": A, "eigen_shift": tau,
                        "refine_passes": passes})
    pair.diagnostics["validation"] = validate_pair(geom, pair)
    return pair


def case_negative(geom: RadialGeometry, lam: float | None = None, tau: float = 0.0,
                  sign: SignClass | None = None) -> BarrierPair:
    """u_minus = t*phi (sup < 1), u_plus = K1 constant, zeta at the mean-curvature cap."""
    p = geom.dim.p
    eta1, phi = first_robin_eigen(geom, np.asarray(geom.R) + tau)
    sign = sign or classify_geometry(geom)
    if sign.label != "negative" or eta1 >= 0:
        raise WrongCaseError(f"first eigenvalue classified {sign.label}", stage="case_negative", eta1=eta1)
    _require_positive_h(geom)
    if lam is None:
        lam = 0.5 * eta1
    if not eta1 < lam < 0:
        raise PreconditionError(f"lambda must lie in ({eta1:.6g}, 0), got {lam}", stage="case_negative")
    t = 0.5 / float(np.max(phi))
    u_minus = t * phi
    R = np.asarray(geom.R) + tau
    k1_pow = max(float(np.min(R)) / lam, float(np.max(u_minus)) ** (p - 2))
    K1 = k1_pow ** (1.0 / (p - 2))
    zeta = min(geom.h_inner, geom.h_outer) * K1 ** ((2 - p) / 2)
    u_plus = np.full(geom.num_nodes, K1)
    A = select_shift(geom, tau, lam, float(u_minus.min()), K1)
    pair = BarrierPair(u_minus, u_plus, float(lam), float(zeta), A, tau, NEGATIVE_EIGEN, {
        "eta1": eta1, "t": t, "K1": K1, "zeta_mean_curvature_cap": zeta, "A": A,
        "active_h_boundary": "inner" if geom.h_inner <= geom.h_outer else "outer",
    })
    pair.diagnostics["validation"] = validate_pair(geom, pair)
    return pair


# ---------------------------------------------------------------- positive case


def _omega_indices(geom, omega):
    r = np.asarray(geom.nodes)
    lo = int(np.searchsorted(r, omega[0] - 1e-12 * geom.spacing))
    hi = int(np.searchsorted(r, omega[1] + 1e-12 * geom.spacing, side="right")) - 1
    return lo, hi


def default_omega(geom: RadialGeometry, tau: float = 0.0):
    """Longest run of nodes with R + tau < 0 that stays off the boundary."""
    neg = (np.asarray(geom.R) + tau) < 0
    neg[0] = neg[-1] = False
    best, start = None, None
    for i, flag in enumerate(np.append(neg, False)):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if best is None or i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    if best is None or best[1] - best[0] < 5:
        raise PreconditionError("R + tau is not negative on any interior subinterval", stage="omega")
    lo, hi = best[0], best[1] - 1
    return float(geom.nodes[lo]), float(geom.nodes[hi])


def _dirichlet_blocks(geom, tau, lo, hi):
    sys = box_system(geom, tau)
    flat = assemble(geom, 0.0, (0.0, 0.0))
    inner = slice(lo + 1, hi)
    return (principal_block(sys.form_K, lo + 1, hi - 1), principal_block(flat.form_K, lo + 1, hi - 1),
            sys.mass_M[inner])


def local_dirichlet_solve(geom: RadialGeometry, omega, tau: float, lambda_target: float,
                          max_shrink: int = MAX_SHRINK, info: dict | None = None) -> np.ndarray:
    """Positive solution of the Dirichlet problem on [rho0, rho1], zero-extended to the grid.

    The smallness condition sup|R| + |tau| <= a*lambda_1 is checked against
    the computed first Dirichlet eigenvalue; on failure the interval is
    shrunk by a quarter about its centre, at most ``max_shrink`` times.
    """
    if lambda_target <= 0:
        raise PreconditionError("target must be positive", stage="local_dirichlet")
    p = geom.dim.p
    a = geom.dim.a
    rho0, rho1 = float(omega[0]), float(omega[1])
    R = np.asarray(geom.R) + tau
    for attempt in range(max_shrink + 1):
        lo, hi = _omega_indices(geom, (rho0, rho1))
        if lo < 1 or hi > geom.num_nodes - 2:
            raise PreconditionError("subinterval must lie strictly inside the annulus", stage="local_dirichlet")
        if hi - lo < 4:
            raise DomainSizeError("subinterval shrank below 5 nodes", stage="local_dirichlet")
        if np.any(R[lo:hi + 1] >= 0):
            raise PreconditionError("R + tau must be negative on the subinterval", stage="local_dirichlet",
                                    node=int(lo + np.argmax(R[lo:hi + 1])))
        K, K0, m = _dirichlet_blocks(geom, tau, lo, hi)
        a_lambda1, _ = smallest_eig_generalized(K0, m)
        sup_r = float(np.max(np.abs(geom.R[lo:hi + 1]))) + abs(tau)
        if sup_r <= a_lambda1:
            break
        mid, half = 0.5 * (rho0 + rho1), 0.375 * (rho1 - rho0)
        rho0, rho1 = mid - half, mid + half
    else:
        raise DomainSizeError("smallness condition still violated after shrinking", stage="local_dirichlet",
                              a_lambda1=a_lambda1, sup_R=sup_r)
    _, start = smallest_eig_generalized(K, m)
    run = minimize_quotient(K, m, p, np.abs(start))
    if run.value <= 0:
        raise DomainSizeError("Dirichlet quotient is not positive", stage="local_dirichlet", mu=run.value)
    mu, v = polish_critical_point(K, m, p, run.minimizer)
    s = (mu / lambda_target) ** (1.0 / (p - 2))
    u1 = np.zeros(geom.num_nodes)
    u1[lo + 1:hi] = s * v
    if info is not None:
        info.update(omega=(float(geom.nodes[lo]), float(geom.nodes[hi])), indices=(lo, hi),
                    lambda1_dirichlet=a_lambda1 / a, smallness_lhs=sup_r, smallness_rhs=a_lambda1,
                    mu=mu, scale=s, unit_field=v, shrink_retries=attempt, gradient_steps=run.iterations)
    return u1


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def partition_of_unity(gap, gamma):
    """(chi1, chi2, chi3) in the gap variable u1 - phi with a transition band of width gamma/4."""
    chi3 = 1.0 - _smoothstep((np.abs(gap) - 0.5 * gamma) / (0.25 * gamma))
    rest = 1.0 - chi3
    chi1 = np.where(gap > 0, rest, 0.0)
    chi2 = np.where(gap > 0, 0.0, rest)
    return chi1, chi2, chi3


def _components(mask):
    m = np.asarray(mask, dtype=int)
    return int(np.sum(np.diff(np.concatenate([[0], m])) == 1))


def initial_gamma(geom, lam, theta, phi_sup):
    """Largest gamma meeting both spike-offset inequalities, halved."""
    sup_r = float(np.max(np.abs(geom.R)))
    target = 0.5 * theta
    if sup_r > 0:
        g1 = (-20 * lam + np.sqrt((20 * lam) ** 2 + 8 * sup_r * target)) / (4 * sup_r)
    else:
        g1 = target / (20 * lam)
    p = geom.dim.p
    f = lambda g: 31 * lam * (phi_sup + g) ** (p - 2) * g - target
    lo, hi = 0.0, max(g1, 1.0)
    while f(hi) < 0:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * min(g1, lo)


def dirichlet_obstruction(geom, u1, lam, tau, indices):
    """Smallest eigenvalue of the linearisation at u1 on its support.

    A negative value certifies that no discrete solution, hence no
    super-solution, lies above u1.
    """
    lo, hi = indices
    K, _, m = _dirichlet_blocks(geom, tau, lo, hi)
    p = geom.dim.p
    lin = K.shifted(-(p - 1) * lam * m * u1[lo + 1:hi] ** (p - 2))
    value, _ = smallest_eig_generalized(lin, m)
    return value


def glued_candidate(u1, phi, gamma: float, inside):
    """chi1*u1 + chi2*phi + chi3*(phi + gamma) on the subinterval, phi elsewhere; returns (field, chis)."""
    u1 = np.asarray(u1, dtype=float)
    phi = np.asarray(phi, dtype=float)
    chis = partition_of_unity(u1 - phi, gamma)
    chi1, chi2, chi3 = (np.where(inside, c, d) for c, d in zip(chis, (0.0, 1.0, 0.0)))
    field = np.where(inside, chi1 * u1 + chi2 * phi + chi3 * (phi + gamma), phi)
    return field, (chi1, chi2, chi3)


def glue(geom: RadialGeometry, u1, phi_scaled, lam: float, tau: float, theta: float,
         omega=None, zeta: float = 0.0, gamma: float | None = None):
    """Glue the local spike into the scaled eigenfunction; returns ``(u_plus, GlueData)``."""
    u1 = np.asarray(u1, dtype=float)
    phi = np.asarray(phi_scaled, dtype=float)
    if np.any(phi <= 0):
        raise PreconditionError("scaled eigenfunction must be positive", stage="glue")
    support = np.nonzero(u1)[0]
    if omega is None:
        if len(support) == 0:
            omega = (geom.r0, geom.r0)
        else:
            omega = (float(geom.nodes[support[0] - 1]), float(geom.nodes[support[-1] + 1]))
    lo, hi = _omega_indices(geom, omega)
    inside = np.zeros(geom.num_nodes, dtype=bool)
    inside[lo:hi + 1] = True
    if np.any(u1[~inside] != 0):
        raise PreconditionError("u1 must vanish outside the subinterval", stage="glue")
    gap = u1 - phi
    if np.all(gap <= 0):
        chi = (np.zeros_like(phi), np.ones_like(phi), np.zeros_like(phi))
        data = GlueData(omega, u1, phi, 0.0, theta, chi, {"V": 0, "D_prime": 0, "degenerate": True})
        return phi.copy(), data
    if gamma is None:
        gamma = initial_gamma(geom, lam, theta, float(np.max(phi)))
    sys = box_system(geom, tau)
    worst = None
    for attempt in range(MAX_HALVINGS + 1):
        u_plus, (chi1, chi2, chi3) = glued_candidate(u1, phi, gamma, inside)
        res = discrete_residual(sys, u_plus, lam, zeta)
        tol = max(BARRIER_RTOL * residual_scale(sys, u_plus, lam), roundoff_floor(sys, u_plus))
        node = int(np.argmin(res))
        worst = (node, float(res[node]), tol)
        if res[node] >= -tol and np.all(u_plus >= u1):
            regions = {
                "V": _components(gap > 0), "V_prime": _components(gap < 0),
                "D_prime": _components(np.abs(gap) < gamma), "D_second": _components(np.abs(gap) > 0.5 * gamma),
                "degenerate": False,
            }
            return u_plus, GlueData(omega, u1, phi, gamma, theta, (chi1, chi2, chi3), regions, attempt + 1)
        gamma *= 0.5
    support_idx = (int(support[0]) - 1, int(support[-1]) + 1)
    obstruction = dirichlet_obstruction(geom, u1, lam, tau, support_idx)
    raise GlueFailureError(
        "glued field fails the super-solution test at every gamma", stage="glue",
        node=worst[0], r=float(geom.nodes[worst[0]]), value=worst[1], tol=worst[2],
        gamma_min=2 * gamma, attempts=MAX_HALVINGS + 1, linearised_eigenvalue=obstruction)


def positive_constants(geom: RadialGeometry, tau: float, lam: float, delta: float | None = None) -> dict:
    """beta, the beta-shifted eigenpair, delta, theta and the boundary cap on zeta."""
    p = geom.dim.p
    k = geom.dim.robin_coeff
    c_eta = find_c_eta1(geom)
    beta = 0.5 * c_eta
    eta_b, phi = first_robin_eigen(geom, geom.R, beta)
    if eta_b + tau <= 0:
        raise PreconditionError("|tau| too large: eta_{1,beta} + tau <= 0", stage="case_positive",
                                eta1_beta=eta_b, tau=tau)
    delta_cap = float(((eta_b + tau) * phi.min() / (2.0 ** (p - 2) * lam * np.max(phi ** (p - 1))))
                      ** (1.0 / (p - 2)))
    if delta is None:
        delta = 0.5 * delta_cap
    elif delta >= delta_cap:
        raise PreconditionError("delta above its cap", stage="case_positive", delta=delta, cap=delta_cap)
    phi_s = delta * phi
    theta = float((eta_b + tau) * phi_s.max() - 2.0 ** (p - 2) * lam * np.min(phi_s ** (p - 1)))
    zeta = float(beta * phi_s[[0, -1]].min() / (k * np.max(phi_s ** (p / 2))))
    return {"C_eta1": c_eta, "beta": beta, "eta1_beta": eta_b, "phi": phi, "delta": float(delta),
            "delta_cap": delta_cap, "phi_scaled": phi_s, "theta": theta, "zeta_barrier_cap": zeta}


def case_positive(geom: RadialGeometry, tau: float, omega=None, seed: int = 0, delta: float | None = None,
                  sign: SignClass | None = None, lambda_tau: float | None = None,
                  report: dict | None = None) -> BarrierPair:
    """Barrier pair from the local Dirichlet spike and the beta-shifted eigenfunction.

    ``report`` (if given) is filled with every constant as soon as it is
    known, so a failure in the gluing stage still leaves the ledger.
    """
    rep = report if report is not None else {}
    sign = sign or classify_geometry(geom)
    if sign.label != "positive":
        raise WrongCaseError(f"first eigenvalue classified {sign.label}", stage="case_positive")
    _require_positive_h(geom)
    if tau > 0:
        raise PreconditionError("tau must be <= 0", stage="case_positive")
    if lambda_tau is None:
        lambda_tau, _ = minimize_yamabe_quotient(geom, tau, seed=seed)
    lam = float(lambda_tau)
    rep["lambda_tau"] = lam
    if lam <= 0:
        raise PreconditionError("lambda_tau must be positive in this case", stage="case_positive")
    consts = positive_constants(geom, tau, lam, delta)
    rep.update({k_: v for k_, v in consts.items() if k_ != "phi"})
    phi_s, theta, zeta = consts["phi_scaled"], consts["theta"], consts["zeta_barrier_cap"]
    if omega is None:
        omega = default_omega(geom, tau)
    dinfo = {}
    u1 = local_dirichlet_solve(geom, omega, tau, lam, info=dinfo)
    rep["dirichlet"] = {k_: v for k_, v in dinfo.items() if k_ != "unit_field"}
    rep["u1"] = u1
    u_plus, gdata = glue(geom, u1, phi_s, lam, tau, theta, omega=dinfo["omega"], zeta=zeta)
    rep["glue"] = {"gamma": gdata.gamma, "attempts": gdata.attempts, "regions": gdata.regions}
    A = select_shift(geom, tau, lam, 0.0, float(u_plus.max()))
    pair = BarrierPair(u1, u_plus, lam, float(zeta), A, tau, POSITIVE_EIGEN,
                       {k_: v for k_, v in rep.items() if not isinstance(v, np.ndarray)})
    pair.diagnostics["A"] = A
    pair.diagnostics["validation"] = validate_pair(geom, pair)
    return pair
