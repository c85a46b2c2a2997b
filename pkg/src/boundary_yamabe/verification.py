"""Checks of a stored solution against its targets (lam, zeta)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .geometry import RadialGeometry
from .operators import (
    box_system,
    discrete_residual,
    maximum_principle_violation,
    mean_curvature_of_conformal,
    residual_scale,
    roundoff_floor,
    scalar_curvature_of_conformal,
    stiffness_energy,
)

CURVATURE_RTOL = 1e-4
ENERGY_RTOL = 1e-8


@dataclass
class Verification:
    passed: bool
    curvature: np.ndarray
    max_dR: float
    worst_node: int
    worst_r: float
    h: tuple
    max_dh: float
    tol_R: float
    tol_h: float
    energy_gap: float
    residual: float
    residual_tol: float
    min_value: float
    max_principle_dip: float
    failures: list = field(default_factory=list)

    def summary(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if k != "curvature"}


def energy_identity(geom: RadialGeometry, u, lam: float, zeta: float, tau: float = 0.0):
    """Return (lhs, rhs): stiffness + int (R+tau) u^2 against lam int u^p + k zeta int_bdry u^(p/2+1)."""
    sys = box_system(geom, tau)
    p, k = geom.dim.p, geom.dim.robin_coeff
    u = np.asarray(u, dtype=float)
    lhs = stiffness_energy(sys, u) + float(np.dot(sys.mass_M * sys.c0, u * u))
    lhs += sum(sys.robin_load[j] * sys.robin_c[j] * u[i] ** 2 for j, i in ((0, 0), (1, -1)))
    rhs = lam * float(np.dot(sys.mass_M, u ** p))
    rhs += k * zeta * (sys.robin_load[0] * u[0] ** (p / 2 + 1) + sys.robin_load[1] * u[-1] ** (p / 2 + 1))
    return float(lhs), float(rhs)


def verify_solution(geom: RadialGeometry, u, lam: float, zeta: float,
                    rtol: float = CURVATURE_RTOL, tau: float = 0.0) -> Verification:
    """Curvature of u^(p-2) g against (lam, zeta), energy identity, residual and positivity."""
    u = np.asarray(u, dtype=float)
    if u.shape != geom.nodes.shape:
        raise DimensionError("solution length differs from the number of nodes")
    failures = []
    min_value = float(np.min(u))
    if not np.all(np.isfinite(u)) or min_value <= 0:
        nan = float("nan")
        return Verification(False, np.full_like(u, np.nan), nan, int(np.argmin(u)), float(geom.nodes[int(np.argmin(u))]),
                            (nan, nan), nan, nan, nan, nan, nan, nan, min_value, nan, ["solution is not strictly positive"])
    curv = scalar_curvature_of_conformal(geom, u) + tau * u ** (2 - geom.dim.p)
    dR = np.abs(curv - lam)
    worst = int(np.argmax(dR))
    h = mean_curvature_of_conformal(geom, u)
    dh = max(abs(h[0] - zeta), abs(h[1] - zeta))
    tol_R = rtol * max(1.0, abs(lam))
    tol_h = rtol * max(1.0, zeta)
    if dR[worst] > tol_R:
        failures.append(f"scalar curvature off by {dR[worst]:.3e} at node {worst} (r = {geom.nodes[worst]:.6g})")
    if dh > tol_h:
        failures.append(f"boundary mean curvature off by {dh:.3e}")
    lhs, rhs = energy_identity(geom, u, lam, zeta, tau)
    gap = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
    sys = box_system(geom, tau)
    res = float(np.max(np.abs(discrete_residual(sys, u, lam, zeta))))
    res_tol = max(1e-7 * residual_scale(sys, u, lam), roundoff_floor(sys, u))
    if res > res_tol:
        failures.append(f"discrete residual {res:.3e} exceeds {res_tol:.3e}")
    if gap > max(ENERGY_RTOL, res_tol * float(np.sum(sys.mass_M * u)) / max(abs(lhs), 1e-300)):
        failures.append(f"energy identity off by {gap:.3e} (relative)")
    dip = maximum_principle_violation(sys, u)
    if dip > 0:
        failures.append(f"maximum principle violated by {dip:.3e}")
    return Verification(not failures, curv, float(dR[worst]), worst, float(geom.nodes[worst]), h, float(dh),
                        tol_R, tol_h, float(gap), res, float(res_tol), min_value, float(dip), failures)
