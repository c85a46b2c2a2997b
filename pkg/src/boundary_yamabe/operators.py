"""Discrete conformal Laplacian, Robin boundary operator and conformal transformation laws.

The symmetric form matrix is assembled from cell fluxes: on the cell between
r_i and r_{i+1} the radial weight r^(n-1) is replaced by its harmonic mean,
so radial flat-harmonic functions are reproduced exactly, and v^2 by
v_i*v_{i+1}.  The strong operator is the form divided by the lumped cell
volumes; at the two end nodes this is the half-cell balance obtained by
eliminating a ghost node with the Robin condition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidConformalFactorError
from .geometry import (
    RadialGeometry,
    _assemble,
    flat_laplacian,
    outward_flat_derivative,
    with_curvature,
)
from .linalg import BandedSystem, banded


def radial_fluxes(geom: RadialGeometry) -> np.ndarray:
    """Stiffness coefficients a*omega*(harmonic mean of r^(n-1))*v_i*v_{i+1}/h per cell."""
    n, a = geom.dim.n, geom.dim.a
    r = geom.nodes
    h = geom.spacing
    mean_r = (n - 2) * h / (r[:-1] ** (2 - n) - r[1:] ** (2 - n))
    return a * geom.omega * mean_r * geom.v[:-1] * geom.v[1:] / h


@dataclass(frozen=True)
class RobinSystem:
    """Assembled -a*Lap_g + c0 with Robin coefficients ``robin_c`` at (r0, r1).

    ``form_K`` is the symmetric matrix of the quadratic form, ``mass_M`` the
    lumped mass, ``strong_A`` the row-scaled operator M^-1 K.  A boundary datum
    g in ``du/dnu + robin_c*u = g`` enters the right-hand side of the boundary
    rows as ``robin_load * g``.
    """

    geom: RadialGeometry
    c0: np.ndarray
    robin_c: tuple
    flux: np.ndarray
    form_K: BandedSystem
    mass_M: np.ndarray
    strong_A: BandedSystem
    robin_load: tuple

    @property
    def size(self):
        return self.geom.num_nodes

    def apply_form(self, u) -> np.ndarray:
        """K u in flux form (differences first, so constants are annihilated exactly)."""
        u = np.asarray(u, dtype=float)
        du = self.flux * (u[:-1] - u[1:])
        out = self.c0 * self.mass_M * u
        out[:-1] += du
        out[1:] -= du
        out[0] += self.robin_load[0] * self.robin_c[0] * u[0]
        out[-1] += self.robin_load[1] * self.robin_c[1] * u[-1]
        return out

    def apply_strong(self, u) -> np.ndarray:
        return self.apply_form(u) / self.mass_M

    def shifted(self, extra_c0) -> "RobinSystem":
        """Same system with ``extra_c0`` added to the zeroth-order coefficient."""
        return assemble(self.geom, self.c0 + extra_c0, self.robin_c)


def assemble(geom: RadialGeometry, c0, robin_c) -> RobinSystem:
    c0 = np.broadcast_to(np.asarray(c0, dtype=float), geom.nodes.shape).astype(float)
    if c0.shape != (geom.num_nodes,):
        raise DimensionError("c0 length differs from the number of nodes")
    if len(robin_c) != 2:
        raise DimensionError("robin_c must hold two boundary coefficients")
    a = geom.dim.a
    flux = radial_fluxes(geom)
    m = np.asarray(geom.cell_weights, dtype=float)
    load = (a * geom.bdry_weights[0], a * geom.bdry_weights[1])
    diag = c0 * m
    diag[:-1] += flux
    diag[1:] += flux
    diag[0] += load[0] * robin_c[0]
    diag[-1] += load[1] * robin_c[1]
    off = -flux
    K = banded(off, diag, off)
    A = banded(off / m[1:], diag / m, off / m[:-1])
    return RobinSystem(
        geom=geom,
        c0=c0,
        robin_c=(float(robin_c[0]), float(robin_c[1])),
        flux=flux,
        form_K=K,
        mass_M=m,
        strong_A=A,
        robin_load=load,
    )


def box_system(geom: RadialGeometry, tau: float = 0.0, beta: float = 0.0) -> RobinSystem:
    """Box_g + tau with boundary coefficients robin_coeff*h_g - beta."""
    rc = geom.robin_c
    return assemble(geom, geom.R + tau, (rc[0] - beta, rc[1] - beta))


def normal_derivative(geom: RadialGeometry, u):
    """Outward g-unit normal derivatives (inner, outer) by one-sided second-order differences."""
    p = geom.dim.p
    dn_in, dn_out = outward_flat_derivative(geom.nodes, u)
    return (geom.v[0] ** ((2 - p) / 2) * dn_in, geom.v[-1] ** ((2 - p) / 2) * dn_out)


def boundary_operator(sys: RobinSystem, u):
    """du/dnu_g + robin_c*u at (r0, r1)."""
    dn = normal_derivative(sys.geom, u)
    return (dn[0] + sys.robin_c[0] * u[0], dn[1] + sys.robin_c[1] * u[-1])


def apply_box(sys: RobinSystem, u) -> np.ndarray:
    """Strong rows inside; B_g u in the two boundary entries."""
    u = np.asarray(u, dtype=float)
    if u.shape != (sys.size,):
        raise DimensionError("field length differs from the number of nodes")
    out = sys.apply_strong(u)
    out[0], out[-1] = boundary_operator(sys, u)
    return out


def quadratic_form(sys: RobinSystem, u) -> float:
    u = np.asarray(u, dtype=float)
    if u.shape != (sys.size,):
        raise DimensionError("field length differs from the number of nodes")
    return float(np.dot(u, sys.apply_form(u)))


def stiffness_energy(sys: RobinSystem, u) -> float:
    """Discrete a*int |grad_g u|^2 dVol."""
    du = np.diff(np.asarray(u, dtype=float))
    return float(np.dot(sys.flux, du * du))


def discrete_residual(sys: RobinSystem, u, lam: float, zeta: float) -> np.ndarray:
    """Row residuals of the discrete problem  K u = M lam u^(p-1) + load * k*zeta*u^(p/2).

    Interior rows are scaled by the cell volume (units of Box_g u); the two
    boundary rows by the boundary load (units of B_g u).  Positive entries mean
    super-solution, negative sub-solution.
    """
    p = sys.geom.dim.p
    k = sys.geom.dim.robin_coeff
    u = np.asarray(u, dtype=float)
    au = np.abs(u)
    rows = sys.apply_form(u) - sys.mass_M * lam * au ** (p - 1) * np.sign(u)
    res = rows / sys.mass_M
    res[0] = rows[0] / sys.robin_load[0] - k * zeta * au[0] ** (p / 2)
    res[-1] = rows[-1] / sys.robin_load[1] - k * zeta * au[-1] ** (p / 2)
    return res


def residual_scale(sys: RobinSystem, u, lam: float) -> float:
    p = sys.geom.dim.p
    u = np.abs(np.asarray(u, dtype=float))
    return float(max(1.0, abs(lam) * np.max(u) ** (p - 1), np.max(np.abs(sys.c0)) * np.max(u)))


def roundoff_floor(sys: RobinSystem, u, factor: float = 10.0) -> float:
    """Smallest row residual distinguishable from cancellation error: factor*eps*||A||*max|u|."""
    umax = float(np.max(np.abs(np.asarray(u, dtype=float))))
    return factor * float(np.finfo(float).eps) * sys.strong_A.norm_inf() * umax


def _positive(u, what):
    u = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(u)) or np.any(u <= 0):
        raise InvalidConformalFactorError(f"{what} must be strictly positive")
    return u


def scalar_curvature_of_conformal(geom: RadialGeometry, u) -> np.ndarray:
    """Scalar curvature of u^(p-2) g, via covariance: (vu)^(1-p)(-a Lap_flat(vu)) plus synthetic offsets."""
    u = _positive(u, "conformal factor")
    if u.shape != geom.nodes.shape:
        raise DimensionError("field length differs from the number of nodes")
    n, a, p = geom.dim.n, geom.dim.a, geom.dim.p
    w = geom.v * u
    curv = -a * w ** (1 - p) * flat_laplacian(n, geom.nodes, w)
    return curv + (geom.R - geom.R_factor) * u ** (2 - p)


def mean_curvature_of_conformal(geom: RadialGeometry, u):
    """Mean curvatures (inner, outer) of u^(p-2) g."""
    u = np.asarray(u, dtype=float)
    if u.shape != geom.nodes.shape:
        raise DimensionError("field length differs from the number of nodes")
    if u[0] <= 0 or u[-1] <= 0:
        raise InvalidConformalFactorError("conformal factor must be positive on the boundary")
    p = geom.dim.p
    dn = normal_derivative(geom, u)
    half = (p - 2) / 2
    return (
        float(u[0] ** (-p / 2) * (half * dn[0] + geom.h_inner * u[0])),
        float(u[-1] ** (-p / 2) * (half * dn[1] + geom.h_outer * u[-1])),
    )


def conformal_change(geom: RadialGeometry, w) -> RadialGeometry:
    """Geometry of w^(p-2) g: factor v*w with curvature data transformed by the conformal laws.

    For a geometric base the new curvature is that of the product factor.
    Synthetic data is carried over with the discrete laws: interior R from the
    strong rows, R at the two end nodes from the stencil, and h from the
    half-cell balance.  The new form matrix is then exactly diag(w) K diag(w),
    so the sign of the first eigenvalue and any null vector (divided by w)
    carry over to round-off.
    """
    w = _positive(w, "conformal factor")
    if w.shape != geom.nodes.shape:
        raise DimensionError("field length differs from the number of nodes")
    new = _assemble(geom.dim, np.asarray(geom.nodes), geom.v * w)
    if not geom.synthetic:
        return new
    p = geom.dim.p
    k = geom.dim.robin_coeff
    old = box_system(geom)
    Kw = old.apply_form(w)
    R = w ** (1 - p) * Kw / old.mass_M
    R[[0, -1]] = scalar_curvature_of_conformal(geom, w)[[0, -1]]
    h = []
    for j in (0, -1):
        rest = w[j] * Kw[j] - R[j] * old.mass_M[j] * w[j] ** p
        h.append(rest / (k * old.robin_load[j] * w[j] ** geom.dim.boundary_exponent))
    return with_curvature(new, R=R, h_inner=h[0], h_outer=h[1])


def maximum_principle_violation(sys: RobinSystem, u, tol=1e-10) -> float:
    """Amount by which a field with nonnegative strong rows dips below min(0, boundary values).

    Returns 0 when the check does not apply (c0 negative somewhere, or some
    interior strong row negative) or when it holds.
    """
    u = np.asarray(u, dtype=float)
    if np.any(sys.c0 < 0):
        return 0.0
    rows = sys.apply_strong(u)[1:-1]
    scale = max(1.0, float(np.max(np.abs(rows), initial=0.0)))
    if np.any(rows < -tol * scale):
        return 0.0
    floor = min(0.0, float(u[0]), float(u[-1]))
    dip = floor - float(np.min(u[1:-1]))
    return max(0.0, dip - tol)
