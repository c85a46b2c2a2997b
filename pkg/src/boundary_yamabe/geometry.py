"""Radially symmetric annuli with conformally flat metrics g = v^(p-2) * flat.

Fields on the grid are plain 1-D float arrays with one value per node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, InvalidDomainError, InvalidExponentError, InvalidMetricError


@dataclass(frozen=True)
class Dimension:
    """Ambient dimension and the exponents derived from it."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise InvalidDomainError(f"dimension must be an integer >= 3, got {self.n}")

    @property
    def a(self) -> float:
        return 4.0 * (self.n - 1) / (self.n - 2)

    @property
    def p(self) -> float:
        return 2.0 * self.n / (self.n - 2)

    @property
    def robin_coeff(self) -> float:
        return (self.n - 2) / 2.0

    @property
    def boundary_exponent(self) -> float:
        """Power of v in the boundary area density."""
        return 2.0 * (self.n - 1) / (self.n - 2)


def sphere_area(n_minus_1: int) -> float:
    """Surface measure of the unit sphere of dimension ``n_minus_1``."""
    k = n_minus_1 + 1
    return 2.0 * math.pi ** (k / 2.0) / math.gamma(k / 2.0)


def _frozen(arr):
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RadialGeometry:
    """Discretised annulus r0 <= r <= r1 with metric v^(p-2) times the flat one.

    ``R``, ``h_inner`` and ``h_outer`` are the curvature data used by the PDE.
    They equal the curvature of the factor unless overridden through
    :func:`with_curvature`; ``R_factor``/``h_factor`` always keep the values
    computed from ``v`` so conformal bookkeeping stays exact.

    ``vol_weights`` is an end-corrected trapezoid rule used for integrals and
    norms; ``cell_weights`` is the plain trapezoid (half-cells at the ends)
    used as the lumped mass of the discrete operators.
    """

    dim: Dimension
    r0: float
    r1: float
    num_nodes: int
    nodes: np.ndarray
    v: np.ndarray
    R: np.ndarray
    h_inner: float
    h_outer: float
    vol_weights: np.ndarray
    cell_weights: np.ndarray
    bdry_weights: tuple
    omega: float
    R_factor: np.ndarray = field(repr=False)
    h_factor: tuple = field(repr=False)
    synthetic: bool = False

    @property
    def spacing(self) -> float:
        return (self.r1 - self.r0) / (self.num_nodes - 1)

    @property
    def robin_c(self) -> tuple:
        """Boundary coefficients of B_g at (r0, r1)."""
        k = self.dim.robin_coeff
        return (k * self.h_inner, k * self.h_outer)

    @property
    def volume(self) -> float:
        return float(np.sum(self.vol_weights))


def _one_sided_first(f, h):
    left = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    right = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return left, right


def radial_derivatives(nodes, f):
    """First and second r-derivatives: centred inside, one-sided second order at the ends."""
    f = np.asarray(f, dtype=float)
    h = (nodes[-1] - nodes[0]) / (len(nodes) - 1)
    d1 = np.empty_like(f)
    d2 = np.empty_like(f)
    d1[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    d2[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / (h * h)
    d1[0], d1[-1] = _one_sided_first(f, h)
    d2[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h)
    d2[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / (h * h)
    return d1, d2


def flat_laplacian(n, nodes, f):
    """Flat radial Laplacian f'' + (n-1) f'/r by finite differences."""
    d1, d2 = radial_derivatives(nodes, f)
    return d2 + (n - 1) * d1 / nodes


def outward_flat_derivative(nodes, f):
    """Outward flat normal derivatives (inner, outer) by one-sided differences."""
    h = (nodes[-1] - nodes[0]) / (len(nodes) - 1)
    left, right = _one_sided_first(np.asarray(f, dtype=float), h)
    return -left, right


def curvature_of_factor(dim: Dimension, nodes, v):
    """Scalar curvature and boundary mean curvatures of v^(p-2) * flat.

    Returns ``(R, h_inner, h_outer)``.
    """
    nodes = np.asarray(nodes, dtype=float)
    v = np.asarray(v, dtype=float)
    if v.shape != nodes.shape:
        raise DimensionError("factor and node arrays differ in length")
    if len(nodes) < 5:
        raise InvalidDomainError("need at least 5 nodes")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise InvalidMetricError("conformal factor must be positive and finite")
    n, a, p = dim.n, dim.a, dim.p
    R = -a * v ** (1.0 - p) * flat_laplacian(n, nodes, v)
    dn_in, dn_out = outward_flat_derivative(nodes, v)
    half = (p - 2.0) / 2.0
    h_in = v[0] ** (-p / 2.0) * (half * dn_in - v[0] / nodes[0])
    h_out = v[-1] ** (-p / 2.0) * (half * dn_out + v[-1] / nodes[-1])
    return R, float(h_in), float(h_out)


def quadrature_factors(num_nodes, h):
    """End-corrected trapezoid factors (exact for cubics)."""
    c = np.full(num_nodes, h)
    c[0] = c[-1] = 0.5 * h
    corr = np.array([-3.0, 4.0, -1.0]) * h / 24.0
    c[:3] += corr
    c[-3:] += corr[::-1]
    return c


def build_geometry(dim: Dimension, r0: float, r1: float, num_nodes: int, conformal_factor) -> RadialGeometry:
    """Discretise the annulus [r0, r1] with ``num_nodes`` equispaced nodes.

    ``conformal_factor`` is either a callable of r or an array of samples.
    """
    if not isinstance(dim, Dimension):
        dim = Dimension(int(dim))
    if not (0 < r0 < r1) or not np.isfinite(r1):
        raise InvalidDomainError(f"need 0 < r0 < r1, got r0={r0}, r1={r1}")
    if int(num_nodes) != num_nodes or num_nodes < 5:
        raise InvalidDomainError("num_nodes must be an integer >= 5")
    num_nodes = int(num_nodes)
    nodes = np.linspace(r0, r1, num_nodes)
    if callable(conformal_factor):
        v = np.asarray(conformal_factor(nodes), dtype=float)
    else:
        v = np.asarray(conformal_factor, dtype=float)
    if v.shape != nodes.shape:
        raise DimensionError(f"expected {num_nodes} factor samples, got {v.shape}")
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise InvalidMetricError("conformal factor samples must be positive")
    return _assemble(dim, nodes, v)


def _assemble(dim, nodes, v, R=None, h_inner=None, h_outer=None, synthetic=False):
    n, p = dim.n, dim.p
    h = (nodes[-1] - nodes[0]) / (len(nodes) - 1)
    omega = sphere_area(n - 1)
    R_geo, hi_geo, ho_geo = curvature_of_factor(dim, nodes, v)
    density = omega * v ** p * nodes ** (n - 1)
    cells = np.full(len(nodes), h)
    cells[0] = cells[-1] = 0.5 * h
    bexp = dim.boundary_exponent
    bw = (
        omega * v[0] ** bexp * nodes[0] ** (n - 1),
        omega * v[-1] ** bexp * nodes[-1] ** (n - 1),
    )
    return RadialGeometry(
        dim=dim,
        r0=float(nodes[0]),
        r1=float(nodes[-1]),
        num_nodes=len(nodes),
        nodes=_frozen(nodes),
        v=_frozen(v),
        R=_frozen(R_geo if R is None else R),
        h_inner=float(hi_geo if h_inner is None else h_inner),
        h_outer=float(ho_geo if h_outer is None else h_outer),
        vol_weights=_frozen(density * quadrature_factors(len(nodes), h)),
        cell_weights=_frozen(density * cells),
        bdry_weights=(float(bw[0]), float(bw[1])),
        omega=omega,
        R_factor=_frozen(R_geo),
        h_factor=(hi_geo, ho_geo),
        synthetic=synthetic,
    )


def with_curvature(geom: RadialGeometry, R=None, h_inner=None, h_outer=None, R_shift=0.0) -> RadialGeometry:
    """Copy of ``geom`` with synthetic curvature data.

    ``R`` may be a scalar or a per-node array; ``R_shift`` is added afterwards.
    The metric (factor, weights) is unchanged.
    """
    newR = np.array(geom.R if R is None else np.broadcast_to(np.asarray(R, dtype=float), geom.nodes.shape), dtype=float)
    newR = newR + float(R_shift)
    return replace(
        geom,
        R=_frozen(newR),
        h_inner=float(geom.h_inner if h_inner is None else h_inner),
        h_outer=float(geom.h_outer if h_outer is None else h_outer),
        synthetic=True,
    )


def resample(geom: RadialGeometry, num_nodes: int) -> RadialGeometry:
    """Same annulus and curvature data on a different grid (factor and synthetic data interpolated).

    Used for refinement studies; factor samples are interpolated by monotone cubics.
    """
    from scipy.interpolate import PchipInterpolator

    nodes = np.linspace(geom.r0, geom.r1, num_nodes)
    v = PchipInterpolator(geom.nodes, geom.v)(nodes)
    new = _assemble(geom.dim, nodes, v)
    if not geom.synthetic:
        return new
    dR = PchipInterpolator(geom.nodes, geom.R - geom.R_factor)(nodes)
    return replace(
        new,
        R=_frozen(new.R + dR),
        h_inner=geom.h_inner - geom.h_factor[0] + new.h_factor[0],
        h_outer=geom.h_outer - geom.h_factor[1] + new.h_factor[1],
        synthetic=True,
    )


def _check_field(geom, f):
    f = np.asarray(f, dtype=float)
    if f.shape != (geom.num_nodes,):
        raise DimensionError(f"field has shape {f.shape}, geometry has {geom.num_nodes} nodes")
    return f


def integrate(geom: RadialGeometry, f) -> float:
    """Integral of a nodal field against the Riemannian volume."""
    f = _check_field(geom, f)
    return float(np.dot(geom.vol_weights, f))


def norm_lp(geom: RadialGeometry, f, q: float) -> float:
    """L^q norm with respect to the Riemannian volume."""
    if not q >= 1:
        raise InvalidExponentError(f"exponent must be >= 1, got {q}")
    f = _check_field(geom, f)
    return float(np.dot(geom.vol_weights, np.abs(f) ** q) ** (1.0 / q))
