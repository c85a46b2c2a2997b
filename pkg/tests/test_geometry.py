import math

import numpy as np
import pytest

from boundary_yamabe.errors import DimensionError, InvalidDomainError, InvalidExponentError, InvalidMetricError
from boundary_yamabe.geometry import (
    Dimension,
    build_geometry,
    integrate,
    norm_lp,
    quadrature_factors,
    resample,
    sphere_area,
    with_curvature,
)

flat = lambda r: np.ones_like(r)


def test_exponents_for_three_dimensions():
    d = Dimension(3)
    assert (d.a, d.p, d.robin_coeff, d.boundary_exponent) == (8.0, 6.0, 0.5, 4.0)


@pytest.mark.parametrize("n", [2, 1, 3.5])
def test_dimension_rejects_bad_values(n):
    with pytest.raises(InvalidDomainError):
        Dimension(n)


def test_sphere_areas():
    assert sphere_area(1) == pytest.approx(2 * math.pi)
    assert sphere_area(2) == pytest.approx(4 * math.pi)
    assert sphere_area(3) == pytest.approx(2 * math.pi ** 2)


def test_flat_annulus_has_zero_curvature():
    g = build_geometry(Dimension(3), 1.0, 2.0, 201, flat)
    assert np.max(np.abs(g.R)) < 1e-9
    # inner boundary normal points towards the origin: h = -1/r there, +1/r outside
    assert g.h_inner == pytest.approx(-1.0, abs=1e-6)
    assert g.h_outer == pytest.approx(0.5, abs=1e-6)


def test_flat_volume_matches_shell_volume():
    g = build_geometry(Dimension(3), 1.0, 2.0, 101, flat)
    assert g.volume == pytest.approx(4 * math.pi / 3 * 7, rel=1e-12)


def test_inverted_sphere_factor_curvature():
    # v^4 = (2/(1+r^2))^2 is the round metric of S^3 in stereographic coordinates: R = 6
    g = build_geometry(Dimension(3), 0.5, 1.5, 2001, lambda r: np.sqrt(2.0 / (1.0 + r * r)))
    assert np.max(np.abs(g.R - 6.0)) < 1e-4


def test_quadrature_exact_for_cubics():
    nodes = np.linspace(0.0, 1.0, 11)
    w = quadrature_factors(11, 0.1)
    assert np.dot(w, nodes ** 3) == pytest.approx(0.25, abs=1e-14)


def test_build_rejects_bad_input():
    with pytest.raises(InvalidDomainError):
        build_geometry(Dimension(3), 2.0, 1.0, 11, flat)
    with pytest.raises(InvalidDomainError):
        build_geometry(Dimension(3), 1.0, 2.0, 4, flat)
    with pytest.raises(InvalidMetricError):
        build_geometry(Dimension(3), 1.0, 2.0, 11, lambda r: r - 1.5)
    with pytest.raises(DimensionError):
        build_geometry(Dimension(3), 1.0, 2.0, 11, np.ones(7))


def test_geometry_arrays_are_read_only():
    g = build_geometry(Dimension(3), 1.0, 2.0, 11, flat)
    with pytest.raises(ValueError):
        g.R[0] = 1.0


def test_with_curvature_shift_is_additive():
    g = build_geometry(Dimension(3), 1.0, 2.0, 11, flat)
    s = with_curvature(with_curvature(g, R=2.0), R_shift=-3.0, h_inner=0.1)
    assert s.synthetic and np.allclose(s.R, -1.0) and s.h_inner == 0.1 and s.h_outer == g.h_outer


def test_resample_keeps_synthetic_offset():
    g = with_curvature(build_geometry(Dimension(3), 1.0, 2.0, 101, flat), R_shift=-4.0, h_inner=0.3)
    r = resample(g, 201)
    assert r.num_nodes == 201 and np.allclose(r.R, -4.0, atol=1e-8) and r.h_inner == pytest.approx(0.3)


def test_norms_and_integrals():
    g = build_geometry(Dimension(3), 1.0, 2.0, 101, flat)
    ones = np.ones(101)
    assert integrate(g, ones) == pytest.approx(g.volume)
    assert norm_lp(g, 2 * ones, 2) == pytest.approx(2 * math.sqrt(g.volume))
    with pytest.raises(InvalidExponentError):
        norm_lp(g, ones, 0.5)
    with pytest.raises(DimensionError):
        integrate(g, ones[:-1])
