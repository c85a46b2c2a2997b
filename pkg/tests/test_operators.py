import numpy as np
import pytest

from boundary_yamabe.errors import DimensionError, InvalidConformalFactorError
from boundary_yamabe.geometry import Dimension, build_geometry, with_curvature
from boundary_yamabe.operators import (
    apply_box,
    assemble,
    box_system,
    conformal_change,
    discrete_residual,
    maximum_principle_violation,
    mean_curvature_of_conformal,
    quadratic_form,
    roundoff_floor,
    scalar_curvature_of_conformal,
    stiffness_energy,
)

from conftest import negative_geometry


def _flat(num_nodes=201):
    return build_geometry(Dimension(3), 1.0, 2.0, num_nodes, lambda r: np.ones_like(r))


def test_form_is_symmetric_and_kills_constants():
    g = negative_geometry(301)
    sys = assemble(g, 0.0, (0.0, 0.0))
    assert sys.form_K.is_symmetric()
    assert np.max(np.abs(sys.apply_form(np.ones(g.num_nodes)))) == 0.0


def test_apply_form_matches_matrix():
    g = negative_geometry(101)
    sys = box_system(g, tau=-0.3)
    u = np.linspace(1.0, 2.0, 101) ** 2
    scale = sys.form_K.norm_inf() * np.max(u)
    assert np.max(np.abs(sys.apply_form(u) - sys.form_K.matvec(u))) <= 1e-14 * scale


def test_quadratic_form_splits_into_energy_and_potential():
    g = negative_geometry(101)
    sys = box_system(g)
    u = 1.0 + 0.1 * np.sin(np.linspace(0, 3, 101))
    extra = np.dot(sys.mass_M * sys.c0, u * u) + sum(
        sys.robin_load[j] * sys.robin_c[j] * u[i] ** 2 for j, i in ((0, 0), (1, -1)))
    assert quadratic_form(sys, u) == pytest.approx(stiffness_energy(sys, u) + extra, rel=1e-13)


def test_flat_harmonic_field():
    # 1/r is harmonic in three dimensions
    g = _flat(2001)
    sys = assemble(g, 0.0, (0.0, 0.0))
    rows = apply_box(sys, 1.0 / g.nodes)
    assert np.max(np.abs(rows[1:-1])) < 1e-5
    # outward derivatives at r = 1 (pointing inward) and r = 2
    assert rows[0] == pytest.approx(1.0, abs=1e-5)
    assert rows[-1] == pytest.approx(-0.25, abs=1e-5)


def test_curvature_of_conformal_matches_product_factor():
    g = _flat(2001)
    u = 1.0 + 0.2 * np.exp(-(g.nodes - 1.5) ** 2 / 0.1)
    direct = build_geometry(Dimension(3), 1.0, 2.0, 2001, u)
    R = scalar_curvature_of_conformal(g, u)
    assert np.max(np.abs(R - direct.R)) < 1e-9
    h = mean_curvature_of_conformal(g, u)
    assert h == pytest.approx((direct.h_inner, direct.h_outer), abs=1e-9)


def test_conformal_change_is_congruence_on_synthetic_base():
    g = negative_geometry(201)
    w = 1.0 + 0.3 * np.cos(np.linspace(0, 4, 201))
    new = conformal_change(g, w)
    K_old = box_system(g).form_K.to_dense()
    K_new = box_system(new).form_K.to_dense()
    assert np.allclose(K_new, np.diag(w) @ K_old @ np.diag(w), rtol=0, atol=1e-10 * np.abs(K_old).max())


def test_residual_sign_convention():
    g = with_curvature(_flat(), R=1.0, h_inner=0.5, h_outer=0.5)
    sys = box_system(g)
    u = np.full(g.num_nodes, 2.0)
    # R u = 2 in the interior; lam u^5 with lam = 0 leaves a positive (super) residual
    res = discrete_residual(sys, u, 0.0, 0.0)
    assert np.allclose(res[1:-1], 2.0) and res[0] > 0 and res[-1] > 0


def test_roundoff_floor_scales_with_field():
    sys = box_system(negative_geometry(101))
    assert roundoff_floor(sys, 2 * np.ones(101)) == pytest.approx(2 * roundoff_floor(sys, np.ones(101)))


def test_maximum_principle_check():
    g = with_curvature(_flat(), R=1.0)
    sys = box_system(g)
    assert maximum_principle_violation(sys, np.ones(g.num_nodes)) == 0.0
    dip = np.ones(g.num_nodes)
    dip[100] = -1.0
    # the dipped field has a negative row there, so the check does not apply
    assert maximum_principle_violation(sys, dip) == 0.0


def test_invalid_fields():
    g = _flat(11)
    with pytest.raises(InvalidConformalFactorError):
        scalar_curvature_of_conformal(g, -np.ones(11))
    with pytest.raises(DimensionError):
        apply_box(box_system(g), np.ones(5))
    with pytest.raises(InvalidConformalFactorError):
        conformal_change(g, np.zeros(11))
