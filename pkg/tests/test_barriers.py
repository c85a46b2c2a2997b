import numpy as np
import pytest

from boundary_yamabe.barriers import (
    NEGATIVE_EIGEN,
    ZERO_EIGEN,
    case_negative,
    case_positive,
    check_pair,
    default_omega,
    dirichlet_obstruction,
    glue,
    local_dirichlet_solve,
    partition_of_unity,
    positive_constants,
    select_shift,
    zero_pair,
)
from boundary_yamabe.errors import (
    GlueFailureError,
    PreconditionError,
    WrongCaseError,
)
from boundary_yamabe.geometry import with_curvature
from boundary_yamabe.operators import box_system, discrete_residual

from conftest import negative_geometry, positive_geometry, zero_geometry


def test_negative_pair_is_ordered_and_valid():
    g = negative_geometry(801)
    pair = case_negative(g)
    assert pair.case_tag == NEGATIVE_EIGEN
    assert np.all(pair.u_minus <= pair.u_plus)
    assert pair.lam == pytest.approx(0.5 * pair.diagnostics["eta1"])
    sys = box_system(g)
    assert np.all(discrete_residual(sys, pair.u_plus, pair.lam, pair.zeta) >= -1e-8)
    assert check_pair(g, pair)["order_worst"] <= 0.0


def test_negative_pair_rejects_lambda_outside_range():
    g = negative_geometry(401)
    with pytest.raises(PreconditionError):
        case_negative(g, lam=-100.0)
    with pytest.raises(PreconditionError):
        case_negative(g, lam=0.5)


def test_negative_requires_positive_mean_curvature():
    g = with_curvature(negative_geometry(401), h_inner=-0.1)
    with pytest.raises(PreconditionError):
        case_negative(g)


def test_wrong_case_is_refused():
    with pytest.raises(WrongCaseError):
        case_negative(positive_geometry(401))
    with pytest.raises(WrongCaseError):
        case_positive(negative_geometry(401), -0.01)


def test_zero_pair_is_a_fixed_point():
    g = zero_geometry(801)
    pair = zero_pair(g)
    assert pair.case_tag == ZERO_EIGEN
    assert np.array_equal(pair.u_minus, pair.u_plus)
    assert np.max(pair.u_plus) == pytest.approx(1.0)
    assert abs(pair.tau) < 1e-8


def test_shift_dominates_nonlinearity():
    g = negative_geometry(401)
    A = select_shift(g, 0.0, -1.0, 0.1, 2.0)
    # A must exceed |lam|(p-1) u^(p-2) over the band and the negative part of R
    assert A >= 5.0 * 2.0 ** 4 and A >= -np.min(g.R)


def test_partition_of_unity_bands():
    gap = np.linspace(-2, 2, 4001)
    chi1, chi2, chi3 = partition_of_unity(gap, 1.0)
    assert np.max(np.abs(chi1 + chi2 + chi3 - 1.0)) == 0.0
    assert np.all(chi3[np.abs(gap) <= 0.5] == 1.0)
    assert np.all(chi3[np.abs(gap) >= 0.75] == 0.0)
    assert np.all(chi1[gap < 0] == 0.0) and np.all(chi2[gap > 0] == 0.0)


def test_positive_constants_are_consistent():
    g = positive_geometry(1001)
    c = positive_constants(g, -0.01, 3.0)
    assert c["beta"] == pytest.approx(0.5 * c["C_eta1"])
    assert 0 < c["delta"] < c["delta_cap"]
    assert c["theta"] > 0 and c["zeta_barrier_cap"] > 0


def test_dirichlet_spike_vanishes_outside_subinterval():
    g = positive_geometry(1001)
    omega = default_omega(g, -0.01)
    info = {}
    u1 = local_dirichlet_solve(g, omega, -0.01, 3.0, info=info)
    lo, hi = info["indices"]
    assert np.all(u1[: lo + 1] == 0) and np.all(u1[hi:] == 0) and np.all(u1[lo + 1:hi] > 0)


def test_dirichlet_solve_needs_negative_curvature():
    g = negative_geometry(401)
    with pytest.raises(PreconditionError):
        local_dirichlet_solve(with_curvature(g, R=1.0), (1.2, 1.8), 0.0, 1.0)
    with pytest.raises(PreconditionError):
        local_dirichlet_solve(g, (1.2, 1.8), 0.0, -1.0)


def test_gluing_fails_with_certificate():
    g = positive_geometry(1001)
    report = {}
    with pytest.raises(GlueFailureError) as info:
        case_positive(g, -0.01, report=report)
    cert = info.value.details["linearised_eigenvalue"]
    assert cert < 0
    lo, hi = report["dirichlet"]["indices"]
    again = dirichlet_obstruction(g, report["u1"], report["lambda_tau"], -0.01, (lo, hi))
    assert again == pytest.approx(cert)


def test_glue_degenerate_branch_returns_phi():
    g = positive_geometry(401)
    phi = np.full(g.num_nodes, 2.0)
    u1 = np.zeros(g.num_nodes)
    u1[100:200] = 1.0
    out, data = glue(g, u1, phi, 3.0, -0.01, 1.0)
    assert np.array_equal(out, phi) and data.regions["degenerate"]


def test_glue_rejects_nonpositive_phi():
    g = positive_geometry(401)
    with pytest.raises(PreconditionError):
        glue(g, np.zeros(g.num_nodes), np.zeros(g.num_nodes), 3.0, -0.01, 1.0)
