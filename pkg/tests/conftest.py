"""Shared canonical geometries, cached solves, and the acceptance summary printer."""

import functools
import math

import numpy as np
import pytest

from boundary_yamabe.factors import parse_factor
from boundary_yamabe.geometry import Dimension, build_geometry, with_curvature
from boundary_yamabe.operators import conformal_change
from boundary_yamabe.solver import solve
from boundary_yamabe.spectral import robin_eta

SHELL_LENGTH = 0.15
SOLVE_TOL = 1e-12
SOLVE_MAX_ITER = 50000

ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def negative_geometry(num_nodes):
    """Curved annulus [1, 2] with R lowered by 6 and h = (0.2, 0.3): eta1 < 0."""
    g = build_geometry(Dimension(3), 1.0, 2.0, num_nodes, parse_factor("gauss:0.5,0.3,1.5"))
    return with_curvature(g, R_shift=-6.0, h_inner=0.2, h_outer=0.3)


@functools.lru_cache(maxsize=None)
def zero_geometry(num_nodes):
    """The negative annulus with R shifted so the first Robin eigenvalue vanishes."""
    g = negative_geometry(num_nodes)
    return with_curvature(g, R_shift=-robin_eta(g))


@functools.lru_cache(maxsize=None)
def positive_geometry(num_nodes):
    """Thin shell [1, e^0.15] with a slightly dented r^(-1/2) factor: eta1 > 0, h > 0."""
    r1 = math.exp(SHELL_LENGTH)
    spec = f"power:-0.5*gauss:-0.02,{0.18 * SHELL_LENGTH},{(1 + r1) / 2}"
    return build_geometry(Dimension(3), 1.0, r1, num_nodes, parse_factor(spec))


@functools.lru_cache(maxsize=None)
def flat_zero_geometry(num_nodes):
    """Flat annulus with R = h = 0 pushed through a conformal change: exact null eigenvalue."""
    g = build_geometry(Dimension(3), 1.0, 2.0, num_nodes, lambda r: np.ones_like(r))
    g = with_curvature(g, R=0.0, h_inner=0.0, h_outer=0.0)
    return conformal_change(g, parse_factor("gauss:0.4,0.25,1.4")(g.nodes))


BUILDERS = {"negative": negative_geometry, "zero": zero_geometry, "positive": positive_geometry}


@functools.lru_cache(maxsize=None)
def canonical_solve(case, num_nodes):
    return solve(BUILDERS[case](num_nodes), tol=SOLVE_TOL, max_iter=SOLVE_MAX_ITER)


@pytest.fixture
def record():
    """Register one acceptance line: record(number, passed, detail)."""

    def _record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES, key=lambda item: item[0]):
        terminalreporter.write_line(line)
