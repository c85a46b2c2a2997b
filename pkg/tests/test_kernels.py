"""Compiled and pure-Python kernels agree; the backend switch is honoured."""

import os
import subprocess
import sys

import numpy as np
import pytest

from boundary_yamabe import _pykernels as pure
from boundary_yamabe import kernels


def _system(n, seed=0):
    rng = np.random.default_rng(seed)
    sub = rng.normal(size=n - 1)
    sup = rng.normal(size=n - 1)
    diag = 4.0 + rng.uniform(size=n)
    return sub, diag, sup, rng.normal(size=n)


@pytest.mark.skipif(kernels.compiled is None, reason="extension not built")
def test_compiled_matches_pure():
    sub, diag, sup, b = _system(500)
    xc, bc = kernels.compiled.thomas(sub, diag, sup, b, 1e-14)
    xp, bp = pure.thomas(sub, diag, sup, b, 1e-14)
    assert bc == bp == -1
    assert np.max(np.abs(xc - xp)) <= 1e-14 * np.max(np.abs(xp))
    assert np.array_equal(kernels.compiled.matvec(sub, diag, sup, b), pure.matvec(sub, diag, sup, b))
    shifted = diag - 4.5
    assert kernels.compiled.negative_pivots(sub, shifted, sup) == pure.negative_pivots(sub, shifted, sup)


def test_pure_thomas_solves():
    sub, diag, sup, b = _system(50, 3)
    x, bad = pure.thomas(sub, diag, sup, b, 1e-14)
    dense = np.diag(diag) + np.diag(sub, -1) + np.diag(sup, 1)
    assert bad == -1 and np.allclose(dense @ x, b)


def test_negative_pivots_counts_eigenvalues_below_zero():
    n = 30
    off = -np.ones(n - 1)
    diag = 2.0 * np.ones(n) - 0.5
    dense = np.diag(diag) + np.diag(off, -1) + np.diag(off, 1)
    assert kernels.negative_pivots(off, diag, off) == int(np.sum(np.linalg.eigvalsh(dense) < 0))


def test_environment_forces_fallback():
    env = dict(os.environ, BOUNDARY_YAMABE_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from boundary_yamabe import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
