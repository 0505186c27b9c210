import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from conftest import family
from zeromodes.branches import count_crossings, track_branches
from zeromodes.pencil import (
    Constants,
    build_pencil,
    count_reciprocals,
    kappa_bounds_violations,
    kappa_direct,
    kappa_pm,
    pencil_audit,
    pencil_count,
)


def test_kappa_at_zero():
    kp = kappa_pm(0.0)
    assert kp.plus == 2.0
    assert kp.minus == -2.0 / 3.0


def test_kappa_half():
    # roots of l^2 + l/sqrt(2) - 7/4
    b = 1 / math.sqrt(2)
    r1 = (-b + math.sqrt(b * b + 7)) / 2
    r2 = (-b - math.sqrt(b * b + 7)) / 2
    kp = kappa_pm(0.5)
    assert_allclose([kp.plus, kp.minus], [1 / r1, 1 / r2], rtol=1e-14)
    # quoted six-digit values (the minus one is truncated, not rounded)
    assert abs(kp.plus - 0.984492) < 1e-5
    assert abs(kp.minus + 0.580429) < 1e-5


@settings(max_examples=200, deadline=None)
@given(d=st.floats(-10, 10))
def test_kappa_properties(d):
    kp = kappa_pm(d)
    a, b = kappa_direct(d)
    assert abs(a - kp.plus) < 1e-12
    assert abs(b - kp.minus) < 1e-12
    assert abs(1 / kp.plus + 1 / kp.minus + 1 / kp.delta) < 1e-12
    assert kappa_bounds_violations(d, kp) == []


def test_kappa_eigenvectors():
    for d in (-3.0, 0.0, 0.4):
        kp = kappa_pm(d)
        w, V = np.linalg.eigh(np.array([[2 * d - 0.5, 1], [1, -2 * d - 0.5]]))
        Y = (V * np.abs(w) ** -0.5) @ V.T
        M = Y @ np.array([[0, 1], [1, 0]]) @ Y
        assert_allclose(M @ kp.x_plus, kp.plus * kp.x_plus, atol=1e-13)
        assert_allclose(M @ kp.x_minus, kp.minus * kp.x_minus, atol=1e-13)


def test_constant_field_P_spectrum(const_pot):
    k = 3
    ps = build_pencil(family(k, const_pot, 8))
    nu = np.linalg.eigvalsh(ps.D)
    ref = np.sort(np.concatenate([-0.5 + np.sqrt(4 * nu**2 + 1), -0.5 - np.sqrt(4 * nu**2 + 1)]))
    assert_allclose(np.sort(ps.P_eigenvalues), ref, atol=1e-12)


@pytest.mark.parametrize("k", [1, 3, 5])
def test_residuals(k, tilted_pot):
    ps = build_pencil(family(k, tilted_pot, 8))
    for s in (0.0, 0.5, 1.0):
        assert ps.psq2_residual(s) < 1e-9
    for s in (0.0, 1.0, 1.37):
        assert ps.sigma2_residual(s) < 1e-10


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_constant_count(k, const_pot):
    assert pencil_count(build_pencil(family(k, const_pot, 8))).N == k


@pytest.mark.parametrize("k", [2, 3, 4, 5, 6])
def test_tilted_matches_direct(k, tilted_pot):
    fam = family(k, tilted_pot, 12)
    direct = count_crossings(track_branches(fam), k).N
    assert pencil_count(build_pencil(fam)).N == direct


@pytest.mark.parametrize("s", [0.0, 0.7, 1.0])
def test_kernel_dims_agree(s, tilted_pot):
    ps = build_pencil(family(2, tilted_pot, 12))
    a, b = ps.kernel_dims(s)
    assert a == b


def test_kernel_dims_at_root(tilted_pot):
    # at a solution s (1/lambda for a window eigenvalue) both kernels are nontrivial
    ps = build_pencil(family(2, tilted_pot, 12))
    lam = [z.real for z in ps.L_eigenvalues if abs(z.imag) < 1e-8 and abs(z) > 1e-12 and 0.5 <= 1 / z.real <= 1.5]
    s = 1 / lam[0]
    a, b = ps.kernel_dims(s, rank_tol=1e-7)
    assert a == b >= 1


def test_azm_window_with_small_eps(tilted_pot):
    k = 4
    ps = build_pencil(family(k, tilted_pot, 12))
    C1 = Constants(tilted_pot.a, tilted_pot.sup_norm).C1
    eps = 0.9 / C1
    rows = {r.name: r for r in pencil_audit(ps, eps, k**0.25, tilted_pot.sup_norm)}
    for tag in ("+", "-"):
        r = rows[f"azm_window{tag}"]
        assert r.precondition and r.holds


def test_constant_audit_K1_zero(const_pot):
    ps = build_pencil(family(3, const_pot, 8))
    rows = pencil_audit(ps, math.exp(-math.sqrt(3)), 3**0.25, 0.0)
    for r in rows:
        if r.name.startswith("K1_"):
            assert r.lhs == 0.0
    assert np.abs(ps.K1).max() == 0.0


def test_audit_k4_defaults(tilted_pot):
    k = 4
    fam = family(k, tilted_pot, 12)
    ps = build_pencil(fam)
    N = count_crossings(track_branches(fam), k).N
    rows = pencil_audit(ps, math.exp(-2.0), k**0.25, tilted_pot.sup_norm, N)
    bad = [(r.name, r.margin) for r in rows if not r.holds]
    assert bad == []
    weyl = [r for r in rows if r.name == "weyl"][0]
    assert weyl.margin >= 0


def test_count_reciprocals_monotone(tilted_pot):
    ps = build_pencil(family(3, tilted_pot, 12))
    assert count_reciprocals(ps, 0.5, 1.5) >= count_reciprocals(ps, 0.8, 1.2)
