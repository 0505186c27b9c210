import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.linalg import expm

from zeromodes import kernels
from zeromodes.kernels import backends

IMPLS = list(backends().items())


def jy_matrix(two_j):
    # J_y in the |j, m> basis, m = j, j-1, ..., -j
    j = two_j / 2
    ms = [j - i for i in range(two_j + 1)]
    jp = np.zeros((two_j + 1, two_j + 1))
    for i in range(1, two_j + 1):
        m = ms[i]
        jp[i - 1, i] = math.sqrt(j * (j + 1) - m * (m + 1))
    return (jp - jp.T) / 2j, ms


def d_oracle(two_j, beta):
    jy, ms = jy_matrix(two_j)
    return expm(-1j * beta * jy).real, ms


@pytest.mark.parametrize("name,fn", IMPLS)
@pytest.mark.parametrize("two_jmax", [0, 1, 4, 5, 8])
def test_matches_jy_exponential(name, fn, two_jmax):
    betas = np.array([0.0, 0.3, 1.1, math.pi / 2, 2.9, math.pi])
    for two_m in range(-two_jmax, two_jmax + 1, 2):
        for two_mp in range(-two_jmax, two_jmax + 1, 2):
            rows = fn(two_m, two_mp, two_jmax, betas)
            two_j0 = max(abs(two_m), abs(two_mp))
            for r, two_j in enumerate(range(two_j0, two_jmax + 1, 2)):
                for b_i, b in enumerate(betas):
                    d, ms = d_oracle(two_j, b)
                    i = ms.index(two_m / 2)
                    ip = ms.index(two_mp / 2)
                    assert abs(rows[r, b_i] - d[i, ip]) < 1e-12


@pytest.mark.skipif(len(IMPLS) < 2, reason="compiled backend not built")
@settings(max_examples=40, deadline=None)
@given(
    two_m=st.integers(-60, 60),
    dm=st.integers(-30, 30),
    extra=st.integers(0, 40),
    beta=st.floats(0.0, math.pi),
)
def test_backends_agree(two_m, dm, extra, beta):
    two_mp = two_m + 2 * dm
    two_jmax = max(abs(two_m), abs(two_mp)) + 2 * extra
    b = np.array([beta, math.pi - beta])
    ref = backends()["python"](two_m, two_mp, two_jmax, b)
    out = backends()["cython"](two_m, two_mp, two_jmax, b)
    assert_allclose(out, ref, atol=1e-12, rtol=0)


@pytest.mark.parametrize("name,fn", IMPLS)
def test_unitarity_large_j(name, fn):
    # columns of d^j over m' are orthonormal; check through sum over m of d^2
    beta = np.array([0.7, 2.0])
    two_j = 120
    tot = np.zeros(2)
    for two_m in range(-two_j, two_j + 1, 2):
        tot += fn(two_m, 4, two_j, beta)[-1] ** 2
    assert_allclose(tot, 1.0, atol=1e-10)


@pytest.mark.parametrize("name,fn", IMPLS)
def test_mixed_parity_rejected(name, fn):
    with pytest.raises(ValueError, match="half-integer"):
        fn(2, 1, 5, np.array([0.5]))


@pytest.mark.parametrize("name,fn", IMPLS)
def test_below_seed_is_empty(name, fn):
    assert fn(6, 0, 4, np.array([0.1, 0.2])).shape == (0, 2)


def test_env_forces_fallback(monkeypatch):
    import importlib

    monkeypatch.setenv("ZEROMODES_KERNELS", "python")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("ZEROMODES_KERNELS")
        importlib.reload(kernels)
