import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import family, tilted
from zeromodes.branches import count_crossings, track_branches
from zeromodes.hopf import (
    assemble_s3_spectrum,
    events_in_interval,
    fit_asymptotics,
    flux_interval_index,
    kernel_dimension,
    zcount,
)
from zeromodes.sphere import FluxError, SphereScalar


@pytest.fixture(scope="module")
def const_reports(const_pot):
    return {k: count_crossings(track_branches(family(k, const_pot, 8)), k) for k in range(0, 6)}


@pytest.fixture(scope="module")
def tilted_reports(tilted_pot):
    return {k: count_crossings(track_branches(family(k, tilted_pot, 12)), k) for k in range(0, 6)}


def test_sigma_contribution_k2():
    s3 = assemble_s3_spectrum(1.5, {2: np.array([])}, lam_cap=1.0)
    sig = [it for it in s3.items if it.provenance.startswith("Sigma")]
    assert len(sig) == 1
    assert sig[0].value == -1.0 and sig[0].multiplicity == 2


def test_no_sigma_for_k0():
    s3 = assemble_s3_spectrum(0.0, {0: np.array([-1.0, -1.0, 1.0, 1.0])}, lam_cap=2.0)
    assert not any(it.provenance.startswith("Sigma") for it in s3.items)


def test_constant_field_sqrt_pairs(const_pot):
    spectra = {k: family(k, const_pot, 8).at(0.0).eigenvalues for k in range(-3, 4)}
    s3 = assemble_s3_spectrum(0.0, spectra, lam_cap=3.0)
    sq = [it for it in s3.items if it.provenance.startswith("SqrtBranch")]
    # lambda = 0 never enters the sqrt branches
    assert all("(" in it.provenance and ",0," not in it.provenance for it in sq)
    plus = sorted((it.provenance[:-2], it.value, it.multiplicity) for it in sq if it.provenance.endswith("+)"))
    minus = sorted((it.provenance[:-2], it.value, it.multiplicity) for it in sq if it.provenance.endswith("-)"))
    assert len(plus) == len(minus)
    for (p1, v1, m1), (p2, v2, m2) in zip(plus, minus):
        assert p1 == p2 and m1 == m2
        assert abs(v1 + v2 + 1.0) < 1e-12


def test_s3_values_within_coverage(const_pot):
    spectra = {k: family(k, const_pot, 8).at(0.5).eigenvalues for k in range(-2, 3)}
    s3 = assemble_s3_spectrum(0.5, spectra, lam_cap=3.0)
    v = s3.values()
    assert np.all(np.abs(v + 0.5) < s3.coverage)
    assert np.all(np.diff(v) >= 0)


def test_kernel_dimension_constant(const_reports):
    assert kernel_dimension(2.5, const_reports).value == 2
    assert kernel_dimension(2.3, const_reports).value == 0


@settings(max_examples=20, deadline=None)
@given(t=st.floats(1e-3, 0.5 - 1e-3))
def test_kernel_dimension_small_t(t, const_reports):
    assert kernel_dimension(t, const_reports).value == 0


def test_kernel_dimension_needs_reports():
    with pytest.raises(KeyError):
        kernel_dimension(3.0, {})


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_events_reproduce_N(k, tilted_reports, const_reports):
    assert events_in_interval(tilted_reports, k) == tilted_reports[k].N
    assert events_in_interval(const_reports, k) == const_reports[k].N


def test_flux_interval_index():
    assert flux_interval_index(0.5) == 0
    assert flux_interval_index(0.50001) == 1
    assert flux_interval_index(1.5) == 1
    assert flux_interval_index(-1.5) == -1
    assert flux_interval_index(-0.5) == 0


def test_zcount_constant():
    counts = {k: abs(k) for k in range(-9, 10)}
    beta = SphereScalar.constant(0.5)
    tab = zcount(beta, counts, [K + 0.5 for K in range(9)])
    for K, row in enumerate(tab.rows):
        assert row.exact_partial == K * (K + 1) // 2


@settings(max_examples=30, deadline=None)
@given(T=st.floats(-8.4, 8.4))
def test_zcount_brackets(T):
    counts = {k: abs(k) + (k % 3) for k in range(-9, 10)}
    counts[0] = 1
    row = zcount(SphereScalar.constant(0.5), counts, [T]).rows[0]
    assert row.lower <= row.exact_partial <= row.upper
    assert row.upper - row.lower <= counts[0] + counts[flux_interval_index(T)]


def test_zcount_mirrored():
    counts = {k: abs(k) for k in range(-4, 5)}
    a = zcount(SphereScalar.constant(0.5), counts, [3.5]).rows[0]
    b = zcount(SphereScalar.constant(0.5), counts, [-3.5]).rows[0]
    assert (a.lower, a.exact_partial, a.upper) == (b.lower, b.exact_partial, b.upper)


def test_zcount_errors():
    with pytest.raises(FluxError, match="rescale"):
        zcount(SphereScalar.constant(1.0), {0: 0, 1: 1}, [1.0])
    with pytest.raises(KeyError):
        zcount(tilted(), {0: 0, 1: 1}, [3.0])


def test_fit_constant():
    fit = fit_asymptotics({k: k for k in range(1, 9)}, 1.0)
    assert abs(fit.slope - 1.0) < 1e-12 and abs(fit.slope_full - 1.0) < 1e-12
    assert np.all(fit.deviations == 0)


def test_fit_rejects_small():
    with pytest.raises(ValueError):
        fit_asymptotics({}, 1.0)
    with pytest.raises(ValueError):
        fit_asymptotics({1: 1, 2: 2, 3: 3}, 1.0)


def test_fit_rows_and_z():
    counts = {k: k for k in range(1, 6)}
    z = zcount(SphereScalar.constant(0.5), {0: 0, **counts}, [1.5, 2.5, 3.5])
    fit = fit_asymptotics(counts, 1.0, 1.0, z)
    assert [r["k"] for r in fit.rows()] == [1, 2, 3, 4, 5]
    assert fit.z_target == 0.5
    assert len(fit.z_ratios) == 3
