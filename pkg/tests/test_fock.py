from math import exp, factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from pulsecorr.fock import (
    TruncationError,
    annihilation,
    creation,
    dephase,
    expect,
    make_state,
    mode_annihilation,
    mode_number,
    number,
    quadrature,
    tensor,
)

from conftest import zoo_states


def test_vacuum_vector():
    s = make_state("vacuum", cutoff=8)
    expected = np.zeros(9)
    expected[0] = 1
    np.testing.assert_array_equal(s.data, expected)
    assert s.tail == 0


def test_coherent_mean_photon_number():
    s = make_state("coherent", cutoff=16, alpha=1.0)
    # truncated Poisson sum, renormalized over levels 0..16
    w = [exp(-1) / factorial(n) for n in range(17)]
    oracle = sum(n * p for n, p in enumerate(w)) / sum(w)
    got = expect(s, number(16))
    assert abs(got - oracle) < 1e-12
    assert abs(got - 1.0) < 1e-6


def test_two_mode_squeezed_photon_numbers():
    s = make_state("two_mode_squeezed", 12, 2, r=0.5)
    n1 = expect(s, mode_number(0, 12, 2))
    n2 = expect(s, mode_number(1, 12, 2))
    assert abs(n1 - np.sinh(0.5) ** 2) < 1e-6
    assert abs(n2 - n1) < 1e-14
    assert abs(n1 - 0.2715) < 1e-4


def test_squeezed_matches_matrix_exponential():
    r, theta = 0.3, 0.7
    big = 60
    a = annihilation(big)
    zeta = r * np.exp(1j * theta)
    S = expm(0.5 * (np.conj(zeta) * a @ a - zeta * a.conj().T @ a.conj().T))
    vac = np.zeros(big + 1)
    vac[0] = 1
    oracle = (S @ vac)[:17]
    oracle /= np.linalg.norm(oracle)
    got = make_state("squeezed", 16, r=r, theta=theta).data
    assert np.max(np.abs(got - oracle)) < 1e-10


def test_thermal_is_density_matrix():
    s = make_state("thermal", 16, nbar=0.5)
    assert not s.is_pure
    assert abs(expect(s, number(16)) - 0.5) < 1e-6


def test_fock_level_above_cutoff_rejected():
    with pytest.raises(TruncationError):
        make_state("fock", cutoff=3, n=4)


def test_large_tail_rejected_unless_overridden():
    with pytest.raises(TruncationError):
        make_state("coherent", cutoff=4, alpha=2.0)
    s = make_state("coherent", cutoff=4, alpha=2.0, tail_tol=None)
    assert s.tail > 1e-6


@pytest.mark.parametrize("bad", [{"alpha": np.inf}, {"alpha": complex(np.nan, 0)}])
def test_nonfinite_parameters_rejected(bad):
    with pytest.raises(ValueError):
        make_state("coherent", cutoff=8, **bad)


def test_zero_cutoff_rejected():
    with pytest.raises(ValueError):
        make_state("vacuum", cutoff=0)


@pytest.mark.parametrize("name", list(zoo_states()))
def test_zoo_normalization_and_hermiticity(name):
    s = zoo_states()[name]
    if s.is_pure:
        assert abs(np.vdot(s.data, s.data).real - 1) < 1e-12
    else:
        assert abs(np.trace(s.data).real - 1) < 1e-12
        assert np.max(np.abs(s.data - s.data.conj().T)) < 1e-12
        assert np.linalg.eigvalsh(s.data).min() > -1e-10
    assert s.tail <= 1e-6


@given(st.integers(min_value=1, max_value=20))
def test_truncated_commutator(cutoff):
    a = annihilation(cutoff)
    comm = a @ creation(cutoff) - creation(cutoff) @ a
    dev = comm - np.eye(cutoff + 1)
    # only the top diagonal entry deviates
    assert np.max(np.abs(dev[:-1, :])) < 1e-12
    assert np.max(np.abs(dev[:, :-1])) < 1e-12
    assert abs(dev[-1, -1] + (cutoff + 1)) < 1e-12


@given(st.floats(min_value=-10, max_value=10, allow_nan=False))
@settings(max_examples=30)
def test_quadrature_hermitian_and_sign_flip(phi):
    F = quadrature(0, phi, 8)
    assert np.max(np.abs(F - F.conj().T)) < 1e-12
    np.testing.assert_allclose(quadrature(0, phi + np.pi, 8), -F, atol=1e-12)


def test_quadrature_at_zero_phase():
    a = annihilation(8)
    np.testing.assert_allclose(quadrature(0, 0.0, 8), (a + a.conj().T) / np.sqrt(2), atol=1e-15)


@pytest.mark.parametrize("phi", [0.0, 0.3, 1.7, np.pi])
def test_vacuum_quadrature_moments(phi):
    vac = make_state("vacuum", 16)
    F = quadrature(0, phi, 16)
    assert abs(expect(vac, F @ F) - 0.5) < 1e-12
    assert abs(expect(vac, np.linalg.matrix_power(F, 4)) - 0.75) < 1e-12


def test_expect_examples():
    vac = make_state("vacuum", 16)
    assert expect(vac, number(16)) == 0
    s = tensor(make_state("coherent", alpha=1), make_state("coherent", alpha=1j))
    v = expect(s, mode_annihilation(0, 16, 2).conj().T @ mode_annihilation(1, 16, 2))
    assert isinstance(v, complex)
    assert abs(v - 1j) < 1e-10
    f11 = make_state("fock", 16, 2, n=1)
    assert abs(expect(f11, mode_number(0, 16, 2) @ mode_number(1, 16, 2)) - 1) < 1e-14


def test_expect_dimension_mismatch():
    with pytest.raises(ValueError):
        expect(make_state("vacuum", 4), number(5))


def test_basis_ordering_is_mode_major():
    s = make_state("fock", 3, 2, n=[1, 2])
    assert np.argmax(np.abs(s.data)) == 1 * 4 + 2


@pytest.mark.parametrize("name", list(zoo_states()))
def test_phase_averaged_second_moment_is_photon_number_plus_half(name):
    s = zoo_states()[name]
    phis = 2 * np.pi * np.arange(16) / 16
    for mode in (0, 1):
        avg = np.mean([expect(s, quadrature(mode, p, 16, 2) @ quadrature(mode, p, 16, 2)) for p in phis])
        assert abs(avg - expect(s, mode_number(mode, 16, 2)) - 0.5) < 1e-8


@pytest.mark.parametrize("name", list(zoo_states()))
@pytest.mark.parametrize("m", [1, 3])
def test_phase_averaged_odd_moments_vanish(name, m):
    s = zoo_states()[name]
    phis = 2 * np.pi * np.arange(m + 2) / (m + 2)
    avg = np.mean([expect(s, np.linalg.matrix_power(quadrature(0, p, 16, 2), m)) for p in phis])
    assert abs(avg) < 1e-10


def test_dephase_keeps_photon_number_sectors():
    s = tensor(make_state("coherent", alpha=1), make_state("coherent", alpha=1j))
    d = dephase(s)
    assert not d.is_pure
    assert abs(expect(d, mode_number(0, 16, 2)) - expect(s, mode_number(0, 16, 2))) < 1e-12
    # single-mode coherence is removed, the number-conserving coherence survives
    a1, a2 = mode_annihilation(0, 16, 2), mode_annihilation(1, 16, 2)
    assert abs(expect(d, a1)) < 1e-14
    assert abs(expect(d, a1.conj().T @ a2) - 1j) < 1e-10
