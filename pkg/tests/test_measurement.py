from math import comb

import numpy as np
import pytest

from pulsecorr import make_state, tensor
from pulsecorr.fock import expect, quadrature
from pulsecorr.measurement import (
    MeasurementSetting,
    TrainValidationError,
    sample,
    spectral_measure,
    sum_field_operator,
    two_pulse_operator,
)
from pulsecorr.moments import estimate_moments
from pulsecorr.oracle import contaminate, exact_table
from pulsecorr.pulses import LOTrain, PulseEnvelope

from conftest import ZOO_NAMES, within, zoo_states


def test_single_mode_sum_field_is_quadrature():
    np.testing.assert_array_equal(sum_field_operator([1.0], [0.0], 8), quadrature(0, 0.0, 8))


def test_absent_second_pulse():
    F = sum_field_operator([1.0, 0.0], [0.4, 1.3], 6)
    np.testing.assert_allclose(F, quadrature(0, 0.4, 6, 2), atol=0)


def test_mismatched_weights_rejected():
    with pytest.raises(ValueError):
        sum_field_operator([1.0, 1.0], [0.0], 4)
    with pytest.raises(ValueError):
        sum_field_operator([1.0, -1.0], [0.0, 0.0], 4)


def test_vacuum_spectral_measure():
    m = spectral_measure(quadrature(0, 0.0, 16), make_state("vacuum", 16))
    assert abs(m.moment(1)) < 1e-10
    assert abs(m.moment(2) - 0.5) < 1e-6
    assert abs(m.probs.sum() - 1) < 1e-12


def test_spectral_measure_reproduces_expectations():
    s = zoo_states()["squeezed"]
    F = two_pulse_operator(0.7, 0.2, 1.1, 16)
    m = spectral_measure(F, s)
    for n in range(1, 5):
        assert abs(m.moment(n) - expect(s, np.linalg.matrix_power(F, n))) < 1e-9


def test_degenerate_lines_are_merged():
    # F1 + F2 on two vacua: many Fock-space eigenvalues coincide
    m = spectral_measure(two_pulse_operator(1.0, 0.0, 0.0, 4), make_state("vacuum", 4, 2))
    assert len(np.unique(np.round(m.values, 6))) == len(m.values)


def test_sampling_is_deterministic():
    s = zoo_states()["coherent"]
    setting = MeasurementSetting(q=0.5, dphi=0.3, eta=0.8, shots=1000, seed=7, batch_size=300)
    a, b = sample(s, setting), sample(s, setting)
    np.testing.assert_array_equal(a.outcomes, b.outcomes)
    assert a.partition == (300, 300, 300, 100)
    c = sample(s, MeasurementSetting(q=0.5, dphi=0.3, eta=0.8, shots=1000, seed=8, batch_size=300))
    assert not np.array_equal(a.outcomes, c.outcomes)


def test_batches_are_independent_of_total_shots():
    s = zoo_states()["fock"]
    short = sample(s, MeasurementSetting(shots=500, seed=3, batch_size=500))
    long = sample(s, MeasurementSetting(shots=1500, seed=3, batch_size=500))
    np.testing.assert_array_equal(long.outcomes[:500], short.outcomes)


def test_unit_efficiency_has_no_noise():
    # with eta = 1 every outcome is an eigenvalue of the measured operator
    s = zoo_states()["fock"]
    setting = MeasurementSetting(q=1.0, dphi=0.5, eta=1.0, shots=2000, seed=1, phase_mode="locked")
    assert setting.noise_variance == 0
    values = spectral_measure(two_pulse_operator(1.0, 0.0, 0.5, 16), s).values
    x = sample(s, setting).outcomes
    assert np.max(np.min(np.abs(x[:, None] - values[None, :]), axis=1)) < 1e-12


def test_vacuum_variance_is_half_eta():
    b = sample(make_state("vacuum", 16, 2), MeasurementSetting(q=0.0, eta=0.5, shots=1_000_000, seed=11))
    est = estimate_moments([b], n_max=2, seed=0).entries[0]
    assert within(est.values[1], est.se[1], 0.25)


def test_locked_coherent_first_moment():
    s = tensor(make_state("coherent", alpha=1), make_state("vacuum"))
    F = two_pulse_operator(1.0, 0.0, 0.0, 16)
    truth = expect(s, F)
    assert abs(truth - np.sqrt(2)) < 1e-6
    b = sample(s, MeasurementSetting(q=1.0, phi=0.0, dphi=0.0, phase_mode="locked", shots=200_000, seed=2))
    est = estimate_moments([b], n_max=1, seed=0).entries[0]
    assert within(est.values[0], est.se[0], truth)


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_phase_averaged_mean_vanishes(name):
    b = sample(zoo_states()[name], MeasurementSetting(q=0.8, dphi=1.0, eta=0.7, shots=100_000, seed=5))
    x = b.outcomes
    assert abs(x.mean()) <= 5 * x.std() / np.sqrt(len(x))


def contaminated_sum_moments(state, q, phi, dphi, eta, n_max=4):
    table = contaminate(exact_table(state, [dphi], n_max=n_max, phase_averaged=False, phi=phi), eta)
    return [sum(comb(n, k) * q**k * table[(n - k, k)][0] for k in range(n + 1)) for n in range(1, n_max + 1)]


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_locked_moments_match_contaminated_oracle(name):
    state = zoo_states()[name]
    q, phi, dphi, eta = 0.8, 0.3, 1.1, 0.6
    b = sample(state, MeasurementSetting(q=q, phi=phi, dphi=dphi, eta=eta, phase_mode="locked",
                                         shots=1_000_000, seed=17))
    est = estimate_moments([b], n_max=4, seed=1).entries[0]
    truth = contaminated_sum_moments(state, q, phi, dphi, eta)
    for n in range(4):
        assert within(est.values[n], est.se[n], truth[n]), (n, est.values[n], est.se[n], truth[n])


def test_train_gate_blocks_sampling():
    near = LOTrain((PulseEnvelope(0, 1), PulseEnvelope(2, 1)), (1, 1))
    with pytest.raises(TrainValidationError):
        sample(zoo_states()["vacuum"], MeasurementSetting(shots=10, train=near))
    far = LOTrain((PulseEnvelope(0, 1), PulseEnvelope(10, 1)), (1, 1))
    assert sample(zoo_states()["vacuum"], MeasurementSetting(shots=10, train=far)).outcomes.shape == (10,)


@pytest.mark.parametrize("bad", [{"eta": 0.0}, {"eta": 1.2}, {"q": -1.0}, {"shots": 0}, {"phase_mode": "random"}])
def test_invalid_settings(bad):
    with pytest.raises(ValueError):
        MeasurementSetting(**bad)
