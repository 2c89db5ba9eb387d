from math import comb

import numpy as np
import pytest

from pulsecorr import make_state, tensor
from pulsecorr.efficiency import contamination_terms, double_factorial, vacuum_moment
from pulsecorr.fock import expect, mode_number, quadrature
from pulsecorr.oracle import (
    MomentSpec,
    OrderTooHighError,
    contaminate,
    exact_moment,
    exact_physics,
    exact_table,
    table_keys,
)

from conftest import ZOO_NAMES, zoo_states

DPHIS = 2 * np.pi * np.arange(8) / 8


def test_vacuum_second_moment():
    assert abs(exact_moment(make_state("vacuum", 16, 2), MomentSpec(2, 0)) - 0.5) < 1e-12


def test_coherent_cross_term_traces_sine():
    s = zoo_states()["coherent"]
    for d in DPHIS:
        assert abs(exact_moment(s, MomentSpec(1, 1, dphi=d)) - np.sin(d)) < 1e-10


def test_fock_pair_moment():
    s = make_state("fock", 16, 2, n=1)
    for d in (0.0, 0.4, 2.0):
        assert abs(exact_moment(s, MomentSpec(2, 2, dphi=d)) - 2.25) < 1e-12


def test_vacuum_moments_follow_double_factorial():
    vac = make_state("vacuum", 16, 2)
    for m in range(1, 7):
        assert abs(exact_moment(vac, MomentSpec(m, 0)) - vacuum_moment(m)) < 1e-12
    assert [double_factorial(k) for k in (-1, 0, 1, 3, 5)] == [1, 1, 1, 3, 15]


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_odd_orders_vanish_exactly_when_averaged(name):
    s = zoo_states()[name]
    for key in [(1, 0), (0, 1), (2, 1), (1, 2), (3, 0)]:
        assert exact_moment(s, MomentSpec(*key, dphi=0.7)) == 0.0


def test_locked_moment_matches_matrix_power():
    s = zoo_states()["squeezed"]
    F1, F2 = quadrature(0, 0.3, 16, 2), quadrature(1, 1.2, 16, 2)
    direct = expect(s, np.linalg.matrix_power(F1, 3) @ F2)
    assert abs(exact_moment(s, MomentSpec(3, 1, phi=0.3, dphi=0.9, phase_averaged=False)) - direct) < 1e-10


def test_contaminate_examples():
    vac = {(2, 0): 0.5, (1, 1): 0.0, (0, 2): 0.5, (4, 0): 0.75}
    out = contaminate(vac, 0.5)
    assert abs(out[(2, 0)] - 0.25) < 1e-15
    assert abs(out[(4, 0)] - 0.1875) < 1e-15
    assert contaminate(vac, 1.0) == vac


def test_contaminate_needs_lower_orders():
    with pytest.raises(KeyError):
        contaminate({(4, 0): 0.75}, 0.5)


def test_contaminate_identity_at_unit_efficiency_on_tables():
    t = exact_table(zoo_states()["two_mode_squeezed"], DPHIS, n_max=4)
    out = contaminate(t, 1.0)
    for k in t:
        np.testing.assert_array_equal(out[k], t[k])


def test_lossy_exact_moment_matches_contaminated_table():
    s = zoo_states()["coherent"]
    t = contaminate(exact_table(s, [0.8], n_max=4), 0.6)
    assert abs(exact_moment(s, MomentSpec(3, 1, dphi=0.8, eta=0.6)) - t[(3, 1)][0]) < 1e-12


def noise_mode_moment(state, i, j, phi, dphi, eta):
    """Brute force: signal modes plus two vacuum noise modes in one Hilbert space."""
    c = state.cutoff
    joint = tensor(state, make_state("vacuum", c, 2), tail_tol=None)
    s = np.sqrt(eta * (1 - eta))
    G1 = eta * quadrature(0, phi, c, 4) + s * quadrature(2, phi, c, 4)
    G2 = eta * quadrature(1, phi + dphi, c, 4) + s * quadrature(3, phi + dphi, c, 4)
    return expect(joint, np.linalg.matrix_power(G1, i) @ np.linalg.matrix_power(G2, j))


def test_contamination_map_matches_noise_mode_model():
    # independent route: the loss model realized with explicit vacuum modes
    state = tensor(make_state("coherent", 4, alpha=0.5, tail_tol=None),
                   make_state("squeezed", 4, r=0.2, theta=1.0, tail_tol=None), tail_tol=None)
    phi, dphi, eta = 0.3, 0.9, 0.6
    table = contaminate(exact_table(state, [dphi], n_max=4, phase_averaged=False, phi=phi), eta)
    for key in table_keys(4, phase_averaged=False):
        assert abs(table[key][0] - noise_mode_moment(state, *key, phi, dphi, eta)) < 1e-12, key


def test_contamination_leading_coefficient():
    for i, j in [(1, 0), (2, 2), (3, 1), (0, 4)]:
        terms = dict(contamination_terms(i, j, 0.3))
        assert abs(terms[(i, j)] - 0.3 ** (i + j)) < 1e-15


@pytest.mark.parametrize("eta", [0.3, 0.6, 0.9])
@pytest.mark.parametrize("name", ZOO_NAMES)
def test_interference_channel_only_attenuated(name, eta):
    t = exact_table(zoo_states()[name], DPHIS, n_max=2)
    out = contaminate(t, eta)
    assert np.max(np.abs(out[(1, 1)] - eta**2 * t[(1, 1)])) <= 1e-12


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_photon_number_identity(name):
    s = zoo_states()[name]
    n1 = expect(s, mode_number(0, 16, 2))
    assert abs(exact_moment(s, MomentSpec(2, 0)) - 0.5 - n1) < 1e-8


@pytest.mark.parametrize("name", ["vacuum", "coherent", "fock", "squeezed", "thermal"])
def test_pair_moment_dc_factorizes_for_product_states(name):
    s = zoo_states()[name]
    t = exact_table(s, DPHIS, n_max=4)
    n1, n2 = (expect(s, mode_number(k, 16, 2)) for k in (0, 1))
    assert abs(t[(2, 2)].mean() - (n1 + 0.5) * (n2 + 0.5)) < 1e-8


def test_order_cap():
    s = make_state("vacuum", 16, 2)
    exact_moment(s, MomentSpec(6, 0))
    with pytest.raises(OrderTooHighError):
        exact_moment(s, MomentSpec(4, 3))
    assert exact_moment(make_state("vacuum", 20, 2), MomentSpec(7, 0)) == 0.0


def test_exact_physics_examples():
    ph = exact_physics(zoo_states()["coherent"])
    assert abs(ph["coherence.re"]) < 1e-10 and abs(ph["coherence.im"] - 1) < 1e-10
    tms = exact_physics(zoo_states()["two_mode_squeezed"])
    nbar = np.sinh(0.5) ** 2
    assert abs(tms["n1n2"] - (2 * nbar**2 + nbar)) < 1e-8


def test_sum_moment_expansion():
    # <(F1 + q F2)^n> equals the binomial combination of table entries
    s = zoo_states()["thermal"]
    q, d = 0.7, 1.3
    t = exact_table(s, [d], n_max=4, phase_averaged=False, phi=0.2)
    F = quadrature(0, 0.2, 16, 2) + q * quadrature(1, 0.2 + d, 16, 2)
    for n in range(1, 5):
        synth = sum(comb(n, k) * q**k * t[(n - k, k)][0] for k in range(n + 1))
        assert abs(synth - expect(s, np.linalg.matrix_power(F, n))) < 1e-10
