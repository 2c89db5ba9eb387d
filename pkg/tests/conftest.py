import numpy as np
import pytest

from pulsecorr import make_state, tensor
from pulsecorr.measurement import MeasurementSetting, sample
from pulsecorr.moments import chebyshev_q_grid, decontaminate, dphi_grid, estimate_moments, invert_q_system


def zoo_states():
    """Six two-mode test states, one per state kind."""
    return {
        "vacuum": make_state("vacuum", 16, 2),
        "coherent": tensor(make_state("coherent", alpha=1), make_state("coherent", alpha=1j)),
        "fock": make_state("fock", 16, 2, n=1),
        "squeezed": tensor(make_state("squeezed", r=0.3, theta=0.4), make_state("coherent", alpha=0.5j)),
        "thermal": make_state("thermal", 16, 2, nbar=[0.3, 0.2]),
        "two_mode_squeezed": make_state("two_mode_squeezed", 16, 2, r=0.5),
    }


ZOO_NAMES = list(zoo_states())


@pytest.fixture(scope="session")
def zoo():
    return zoo_states()


def run_grid(state, eta=1.0, shots=100_000, seed=0, n_max=4, qs=None, dphis=None, phase_mode="averaged"):
    qs = chebyshev_q_grid(n_max + 1) if qs is None else qs
    dphis = dphi_grid(8) if dphis is None else dphis
    batches = []
    for i, q in enumerate(qs):
        for j, d in enumerate(dphis):
            s = MeasurementSetting(q=float(q), dphi=float(d), eta=eta, shots=shots, phase_mode=phase_mode,
                                   seed=seed * 10_000 + i * len(dphis) + j)
            batches.append(sample(state, s))
    table = estimate_moments(batches, n_max, seed=seed)
    raw = invert_q_system(table)
    return table, raw, decontaminate(raw, eta)


@pytest.fixture(scope="session")
def grid_runs():
    """Memoized sampled runs keyed by (state name, eta, shots)."""
    cache = {}
    states = zoo_states()

    def get(name, eta=1.0, shots=100_000, seed=0):
        key = (name, eta, shots, seed)
        if key not in cache:
            cache[key] = run_grid(states[name], eta=eta, shots=shots, seed=seed)
        return cache[key]

    return get


def within(est, se, truth, nsigma=5.0, floor=1e-12):
    return abs(est - truth) <= nsigma * se + floor


def rng(seed=0):
    return np.random.default_rng(seed)
