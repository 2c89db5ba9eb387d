"""Forward simulation of time-integrated difference-count statistics.

The measured variable for a two-pulse LO train is the sum field strength
``F = F_1(phi) + q F_2(phi + dphi)``. Detection with efficiency ``eta`` maps
each signal mode ``a_k -> eta a_k + sqrt(eta (1 - eta)) c_k`` with ``c_k`` in
vacuum. Since the noise modes are independent vacua, the measured outcome is
``eta X + G`` with ``X`` drawn from the ideal measurement and ``G`` Gaussian
with variance ``(1 + q^2) eta (1 - eta) / 2``; :func:`sample` uses that
shortcut and :func:`sample_with_noise_modes` builds the noise modes explicitly.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .fock import FockState, dephase, is_hermitian, quadrature, tensor, make_state
from .pulses import LOTrain, validate_train

PHASE_MODES = ("locked", "averaged")
DEGENERACY_TOL = 1e-9
DEFAULT_BATCH_SIZE = 250_000


class TrainValidationError(ValueError):
    """The attached LO train does not define independent modes."""


@dataclass(frozen=True)
class MeasurementSetting:
    """One experimental configuration of the two-pulse scheme.

    ``batch_size`` fixes the partition of ``shots`` into RNG batches; batch
    ``b`` draws from a stream keyed by ``(seed, b)``.
    """

    q: float = 1.0
    phi: float = 0.0
    dphi: float = 0.0
    eta: float = 1.0
    phase_mode: str = "averaged"
    shots: int = 10_000
    seed: int = 0
    batch_size: int = DEFAULT_BATCH_SIZE
    train: LOTrain | None = field(default=None, compare=False, repr=False)
    overlap_tol: float = 1e-4

    def __post_init__(self):
        if not (np.isfinite(self.q) and self.q >= 0):
            raise ValueError(f"q must be a finite non-negative number, got {self.q!r}")
        if not 0 < self.eta <= 1:
            raise ValueError(f"detection efficiency must lie in (0, 1], got {self.eta!r}")
        if self.phase_mode not in PHASE_MODES:
            raise ValueError(f"phase_mode must be one of {PHASE_MODES}")
        if int(self.shots) != self.shots or self.shots < 1:
            raise ValueError("shots must be a positive integer")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not (np.isfinite(self.phi) and np.isfinite(self.dphi)):
            raise ValueError("phases must be finite")

    @property
    def partition(self) -> tuple[int, ...]:
        full, rest = divmod(int(self.shots), int(self.batch_size))
        return (self.batch_size,) * full + ((rest,) if rest else ())

    @property
    def noise_variance(self) -> float:
        return (1 + self.q**2) * self.eta * (1 - self.eta) / 2

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("train")
        return d


@dataclass(frozen=True)
class SampleBatch:
    setting: MeasurementSetting
    outcomes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(self.outcomes) != self.setting.shots:
            raise ValueError("number of outcomes differs from the setting's shot count")

    @property
    def seed(self) -> int:
        return self.setting.seed

    @property
    def partition(self) -> tuple[int, ...]:
        return self.setting.partition


class SpectralMeasure(NamedTuple):
    """Discrete outcome distribution: eigenvalues and their probabilities."""

    values: np.ndarray
    probs: np.ndarray

    def moment(self, n: int) -> float:
        return float(np.sum(self.probs * self.values**n))

    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.probs.tolist()))


def sum_field_operator(weights, phases, cutoff: int, n_modes: int | None = None) -> np.ndarray:
    """``sum_k q_k F_k(phi_k)`` on ``n_modes`` modes (default: one per weight)."""
    weights = np.atleast_1d(np.asarray(weights, dtype=float))
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    if n_modes is None:
        n_modes = len(weights)
    if len(weights) != n_modes or len(phases) != n_modes:
        raise ValueError(f"need one (q, phi) pair per mode: {len(weights)} weights, {len(phases)} phases, {n_modes} modes")
    if np.any(weights < 0):
        raise ValueError("weights q_k must be non-negative")
    dim = (cutoff + 1) ** n_modes
    F = np.zeros((dim, dim), dtype=complex)
    for k, (qk, pk) in enumerate(zip(weights, phases)):
        if qk != 0:
            F += qk * quadrature(k, pk, cutoff, n_modes)
    return F


def two_pulse_operator(q: float, phi: float, dphi: float, cutoff: int) -> np.ndarray:
    return sum_field_operator([1.0, q], [phi, phi + dphi], cutoff)


def spectral_measure(F: np.ndarray, state: FockState) -> SpectralMeasure:
    """Exact outcome distribution for measuring Hermitian ``F`` on ``state``.

    Eigenvalues closer than 1e-9 are merged, with their probabilities summed.
    """
    scale = max(1.0, float(np.max(np.abs(F), initial=0.0)))
    if not is_hermitian(F, atol=1e-12 * scale):
        raise ValueError("spectral_measure needs a Hermitian operator")
    evals, evecs = np.linalg.eigh(F)
    if state.is_pure:
        probs = np.abs(evecs.conj().T @ state.data) ** 2
    else:
        probs = np.real(np.einsum("ji,jk,ki->i", evecs.conj(), state.data, evecs))
    if probs.min() < -1e-12:
        raise ArithmeticError(f"negative outcome probability {probs.min()!r}")
    probs = np.clip(probs, 0.0, None)

    # evals come sorted from eigh; group runs closer than the tolerance
    starts = np.concatenate(([True], np.diff(evals) > DEGENERACY_TOL))
    group = np.cumsum(starts) - 1
    p = np.bincount(group, weights=probs)
    v = np.bincount(group, weights=evals * probs)
    counts = np.bincount(group)
    plain = np.bincount(group, weights=evals) / counts
    values = np.where(p > 0, v / np.where(p > 0, p, 1.0), plain)
    total = p.sum()
    if abs(total - 1.0) > 1e-10:
        raise ArithmeticError(f"outcome probabilities sum to {total!r}")
    return SpectralMeasure(values, p / total)


def _batch_rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(batch)])))


def _draw(measure: SpectralMeasure, setting: MeasurementSetting, noise_sd: float) -> np.ndarray:
    cdf = np.cumsum(measure.probs)
    cdf /= cdf[-1]
    out = []
    for b, size in enumerate(setting.partition):
        rng = _batch_rng(setting.seed, b)
        idx = np.searchsorted(cdf, rng.random(size), side="right")
        x = measure.values[np.minimum(idx, len(cdf) - 1)]
        if noise_sd > 0:
            x = setting.eta * x + rng.normal(0.0, noise_sd, size)
        out.append(x)
    return np.concatenate(out)


def _check_train(setting: MeasurementSetting):
    if setting.train is None:
        return
    report = validate_train(setting.train, tol=setting.overlap_tol)
    if not report.passed:
        raise TrainValidationError(str(report))


def sample(state: FockState, setting: MeasurementSetting) -> SampleBatch:
    """Draw ``setting.shots`` difference-count outcomes for a two-mode state.

    In ``averaged`` mode each shot carries an independent uniform global
    phase. Since ``F(phi) = U(phi)^dag F(0) U(phi)`` with ``U = exp(-i phi N)``,
    the per-shot mixture equals measuring ``F(0)`` on the phase-dephased state,
    which is what is sampled.
    """
    if state.n_modes != 2:
        raise ValueError("the two-pulse measurement needs a two-mode state")
    _check_train(setting)
    if setting.phase_mode == "averaged":
        F = two_pulse_operator(setting.q, 0.0, setting.dphi, state.cutoff)
        measure = spectral_measure(F, dephase(state))
    else:
        F = two_pulse_operator(setting.q, setting.phi, setting.dphi, state.cutoff)
        measure = spectral_measure(F, state)
    noise_sd = np.sqrt(setting.noise_variance) if setting.eta < 1 else 0.0
    return SampleBatch(setting, _draw(measure, setting, noise_sd))


def noisy_field_operator(q: float, phi: float, dphi: float, eta: float, cutoff: int) -> np.ndarray:
    """Sum field on signal modes (0, 1) plus explicit noise modes (2, 3)."""
    s = np.sqrt(eta * (1 - eta))
    F = np.zeros(((cutoff + 1) ** 4,) * 2, dtype=complex)
    for sig, noise, w, p in ((0, 2, 1.0, phi), (1, 3, q, phi + dphi)):
        F += w * (eta * quadrature(sig, p, cutoff, 4) + s * quadrature(noise, p, cutoff, 4))
    return F


def sample_with_noise_modes(state: FockState, setting: MeasurementSetting) -> SampleBatch:
    """Reference sampler that realizes detector loss with two vacuum noise modes.

    Intended for small cutoffs (the Hilbert space has ``(cutoff+1)^4``
    dimensions). Agrees in distribution with :func:`sample`.
    """
    if state.n_modes != 2:
        raise ValueError("the two-pulse measurement needs a two-mode state")
    _check_train(setting)
    vac = make_state("vacuum", state.cutoff, 2)
    joint = tensor(state, vac)
    phi = 0.0 if setting.phase_mode == "averaged" else setting.phi
    if setting.phase_mode == "averaged":
        joint = dephase(joint)
    F = noisy_field_operator(setting.q, phi, setting.dphi, setting.eta, state.cutoff)
    return SampleBatch(setting, _draw(spectral_measure(F, joint), setting, 0.0))
