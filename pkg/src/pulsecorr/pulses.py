"""Local-oscillator pulse envelopes and the mode-independence check.

Each LO pulse ``gamma_k g_k(t)`` selects a nonmonochromatic signal mode. Two
such modes behave as independent bosonic modes only when their envelopes are
(approximately) orthogonal, which is what :func:`validate_train` checks.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

SHAPES = ("gaussian",)


@dataclass(frozen=True)
class PulseEnvelope:
    """Unit-norm Gaussian envelope ``g(t)`` on carrier ``omega0``.

    ``|g(t)|^2`` is a normal density with mean ``center`` and standard
    deviation ``width``.
    """

    center: float
    width: float
    omega0: float = 0.0
    shape: str = "gaussian"

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unsupported envelope shape {self.shape!r}")
        if not self.width > 0:
            raise ValueError("envelope width must be positive")
        if not (np.isfinite(self.center) and np.isfinite(self.omega0)):
            raise ValueError("envelope parameters must be finite")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        amp = (2 * np.pi * self.width**2) ** -0.25
        return amp * np.exp(-((t - self.center) ** 2) / (4 * self.width**2)) * np.exp(-1j * self.omega0 * t)

    def support(self, nsigma: float = 40.0) -> tuple[float, float]:
        return self.center - nsigma * self.width, self.center + nsigma * self.width


def _check_comparable(a: PulseEnvelope, b: PulseEnvelope):
    if a.shape != b.shape:
        raise ValueError(f"envelope shapes differ: {a.shape} vs {b.shape}")
    if a.omega0 != b.omega0:
        raise ValueError(f"carrier frequencies differ: {a.omega0} vs {b.omega0}")


def overlap(a: PulseEnvelope, b: PulseEnvelope, method: str = "closed") -> complex:
    """Inner product ``int conj(g_a(t)) g_b(t) dt``.

    ``method="closed"`` uses the Gaussian closed form; ``method="quad"``
    integrates numerically (adaptive quadrature, abs/rel tolerance 1e-10).
    """
    _check_comparable(a, b)
    if method == "closed":
        s2 = a.width**2 + b.width**2
        dt = b.center - a.center
        return complex(np.sqrt(2 * a.width * b.width / s2) * np.exp(-(dt**2) / (4 * s2)))
    if method != "quad":
        raise ValueError(f"unknown overlap method {method!r}")

    lo = min(a.support()[0], b.support()[0])
    hi = max(a.support()[1], b.support()[1])
    # split at both centers so the adaptive rule sees each peak
    points = sorted({a.center, b.center})

    def part(fn):
        val, _ = integrate.quad(fn, lo, hi, points=points, epsabs=1e-12, epsrel=1e-10, limit=400)
        return val

    re = part(lambda t: (np.conj(a(t)) * b(t)).real)
    im = part(lambda t: (np.conj(a(t)) * b(t)).imag)
    return complex(re, im)


@dataclass(frozen=True)
class LOTrain:
    """Ordered LO pulses with complex amplitudes ``gamma_k``."""

    pulses: tuple[PulseEnvelope, ...]
    gammas: tuple[complex, ...]

    def __post_init__(self):
        pulses = tuple(self.pulses)
        gammas = tuple(complex(g) for g in self.gammas)
        if not pulses:
            raise ValueError("an LO train needs at least one pulse")
        if len(pulses) != len(gammas):
            raise ValueError("one amplitude per pulse is required")
        if gammas[0] == 0:
            raise ValueError("the first pulse sets the intensity scale and must be nonzero")
        object.__setattr__(self, "pulses", pulses)
        object.__setattr__(self, "gammas", gammas)

    @classmethod
    def from_polar(cls, pulses, magnitudes, phases) -> "LOTrain":
        return cls(tuple(pulses), tuple(m * np.exp(1j * p) for m, p in zip(magnitudes, phases)))

    @property
    def q(self) -> np.ndarray:
        """Relative amplitudes ``|gamma_k| / |gamma_1|``."""
        g = np.abs(np.array(self.gammas))
        return g / g[0]

    @property
    def phases(self) -> np.ndarray:
        return np.angle(np.array(self.gammas))

    def two_pulse_params(self) -> tuple[float, float, float]:
        """``(q, phi, dphi)`` of the two-pulse sum field."""
        if len(self.pulses) != 2:
            raise ValueError("two_pulse_params needs exactly two pulses")
        phi = self.phases
        return float(self.q[1]), float(phi[0]), float(np.mod(phi[1] - phi[0], 2 * np.pi))


@dataclass
class TrainReport:
    gram: np.ndarray = field(repr=False)
    max_offdiag: float
    tol: float
    passed: bool

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        rows = "\n".join("  " + " ".join(f"{abs(x):.6e}" for x in row) for row in self.gram)
        return f"{verdict}: max off-diagonal overlap {self.max_offdiag:.6e} (tol {self.tol:g})\n{rows}"


def gram_matrix(train: LOTrain, method: str = "closed") -> np.ndarray:
    n = len(train.pulses)
    gram = np.empty((n, n), dtype=complex)
    for i, a in enumerate(train.pulses):
        for j, b in enumerate(train.pulses):
            gram[i, j] = overlap(a, b, method=method) if j >= i else np.conj(gram[j, i])
    return gram


def validate_train(train: LOTrain, tol: float = 1e-4, method: str = "closed") -> TrainReport:
    """Check that all pairwise envelope overlaps are below ``tol``."""
    gram = gram_matrix(train, method=method)
    off = np.abs(gram - np.diag(np.diag(gram)))
    worst = float(off.max()) if len(train.pulses) > 1 else 0.0
    return TrainReport(gram=gram, max_offdiag=worst, tol=tol, passed=worst < tol)


def shift_phases(train: LOTrain, dt: float) -> LOTrain:
    """Delay every pulse by ``dt``; each phase advances by ``omega0 * dt``."""
    if not np.isfinite(dt):
        raise ValueError("time shift must be finite")
    omegas = {p.omega0 for p in train.pulses}
    if len(omegas) != 1:
        raise ValueError("all pulses must share one carrier frequency")
    (omega0,) = omegas
    pulses = tuple(replace(p, center=p.center + dt) for p in train.pulses)
    gammas = tuple(g * np.exp(1j * omega0 * dt) for g in train.gammas)
    return LOTrain(pulses, gammas)
