"""Truncated Fock-space states and mode operators.

Basis ordering is mode-major: for two modes with per-mode dimension
``d = cutoff + 1`` the basis index of ``|n1, n2>`` is ``n1 * d + n2``.
All operators are dense complex matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from math import lgamma

import numpy as np

DEFAULT_CUTOFF = 16
DEFAULT_TAIL_TOL = 1e-6

STATE_KINDS = (
    "vacuum",
    "fock",
    "coherent",
    "squeezed",
    "thermal",
    "two_mode_squeezed",
)


class TruncationError(ValueError):
    """Raised when a state does not fit the requested Fock cutoff."""


@dataclass(frozen=True)
class FockState:
    """A normalized state on ``n_modes`` truncated bosonic modes.

    ``data`` is either a pure amplitude vector of length ``dim`` or a
    Hermitian density matrix of shape ``(dim, dim)``.
    """

    n_modes: int
    cutoff: int
    data: np.ndarray = field(repr=False)
    tail: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")
        dim = (self.cutoff + 1) ** self.n_modes
        data = np.asarray(self.data, dtype=complex)
        if data.shape not in ((dim,), (dim, dim)):
            raise ValueError(f"state data has shape {data.shape}, expected ({dim},) or ({dim}, {dim})")
        if data.ndim == 1:
            norm = np.vdot(data, data).real
            if abs(norm - 1.0) > 1e-12:
                raise ValueError(f"state vector norm {norm!r} differs from 1")
        else:
            if np.max(np.abs(data - data.conj().T)) > 1e-12:
                raise ValueError("density matrix is not Hermitian")
            tr = np.trace(data).real
            if abs(tr - 1.0) > 1e-12:
                raise ValueError(f"density matrix trace {tr!r} differs from 1")
            if np.linalg.eigvalsh(data).min() < -1e-10:
                raise ValueError("density matrix has a negative eigenvalue")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return (self.cutoff + 1) ** self.n_modes

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    def density(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return np.array(self.data)

    def populations(self) -> np.ndarray:
        """Fock-basis occupation probabilities, shaped ``(cutoff+1,) * n_modes``."""
        if self.is_pure:
            p = np.abs(self.data) ** 2
        else:
            p = np.real(np.diag(self.data))
        return p.reshape((self.cutoff + 1,) * self.n_modes)

    def mode_tails(self) -> np.ndarray:
        """Probability of the top Fock level, per mode."""
        return tail_occupancy(self.populations())


def tail_occupancy(populations: np.ndarray) -> np.ndarray:
    tails = []
    for mode in range(populations.ndim):
        axes = tuple(a for a in range(populations.ndim) if a != mode)
        marginal = populations.sum(axis=axes) if axes else populations
        tails.append(float(marginal[-1]))
    return np.array(tails)


# -- operators ---------------------------------------------------------------

def annihilation(cutoff: int) -> np.ndarray:
    """Single-mode annihilation operator on levels ``0..cutoff``."""
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1).astype(complex)


def creation(cutoff: int) -> np.ndarray:
    return annihilation(cutoff).conj().T


def number(cutoff: int) -> np.ndarray:
    return np.diag(np.arange(cutoff + 1, dtype=float)).astype(complex)


def embed(op: np.ndarray, mode: int, n_modes: int) -> np.ndarray:
    """Lift a single-mode operator to act on ``mode`` of an ``n_modes`` system."""
    if not 0 <= mode < n_modes:
        raise IndexError(f"mode index {mode} out of range for {n_modes} modes")
    eye = np.eye(op.shape[0], dtype=complex)
    factors = [op if k == mode else eye for k in range(n_modes)]
    return reduce(np.kron, factors)


def mode_annihilation(mode: int, cutoff: int = DEFAULT_CUTOFF, n_modes: int = 1) -> np.ndarray:
    return embed(annihilation(cutoff), mode, n_modes)


def mode_creation(mode: int, cutoff: int = DEFAULT_CUTOFF, n_modes: int = 1) -> np.ndarray:
    return embed(creation(cutoff), mode, n_modes)


def mode_number(mode: int, cutoff: int = DEFAULT_CUTOFF, n_modes: int = 1) -> np.ndarray:
    return embed(number(cutoff), mode, n_modes)


def quadrature(mode: int, phi: float, cutoff: int = DEFAULT_CUTOFF, n_modes: int = 1) -> np.ndarray:
    """Field strength ``(a e^{-i phi} + a^dag e^{i phi}) / sqrt(2)`` of one mode."""
    a = annihilation(cutoff)
    single = (a * np.exp(-1j * phi) + a.conj().T * np.exp(1j * phi)) / np.sqrt(2.0)
    return embed(single, mode, n_modes)


def total_number(cutoff: int, n_modes: int) -> np.ndarray:
    """Diagonal of the total photon-number operator."""
    levels = np.arange(cutoff + 1)
    grids = np.meshgrid(*([levels] * n_modes), indexing="ij")
    return sum(g for g in grids).ravel()


def is_hermitian(op: np.ndarray, atol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(op - op.conj().T), initial=0.0) <= atol)


def expect(state: FockState, op: np.ndarray):
    """Expectation value of ``op`` in ``state``.

    Hermitian operators give a float; the discarded imaginary part is checked
    to be below 1e-10. Other operators give a complex number.
    """
    op = np.asarray(op)
    if op.shape != (state.dim, state.dim):
        raise ValueError(f"operator shape {op.shape} does not match state dimension {state.dim}")
    if state.is_pure:
        val = np.vdot(state.data, op @ state.data)
    else:
        val = np.einsum("ij,ji->", state.data, op)
    if is_hermitian(op, atol=1e-12 * max(1.0, float(np.max(np.abs(op), initial=0.0)))):
        if abs(val.imag) > 1e-10:
            raise ArithmeticError(f"Hermitian expectation has imaginary part {val.imag!r}")
        return float(val.real)
    return complex(val)


# -- state construction ------------------------------------------------------

def _log_factorial(n):
    return np.array([lgamma(k + 1.0) for k in np.atleast_1d(n)])


def _fock_vector(n: int, cutoff: int) -> np.ndarray:
    if n < 0 or int(n) != n:
        raise ValueError(f"Fock level must be a non-negative integer, got {n!r}")
    if n > cutoff:
        raise TruncationError(f"Fock level {n} exceeds cutoff {cutoff}")
    v = np.zeros(cutoff + 1, dtype=complex)
    v[int(n)] = 1.0
    return v


def _coherent_vector(alpha: complex, cutoff: int) -> np.ndarray:
    alpha = complex(alpha)
    levels = np.arange(cutoff + 1)
    if alpha == 0:
        return _fock_vector(0, cutoff)
    logmag = levels * np.log(abs(alpha)) - 0.5 * _log_factorial(levels)
    return np.exp(logmag) * np.exp(1j * np.angle(alpha) * levels)


def _squeezed_vector(r: float, theta: float, cutoff: int) -> np.ndarray:
    # S(r e^{i theta})|0>: only even levels populated
    v = np.zeros(cutoff + 1, dtype=complex)
    if r == 0:
        v[0] = 1.0
        return v
    m = np.arange(cutoff // 2 + 1)
    t = np.tanh(abs(r))
    logmag = m * np.log(t) + 0.5 * _log_factorial(2 * m) - m * np.log(2.0) - _log_factorial(m)
    phase = (-np.exp(1j * theta) * np.sign(r)) ** m
    v[2 * m] = np.exp(logmag) * phase
    return v


def _thermal_populations(nbar: float, cutoff: int) -> np.ndarray:
    if nbar < 0:
        raise ValueError("thermal occupation must be non-negative")
    if nbar == 0:
        p = np.zeros(cutoff + 1)
        p[0] = 1.0
        return p
    levels = np.arange(cutoff + 1)
    return np.exp(levels * np.log(nbar) - (levels + 1) * np.log1p(nbar))


def _per_mode(value, n_modes: int, name: str):
    if isinstance(value, (list, tuple, np.ndarray)):
        if len(value) != n_modes:
            raise ValueError(f"{name} has {len(value)} entries for {n_modes} modes")
        return list(value)
    return [value] * n_modes


def _check_finite(**params):
    for name, value in params.items():
        for v in np.atleast_1d(np.asarray(value, dtype=complex)):
            if not np.isfinite(v):
                raise ValueError(f"parameter {name} is not finite: {value!r}")


def _finish(data: np.ndarray, n_modes: int, cutoff: int, tail_tol, label: str) -> FockState:
    data = np.asarray(data, dtype=complex)
    if data.ndim == 1:
        norm = np.sqrt(np.vdot(data, data).real)
        data = data / norm
        data = data / np.sqrt(np.vdot(data, data).real)
    else:
        data = 0.5 * (data + data.conj().T)
        data = data / np.trace(data).real
    pops = (np.abs(data) ** 2 if data.ndim == 1 else np.real(np.diag(data)))
    tail = float(tail_occupancy(pops.reshape((cutoff + 1,) * n_modes)).max())
    if tail_tol is not None and tail > tail_tol:
        raise TruncationError(
            f"{label}: top-level occupancy {tail:.3g} exceeds tolerance {tail_tol:.3g}; "
            "raise the cutoff or pass tail_tol=None"
        )
    return FockState(n_modes=n_modes, cutoff=cutoff, data=data, tail=tail, label=label)


def make_state(
    kind: str,
    cutoff: int = DEFAULT_CUTOFF,
    n_modes: int = 1,
    *,
    tail_tol: float | None = DEFAULT_TAIL_TOL,
    **params,
) -> FockState:
    """Build a normalized state from the state zoo.

    Single-mode kinds (``vacuum``, ``fock``, ``coherent``, ``squeezed``,
    ``thermal``) on several modes form a product state; each parameter may be
    a scalar (shared) or a sequence with one entry per mode.
    ``two_mode_squeezed`` requires ``n_modes == 2``.

    Parameters: ``fock(n)``, ``coherent(alpha)``, ``squeezed(r, theta=0)``,
    ``thermal(nbar)``, ``two_mode_squeezed(r, theta=0)``.

    States whose top Fock level holds more than ``tail_tol`` probability are
    rejected; pass ``tail_tol=None`` to accept them anyway.
    """
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if kind not in STATE_KINDS:
        raise ValueError(f"unknown state kind {kind!r}; expected one of {STATE_KINDS}")
    _check_finite(**params)
    label = kind + ("(" + ", ".join(f"{k}={v}" for k, v in params.items()) + ")" if params else "")

    if kind == "two_mode_squeezed":
        if n_modes != 2:
            raise ValueError("two_mode_squeezed needs n_modes=2")
        r = float(params["r"])
        theta = float(params.get("theta", 0.0))
        d = cutoff + 1
        levels = np.arange(d)
        amp = np.tanh(abs(r)) ** levels * np.exp(1j * theta * levels) / np.cosh(r)
        psi = np.zeros(d * d, dtype=complex)
        psi[levels * d + levels] = amp
        return _finish(psi, 2, cutoff, tail_tol, label)

    if kind == "thermal":
        pops = [_thermal_populations(float(nb), cutoff) for nb in _per_mode(params["nbar"], n_modes, "nbar")]
        diag = reduce(np.kron, pops)
        return _finish(np.diag(diag).astype(complex), n_modes, cutoff, tail_tol, label)

    if kind == "vacuum":
        vecs = [_fock_vector(0, cutoff)] * n_modes
    elif kind == "fock":
        vecs = [_fock_vector(n, cutoff) for n in _per_mode(params["n"], n_modes, "n")]
    elif kind == "coherent":
        vecs = [_coherent_vector(a, cutoff) for a in _per_mode(params["alpha"], n_modes, "alpha")]
    else:
        rs = _per_mode(params["r"], n_modes, "r")
        thetas = _per_mode(params.get("theta", 0.0), n_modes, "theta")
        vecs = [_squeezed_vector(float(r), float(t), cutoff) for r, t in zip(rs, thetas)]
    return _finish(reduce(np.kron, vecs), n_modes, cutoff, tail_tol, label)


def tensor(*states: FockState, tail_tol: float | None = None) -> FockState:
    """Product of states sharing one cutoff."""
    if not states:
        raise ValueError("need at least one state")
    cutoff = states[0].cutoff
    if any(s.cutoff != cutoff for s in states):
        raise ValueError("all factors must share the same cutoff")
    n_modes = sum(s.n_modes for s in states)
    label = " x ".join(s.label for s in states)
    if all(s.is_pure for s in states):
        data = reduce(np.kron, [s.data for s in states])
    else:
        data = reduce(np.kron, [s.density() for s in states])
    return _finish(data, n_modes, cutoff, tail_tol, label)


def dephase(state: FockState) -> FockState:
    """Average ``state`` over a uniform global phase rotation ``exp(-i phi N)``.

    Keeps only coherences between basis states with equal total photon
    number. The result is a density matrix.
    """
    total = total_number(state.cutoff, state.n_modes)
    rho = state.density() * (total[:, None] == total[None, :])
    return FockState(n_modes=state.n_modes, cutoff=state.cutoff, data=rho, tail=state.tail, label=state.label)
