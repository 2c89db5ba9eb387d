"""Exact moments and correlations by operator algebra on truncated Fock space.

These values are the ground truth the sampled reconstruction is judged
against. Phase averaging uses a uniform grid of ``n + 2`` phases, which
integrates trigonometric polynomials of degree ``<= n`` exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .efficiency import contamination_terms
from .fock import (
    DEFAULT_CUTOFF,
    FockState,
    expect,
    mode_annihilation,
    mode_number,
    quadrature,
)

MAX_ORDER_AT_DEFAULT_CUTOFF = 6


class OrderTooHighError(ValueError):
    """Requested moment order is not trustworthy at this cutoff."""


def max_order(cutoff: int) -> int:
    """Highest moment order trusted at ``cutoff`` (6 at the default cutoff 16)."""
    if cutoff <= DEFAULT_CUTOFF:
        return MAX_ORDER_AT_DEFAULT_CUTOFF
    return MAX_ORDER_AT_DEFAULT_CUTOFF * cutoff // DEFAULT_CUTOFF


@dataclass(frozen=True)
class MomentSpec:
    """``<F_1^p1(phi) F_2^p2(phi + dphi)>``, optionally phase-averaged and lossy."""

    p1: int
    p2: int
    phi: float = 0.0
    dphi: float = 0.0
    phase_averaged: bool = True
    eta: float = 1.0

    def __post_init__(self):
        if self.p1 < 0 or self.p2 < 0 or self.p1 + self.p2 < 1:
            raise ValueError("exponents must be non-negative with order n >= 1")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")

    @property
    def order(self) -> int:
        return self.p1 + self.p2


def order_keys(n: int) -> list[tuple[int, int]]:
    """Exponent pairs ``(n - k, k)`` for ``k = 0..n``."""
    return [(n - k, k) for k in range(n + 1)]


def table_keys(n_max: int, phase_averaged: bool = True) -> list[tuple[int, int]]:
    orders = range(2, n_max + 1, 2) if phase_averaged else range(1, n_max + 1)
    return [key for n in orders for key in order_keys(n)]


def _moments_at(state: FockState, phi: float, dphi: float, keys) -> dict[tuple[int, int], float]:
    """Unaveraged ``<F_1^p1(phi) F_2^p2(phi + dphi)>`` for each key."""
    c = state.cutoff
    top1 = max(k[0] for k in keys)
    top2 = max(k[1] for k in keys)
    F1, F2 = quadrature(0, phi, c, 2), quadrature(1, phi + dphi, c, 2)
    out = {}
    if state.is_pure:
        # <psi| F1^p1 F2^p2 |psi> = <F1^p1 psi | F2^p2 psi> since F1 is Hermitian
        left, right = [state.data], [state.data]
        for _ in range(top1):
            left.append(F1 @ left[-1])
        for _ in range(top2):
            right.append(F2 @ right[-1])
        for p1, p2 in keys:
            out[(p1, p2)] = complex(np.vdot(left[p1], right[p2]))
    else:
        pow1 = [np.eye(state.dim, dtype=complex)]
        for _ in range(top1):
            pow1.append(pow1[-1] @ F1)
        right = [state.data]
        for _ in range(top2):
            right.append(F2 @ right[-1])
        for p1, p2 in keys:
            out[(p1, p2)] = complex(np.einsum("ij,ji->", pow1[p1], right[p2]))
    for key, v in out.items():
        # F1 and F2 commute, so the product is Hermitian
        if abs(v.imag) > 1e-10:
            raise ArithmeticError(f"correlation {key} has imaginary part {v.imag!r}")
        out[key] = v.real
    return out


def _ideal_moments(state: FockState, keys, phi: float, dphi: float, averaged: bool) -> dict:
    keys = list(keys)
    n_top = max(sum(k) for k in keys)
    if not averaged:
        return _moments_at(state, phi, dphi, keys)
    m = n_top + 2
    acc = dict.fromkeys(keys, 0.0)
    for j in range(m):
        for key, v in _moments_at(state, phi + 2 * np.pi * j / m, dphi, keys).items():
            acc[key] += v / m
    # odd total order vanishes exactly under phase averaging
    return {k: (0.0 if sum(k) % 2 else v) for k, v in acc.items()}


def _ideal_moment(state: FockState, p1: int, p2: int, phi: float, dphi: float, averaged: bool) -> float:
    if p1 + p2 == 0:
        return 1.0
    return _ideal_moments(state, [(p1, p2)], phi, dphi, averaged)[(p1, p2)]


def _check(state: FockState, n: int):
    if state.n_modes != 2:
        raise ValueError("correlations are defined for two-mode states")
    if n > max_order(state.cutoff):
        raise OrderTooHighError(f"order {n} exceeds the cap {max_order(state.cutoff)} at cutoff {state.cutoff}")


def exact_moment(state: FockState, spec: MomentSpec) -> float:
    """Exact ``<F_1^p1 F_2^p2>`` for ``state``; with ``eta < 1`` the lossy value."""
    _check(state, spec.order)
    if spec.eta == 1.0:
        return _ideal_moment(state, spec.p1, spec.p2, spec.phi, spec.dphi, spec.phase_averaged)
    return float(
        sum(
            c * _ideal_moment(state, l, m, spec.phi, spec.dphi, spec.phase_averaged)
            for (l, m), c in contamination_terms(spec.p1, spec.p2, float(spec.eta))
        )
    )


def exact_table(
    state: FockState,
    dphis,
    n_max: int = 4,
    phase_averaged: bool = True,
    phi: float = 0.0,
) -> dict[tuple[int, int], np.ndarray]:
    """Ideal correlations for every key up to ``n_max``, as arrays over ``dphis``."""
    _check(state, n_max)
    dphis = np.atleast_1d(np.asarray(dphis, dtype=float))
    keys = table_keys(n_max, phase_averaged)
    rows = [_ideal_moments(state, keys, phi, d, phase_averaged) for d in dphis]
    return {key: np.array([row[key] for row in rows]) for key in keys}


def contaminate(table: dict, eta: float, n_max: int | None = None) -> dict:
    """Forward efficiency map: ideal correlations to what detection at ``eta`` sees.

    ``table`` maps exponent pairs to values (scalars or arrays over a phase
    grid). Every key needs all its parity-compatible lower-order keys.
    """
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    out = {}
    for (i, j), val in table.items():
        if n_max is not None and i + j > n_max:
            continue
        acc = np.zeros_like(np.asarray(val, dtype=float))
        for (l, m), c in contamination_terms(i, j, float(eta)):
            if (l, m) == (0, 0):
                acc = acc + c
            elif (l, m) in table:
                acc = acc + c * np.asarray(table[(l, m)], dtype=float)
            else:
                raise KeyError(f"entry {(l, m)} needed to contaminate {(i, j)} is missing")
        out[(i, j)] = acc if np.ndim(val) else float(acc)
    return out


def exact_physics(state: FockState) -> dict[str, float]:
    """Physical two-time quantities by direct operator expectation."""
    c, d = state.cutoff, 2
    a1, a2 = mode_annihilation(0, c, d), mode_annihilation(1, c, d)
    n1, n2 = mode_number(0, c, d), mode_number(1, c, d)
    a1d, a2d = a1.conj().T, a2.conj().T
    vals = {
        "n1": expect(state, n1),
        "n2": expect(state, n2),
        "coherence": expect(state, a1d @ a2),
        "third_order_1": expect(state, a1d @ a1d @ a1 @ a2),
        "third_order_2": expect(state, a2d @ a2d @ a2 @ a1),
        "pair_amplitude": expect(state, a1d @ a1d @ a2 @ a2),
        "n1n2": expect(state, n1 @ n2),
    }
    return flatten_complex(vals)


def flatten_complex(vals: dict) -> dict[str, float]:
    """Split complex-valued entries into ``name.re`` / ``name.im``."""
    out = {}
    for name, v in vals.items():
        if name in COMPLEX_QUANTITIES:
            v = complex(v)
            out[f"{name}.re"] = v.real
            out[f"{name}.im"] = v.imag
        else:
            out[name] = float(np.real(v))
    return out


COMPLEX_QUANTITIES = ("coherence", "third_order_1", "third_order_2", "pair_amplitude")
SECOND_ORDER_QUANTITIES = ("n1", "n2", "coherence.re", "coherence.im")
FOURTH_ORDER_QUANTITIES = (
    "third_order_1.re",
    "third_order_1.im",
    "third_order_2.re",
    "third_order_2.im",
    "pair_amplitude.re",
    "pair_amplitude.im",
    "n1n2",
)
