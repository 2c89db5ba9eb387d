"""Coefficients of the detection-efficiency contamination map.

With imperfect detection the measured correlation of exponents ``(i, j)``
(power ``i`` of ``F_1``, power ``j`` of ``F_2``) is a combination of ideal
correlations ``(l, m)`` with ``l <= i``, ``m <= j`` and matching parities,
weighted by vacuum noise moments.
"""
from __future__ import annotations

from functools import lru_cache
from math import comb, prod


def double_factorial(n: int) -> int:
    """``n!!`` with the convention ``(-1)!! = 0!! = 1``."""
    if n < -1:
        raise ValueError(f"double factorial undefined for {n}")
    return prod(range(n, 0, -2)) if n > 0 else 1


def vacuum_moment(m: int) -> float:
    """``<F^m>`` for a vacuum mode: ``2^(-m/2) (m-1)!!`` for even ``m``, else 0."""
    if m % 2:
        return 0.0
    return 2.0 ** (-m / 2) * double_factorial(m - 1)


@lru_cache(maxsize=None)
def contamination_terms(i: int, j: int, eta: float) -> tuple[tuple[tuple[int, int], float], ...]:
    """Pairs ``((l, m), coefficient)`` expressing measured ``(i, j)`` in ideal terms.

    The leading term ``(i, j)`` has coefficient ``eta**(i+j)``. The ``(0, 0)``
    entry, when present, multiplies the constant 1.
    """
    n = i + j
    terms = []
    for l in range(i % 2, i + 1, 2):
        for m in range(j % 2, j + 1, 2):
            coef = (
                comb(i, l)
                * comb(j, m)
                * eta ** ((n + l + m) / 2)
                * ((1 - eta) / 2) ** ((n - l - m) / 2)
                * double_factorial(i - l - 1)
                * double_factorial(j - m - 1)
            )
            if coef != 0.0:
                terms.append(((l, m), coef))
    return tuple(terms)
