"""Moment reconstruction: from sampled sum-field statistics to two-time correlations.

Pipeline:

1. :func:`estimate_moments` turns sample batches into ``<F^n>`` estimates per
   ``(q, dphi)`` setting, with bootstrap covariances.
2. :func:`invert_q_system` solves, for every order ``n`` and phase difference,
   ``<F^n>(q) = sum_k C(n, k) q^k <F_1^(n-k) F_2^k>`` over the ``q`` grid.
3. :func:`decontaminate` removes the detection-efficiency contamination order
   by order.
4. :func:`extract_physics` fits harmonics in ``dphi`` and maps them to photon
   numbers, coherences and the photon-number correlation.

Every stage is linear in the measured moments, so errors are propagated with
full covariance matrices; only the moment stage uses the bootstrap.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from math import comb

import numpy as np

from .efficiency import contamination_terms
from .measurement import SampleBatch
from .oracle import order_keys, table_keys

MAX_MOMENT_ORDER = 6
DEFAULT_BOOTSTRAP = 200
DEFAULT_GROUPS = 1000
COND_WARN = 1e10
ALIAS_SIGMA = 5.0
UNPHYSICAL_FLOOR = 1e-12


class IllConditionedWarning(UserWarning):
    pass


class AliasingWarning(UserWarning):
    pass


class IncompleteGridError(ValueError):
    pass


def chebyshev_q_grid(count: int, lo: float = 0.0, hi: float = 2.0) -> np.ndarray:
    """``count`` Chebyshev extreme points mapped onto ``[lo, hi]``, ascending."""
    if count < 1:
        raise ValueError("need at least one q value")
    if count == 1:
        return np.array([(lo + hi) / 2])
    x = -np.cos(np.pi * np.arange(count) / (count - 1))
    x[np.abs(x) < 1e-15] = 0.0
    return lo + (hi - lo) * (x + 1) / 2


def dphi_grid(count: int = 8) -> np.ndarray:
    return 2 * np.pi * np.arange(count) / count


def _setting_key(q: float, dphi: float, phi: float) -> tuple[float, float, float]:
    return (round(float(q), 12), round(float(np.mod(dphi, 2 * np.pi)), 12), round(float(phi), 12))


# -- moment estimation -------------------------------------------------------

@dataclass(frozen=True)
class MomentEstimate:
    """``<F^n>`` for ``n = 1..n_max`` at one setting."""

    q: float
    dphi: float
    phi: float
    shots: int
    values: np.ndarray
    cov: np.ndarray = field(repr=False)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    def moment(self, n: int) -> float:
        return float(self.values[n - 1])


@dataclass(frozen=True)
class MomentTable:
    entries: tuple[MomentEstimate, ...]
    n_max: int
    phase_mode: str
    eta: float

    @property
    def qs(self) -> np.ndarray:
        return np.unique([e.q for e in self.entries])

    @property
    def dphis(self) -> np.ndarray:
        return np.unique([round(float(np.mod(e.dphi, 2 * np.pi)), 12) for e in self.entries])

    def lookup(self, q: float, dphi: float, phi: float | None = None) -> MomentEstimate:
        for e in self.entries:
            if abs(e.q - q) < 1e-12 and _same_phase(e.dphi, dphi) and (phi is None or _same_phase(e.phi, phi)):
                return e
        raise KeyError(f"no moments recorded at q={q}, dphi={dphi}")


def _same_phase(a: float, b: float, tol: float = 1e-9) -> bool:
    d = np.mod(a - b, 2 * np.pi)
    return bool(min(d, 2 * np.pi - d) < tol)


def _bootstrap_cov(x: np.ndarray, n_max: int, n_boot: int, n_groups: int, rng) -> tuple[np.ndarray, np.ndarray]:
    powers = np.empty((len(x), n_max))
    powers[:, 0] = x
    for k in range(1, n_max):
        np.multiply(powers[:, k - 1], x, out=powers[:, k])
    means = powers.mean(axis=0)
    if n_boot < 2:
        return means, np.zeros((n_max, n_max))
    # resample contiguous groups; groups of one sample reduce to the plain bootstrap
    groups = min(n_groups, len(x))
    edges = np.linspace(0, len(x), groups + 1).astype(int)
    sums = np.add.reduceat(powers, edges[:-1], axis=0)
    counts = np.diff(edges).astype(float)
    idx = rng.integers(0, groups, size=(n_boot, groups))
    reps = sums[idx].sum(axis=1) / counts[idx].sum(axis=1)[:, None]
    cov = np.atleast_2d(np.cov(reps, rowvar=False, ddof=1))
    return means, cov


def estimate_moments(
    batches,
    n_max: int = 4,
    n_boot: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
    n_groups: int = DEFAULT_GROUPS,
) -> MomentTable:
    """Empirical ``<F^n>`` per setting with bootstrap covariance across orders.

    Batches sharing ``(q, dphi, phi)`` are pooled. Bootstrap replicates are
    drawn over ``n_groups`` contiguous groups of samples, from a stream keyed
    by ``(seed, setting index)``.
    """
    batches = list(batches)
    if not batches:
        raise ValueError("no sample batches given")
    if not 1 <= n_max <= MAX_MOMENT_ORDER:
        raise ValueError(f"n_max must be between 1 and {MAX_MOMENT_ORDER}")
    modes = {b.setting.phase_mode for b in batches}
    if len(modes) != 1:
        raise ValueError(f"batches mix phase modes {sorted(modes)}")
    (mode,) = modes
    if mode == "averaged" and n_max % 2:
        raise ValueError("phase-averaged tables need an even n_max")
    etas = {b.setting.eta for b in batches}
    if len(etas) != 1:
        raise ValueError(f"batches mix detection efficiencies {sorted(etas)}")

    pooled: dict[tuple, list[SampleBatch]] = {}
    for b in batches:
        if len(b.outcomes) == 0:
            raise ValueError("empty sample batch")
        s = b.setting
        pooled.setdefault(_setting_key(s.q, s.dphi, s.phi), []).append(b)

    entries = []
    for index, key in enumerate(sorted(pooled)):
        group = pooled[key]
        x = np.concatenate([b.outcomes for b in group])
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), index]))
        means, cov = _bootstrap_cov(x, n_max, n_boot, n_groups, rng)
        s = group[0].setting
        entries.append(MomentEstimate(q=s.q, dphi=float(np.mod(s.dphi, 2 * np.pi)), phi=s.phi,
                                      shots=len(x), values=means, cov=cov))
    return MomentTable(entries=tuple(entries), n_max=n_max, phase_mode=mode, eta=etas.pop())


def synthesize_table(corr: dict, qs, dphis, n_max: int, phase_mode: str = "averaged",
                     eta: float = 1.0, phi: float = 0.0) -> MomentTable:
    """Exact (zero-error) moment table from correlations via the ``q`` expansion.

    ``corr`` maps exponent pairs to arrays over ``dphis``. Odd orders are
    zero in phase-averaged mode.
    """
    dphis = np.atleast_1d(np.asarray(dphis, dtype=float))
    entries = []
    for q in qs:
        for d, dphi in enumerate(dphis):
            vals = np.zeros(n_max)
            for n in range(1, n_max + 1):
                if phase_mode == "averaged" and n % 2:
                    continue
                vals[n - 1] = sum(comb(n, k) * q**k * np.asarray(corr[(n - k, k)])[d] for k in range(n + 1))
            entries.append(MomentEstimate(q=float(q), dphi=float(dphi), phi=phi, shots=0,
                                          values=vals, cov=np.zeros((n_max, n_max))))
    return MomentTable(tuple(entries), n_max, phase_mode, eta)


def forward_moments(corr: dict, qs, n: int):
    """``<F^n>`` at each ``q`` from correlations of order ``n``."""
    qs = np.asarray(qs, dtype=float)
    return sum(comb(n, k) * np.multiply.outer(qs**k, np.asarray(corr[(n - k, k)])) for k in range(n + 1))


# -- q inversion -------------------------------------------------------------

def q_matrix(qs, n: int) -> np.ndarray:
    qs = np.asarray(qs, dtype=float)
    return np.array([[comb(n, k) * q**k for k in range(n + 1)] for q in qs])


def solve_q_system(qs, moments, n: int) -> tuple[np.ndarray, float]:
    """Solve for ``<F_1^(n-k) F_2^k>``, ``k = 0..n``, from ``<F^n>`` at each ``q``.

    With more than ``n + 1`` values of ``q`` the least-squares solution is
    returned. Also returns the condition number of the system matrix.
    """
    qs = np.asarray(qs, dtype=float)
    if len(np.unique(qs)) != len(qs):
        raise np.linalg.LinAlgError("repeated q values make the system singular")
    if len(qs) < n + 1:
        raise IncompleteGridError(f"order {n} needs {n + 1} distinct q values, got {len(qs)}")
    V = q_matrix(qs, n)
    cond = float(np.linalg.cond(V))
    if cond > COND_WARN:
        warnings.warn(f"q system of order {n} has condition number {cond:.3g}", IllConditionedWarning)
    if len(qs) == n + 1:
        return np.linalg.solve(V, np.asarray(moments)), cond
    return np.linalg.lstsq(V, np.asarray(moments), rcond=None)[0], cond


@dataclass(frozen=True)
class CorrelationSet:
    """Mixed correlations ``<F_1^p1 F_2^p2>`` over a ``dphi`` grid.

    ``values[d, k]`` belongs to ``dphis[d]`` and ``keys[k]``; ``cov[d]`` is
    the covariance across keys at that phase difference (different phase
    differences are statistically independent).
    """

    dphis: np.ndarray
    keys: tuple[tuple[int, int], ...]
    values: np.ndarray
    cov: np.ndarray = field(repr=False)
    status: str = "contaminated"
    eta: float = 1.0
    phase_mode: str = "averaged"
    phi: float = 0.0
    cond: dict = field(default_factory=dict)

    def index(self, key) -> int:
        return self.keys.index(tuple(key))

    def channel(self, key) -> np.ndarray:
        return self.values[:, self.index(key)]

    def channel_se(self, key) -> np.ndarray:
        k = self.index(key)
        return np.sqrt(np.clip(self.cov[:, k, k], 0.0, None))

    def as_dict(self) -> dict:
        return {key: self.values[:, k].copy() for k, key in enumerate(self.keys)}

    @property
    def n_max(self) -> int:
        return max(sum(k) for k in self.keys)


def invert_q_system(table: MomentTable, n_max: int | None = None) -> CorrelationSet:
    """Reconstruct (still contaminated) correlations at every ``dphi`` of ``table``."""
    n_max = table.n_max if n_max is None else n_max
    if n_max > table.n_max:
        raise IncompleteGridError(f"table only holds orders up to {table.n_max}")
    averaged = table.phase_mode == "averaged"
    keys = tuple(table_keys(n_max, averaged))
    orders = sorted({sum(k) for k in keys})
    qs, dphis = table.qs, table.dphis
    phis = {round(e.phi, 12) for e in table.entries}
    if len(phis) != 1 and not averaged:
        raise ValueError("locked-phase tables must share one global phase")

    nm = table.n_max
    blocks = {}
    cond = {}
    for n in orders:
        if len(qs) < n + 1:
            raise IncompleteGridError(f"order {n} needs {n + 1} distinct q values, got {len(qs)}")
        V = q_matrix(qs, n)
        cond[n] = float(np.linalg.cond(V))
        if cond[n] > COND_WARN:
            warnings.warn(f"q system of order {n} has condition number {cond[n]:.3g}", IllConditionedWarning)
        blocks[n] = np.linalg.pinv(V)

    values = np.zeros((len(dphis), len(keys)))
    cov = np.zeros((len(dphis), len(keys), len(keys)))
    for d, dphi in enumerate(dphis):
        try:
            ests = [table.lookup(q, dphi) for q in qs]
        except KeyError as exc:
            raise IncompleteGridError(str(exc)) from None
        raw = np.concatenate([e.values for e in ests])
        raw_cov = np.zeros((len(raw), len(raw)))
        for i, e in enumerate(ests):
            raw_cov[i * nm:(i + 1) * nm, i * nm:(i + 1) * nm] = e.cov
        A = np.zeros((len(keys), len(raw)))
        for n in orders:
            rows = [keys.index(k) for k in order_keys(n)]
            cols = [i * nm + n - 1 for i in range(len(qs))]
            A[np.ix_(rows, cols)] = blocks[n]
        values[d] = A @ raw
        cov[d] = A @ raw_cov @ A.T
    phi = table.entries[0].phi if not averaged else 0.0
    return CorrelationSet(dphis=dphis, keys=keys, values=values, cov=cov, status="contaminated",
                          eta=table.eta, phase_mode=table.phase_mode, phi=phi, cond=cond)


# -- efficiency correction ---------------------------------------------------

def _sort_keys(keys):
    return sorted(keys, key=lambda k: (k[0] + k[1], k[1]))


def _decontaminate_affine(measured: dict, eta: float, one):
    corrected = {(0, 0): one}
    for key in _sort_keys(measured):
        i, j = key
        acc = measured[key]
        lead = None
        for (l, m), c in contamination_terms(i, j, float(eta)):
            if (l, m) == (i, j):
                lead = c
            elif (l, m) in corrected:
                acc = acc - c * corrected[(l, m)]
            else:
                raise KeyError(f"entry {(l, m)} needed to correct {key} is missing")
        corrected[key] = acc / lead
    del corrected[(0, 0)]
    return corrected


def decontaminate(corr, eta: float):
    """Undo the efficiency map recursively, lowest orders first.

    Each measured correlation is corrected by subtracting the contamination
    built from already-corrected lower orders and dividing by
    ``eta**order``. Accepts a :class:`CorrelationSet` (errors propagated) or
    a plain mapping of exponent pairs to values.
    """
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta!r}")
    if not isinstance(corr, CorrelationSet):
        measured = {k: np.asarray(v, dtype=float) for k, v in corr.items()}
        out = _decontaminate_affine(measured, eta, 1.0)
        return {k: (v if np.ndim(corr[k]) else float(v)) for k, v in out.items()}

    if corr.status == "corrected":
        raise ValueError("correlation set is already corrected")
    K = len(corr.keys)
    # affine form over [1, measured_0, ..., measured_{K-1}]
    basis = np.eye(K + 1)
    affine = _decontaminate_affine({k: basis[i + 1] for i, k in enumerate(corr.keys)}, eta, basis[0])
    T = np.array([affine[k] for k in corr.keys])
    offset, J = T[:, 0], T[:, 1:]
    values = corr.values @ J.T + offset
    cov = np.einsum("ab,dbc,ec->dae", J, corr.cov, J)
    return replace(corr, values=values, cov=cov, status="corrected", eta=eta)


def contaminate_set(corr: CorrelationSet, eta: float) -> CorrelationSet:
    """Forward efficiency map applied to a correlation set (values only)."""
    from .oracle import contaminate

    out = contaminate(corr.as_dict(), eta)
    values = np.stack([out[k] for k in corr.keys], axis=1)
    return replace(corr, values=values, status="contaminated", eta=eta)


# -- physics extraction ------------------------------------------------------

HARMONICS = ("dc", "cos1", "sin1", "cos2", "sin2")


def harmonic_design(dphis) -> np.ndarray:
    d = np.asarray(dphis, dtype=float)
    return np.stack([np.ones_like(d), np.cos(d), np.sin(d), np.cos(2 * d), np.sin(2 * d)], axis=1)


def fit_harmonics(dphis, y) -> np.ndarray:
    """Least-squares coefficients on ``1, cos, sin, cos 2x, sin 2x``."""
    return np.linalg.lstsq(harmonic_design(dphis), np.asarray(y, dtype=float), rcond=None)[0]


@dataclass
class PhysicalQuantities:
    """Extracted two-time quantities with 1-sigma errors.

    Complex quantities are stored as ``name.re`` / ``name.im`` pairs.
    """

    values: dict
    errors: dict
    residuals: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    status: str = "corrected"

    def complex_value(self, name: str) -> complex:
        return complex(self.values[f"{name}.re"], self.values[f"{name}.im"])

    def z_scores(self, reference: dict) -> dict:
        out = {}
        for name, v in self.values.items():
            if name not in reference:
                continue
            diff = v - reference[name]
            se = self.errors[name]
            out[name] = 0.0 if diff == 0 else (diff / se if se > 0 else float(np.sign(diff) * np.inf))
        return out


def _quantity_weights(corr: CorrelationSet) -> dict[str, tuple[np.ndarray, float]]:
    P = np.linalg.pinv(harmonic_design(corr.dphis))
    M, K = len(corr.dphis), len(corr.keys)

    def coef(key, harmonic, w=1.0):
        W = np.zeros((M, K))
        W[:, corr.index(key)] = w * P[HARMONICS.index(harmonic)]
        return W

    q = {
        "n1": (coef((2, 0), "dc"), -0.5),
        "n2": (coef((0, 2), "dc"), -0.5),
        "coherence.re": (coef((1, 1), "cos1"), 0.0),
        "coherence.im": (coef((1, 1), "sin1"), 0.0),
    }
    if (2, 2) in corr.keys:
        # <F1^3 F2>: 3/2 <F1 F2> + 3/4 (T1 e^{-i dphi} + c.c.)
        q["third_order_1.re"] = (coef((3, 1), "cos1", 2 / 3) + coef((1, 1), "cos1", -1.0), 0.0)
        q["third_order_1.im"] = (coef((3, 1), "sin1", 2 / 3) + coef((1, 1), "sin1", -1.0), 0.0)
        # <F1 F2^3>: 3/2 <F1 F2> + 3/4 (T2 e^{+i dphi} + c.c.)
        q["third_order_2.re"] = (coef((1, 3), "cos1", 2 / 3) + coef((1, 1), "cos1", -1.0), 0.0)
        q["third_order_2.im"] = (coef((1, 3), "sin1", -2 / 3) + coef((1, 1), "sin1", 1.0), 0.0)
        q["pair_amplitude.re"] = (coef((2, 2), "cos2", 2.0), 0.0)
        q["pair_amplitude.im"] = (coef((2, 2), "sin2", 2.0), 0.0)
        q["n1n2"] = (coef((2, 2), "dc") + coef((2, 0), "dc", -0.5) + coef((0, 2), "dc", -0.5), 0.25)
    return q


def extract_physics(corr: CorrelationSet, min_points: int = 5) -> PhysicalQuantities:
    """Harmonic analysis in ``dphi`` of phase-averaged correlations.

    Photon numbers come from the DC parts of ``<F_k^2>``, the complex
    coherence ``<a1^dag a2>`` from the first harmonic of ``<F_1 F_2>``, the
    third-order amplitudes from the first harmonics of ``<F_1^3 F_2>`` and
    ``<F_1 F_2^3>`` after removing ``3/2 <F_1 F_2>``, the pair amplitude
    ``<a1^dag2 a2^2>`` from the second harmonic of ``<F_1^2 F_2^2>`` and
    ``<n1 n2>`` from its DC part.
    """
    if corr.phase_mode != "averaged":
        raise ValueError("harmonic extraction needs phase-averaged correlations")
    M = len(corr.dphis)
    if M < min_points:
        raise IncompleteGridError(f"a dphi grid of {M} points cannot resolve harmonics 0..2 (need {min_points})")
    if np.max(np.abs(np.diff(np.sort(corr.dphis), n=2)), initial=0.0) > 1e-9:
        warnings.warn("dphi grid is not uniform", UserWarning)

    values, errors = {}, {}
    for name, (W, const) in _quantity_weights(corr).items():
        values[name] = float(np.sum(W * corr.values) + const)
        var = np.einsum("da,dab,db->", W, corr.cov, W)
        errors[name] = float(np.sqrt(max(var, 0.0)))

    residuals, flags = {}, []
    X = harmonic_design(corr.dphis)
    for key in corr.keys:
        y = corr.channel(key)
        r = y - X @ fit_harmonics(corr.dphis, y)
        se = corr.channel_se(key)
        scaled = np.abs(r) / np.where(se > 0, se, np.inf)
        residuals[f"{key[0]},{key[1]}"] = float(scaled.max())
        if M > len(HARMONICS) and scaled.max() > ALIAS_SIGMA:
            flags.append(f"aliasing:{key[0]},{key[1]}")
            warnings.warn(f"channel {key}: fit residual {scaled.max():.2f} SE suggests aliasing", AliasingWarning)
    for name in ("n1", "n2", "n1n2"):
        # the absolute floor keeps exact (zero-error) inputs from tripping on roundoff
        if name in values and values[name] < -3 * errors[name] - UNPHYSICAL_FLOOR:
            flags.append(f"unphysical:{name}")
    return PhysicalQuantities(values=values, errors=errors, residuals=residuals, flags=flags, status=corr.status)


def double_slit_difference(a: MomentEstimate, b: MomentEstimate, eta: float = 1.0) -> tuple[float, float]:
    """Cross term ``<F_1 F_2>`` at ``a.dphi`` from ``q = 1`` data at ``dphi`` and ``dphi + pi``.

    Returns ``((<F^2>_a - <F^2>_b) / 4 / eta^2, error)``. Constant noise
    offsets cancel in the difference; only the ``eta^2`` attenuation remains.
    """
    for e in (a, b):
        if abs(e.q - 1.0) > 1e-12:
            raise ValueError(f"double-slit difference needs q = 1, got q = {e.q}")
    if not _same_phase(b.dphi, a.dphi + np.pi):
        raise ValueError("second table must sit at dphi + pi")
    val = (a.moment(2) - b.moment(2)) / 4 / eta**2
    se = np.hypot(a.se[1], b.se[1]) / 4 / eta**2
    return float(val), float(se)

