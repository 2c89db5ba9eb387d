"""Experiment configuration file (JSON, ``schema_version`` 1).

Example::

    {
      "schema_version": 1,
      "state": {"modes": [{"kind": "coherent", "alpha": 1},
                          {"kind": "coherent", "alpha": "1j"}],
                "cutoff": 16},
      "eta": 0.7,
      "phase_mode": "averaged",
      "n_max": 4,
      "q_grid": null,
      "dphi_grid": null,
      "shots": 1000000,
      "seed": 1
    }

``state`` is either a single zoo entry spanning both modes (``{"kind":
"two_mode_squeezed", "r": 0.5}``) or a ``modes`` list with one single-mode
entry per mode. Complex parameters may be numbers or strings such as
``"0.5+1j"``. A ``null`` grid selects the default: ``n_max + 1`` Chebyshev
points on ``[0, 2]`` for ``q`` and 8 uniform points for ``dphi``.

``train`` optionally describes the LO pulses::

    {"omega0": 6.28, "pulses": [{"center": 0, "width": 1}, {"center": 10, "width": 1}],
     "amplitudes": [[1.0, 0.0], [1.0, 0.0]]}

with amplitudes as ``[magnitude, phase]`` pairs.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .fock import DEFAULT_CUTOFF, DEFAULT_TAIL_TOL, FockState, make_state, tensor
from .measurement import DEFAULT_BATCH_SIZE, PHASE_MODES
from .moments import DEFAULT_BOOTSTRAP, DEFAULT_GROUPS, chebyshev_q_grid, dphi_grid
from .pulses import LOTrain, PulseEnvelope

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def _complex(v):
    if isinstance(v, (list, tuple)):
        return [_complex(x) for x in v]
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    return v


def build_state(spec: dict) -> FockState:
    """Construct the two-mode signal state described by a config ``state`` entry."""
    spec = dict(spec)
    cutoff = int(spec.pop("cutoff", DEFAULT_CUTOFF))
    tail_tol = spec.pop("tail_tol", DEFAULT_TAIL_TOL)
    if "modes" in spec:
        modes = spec.pop("modes")
        if spec:
            raise ConfigError(f"unexpected state keys next to 'modes': {sorted(spec)}")
        if len(modes) != 2:
            raise ConfigError("the two-pulse scheme needs exactly two modes")
        factors = []
        for m in modes:
            m = dict(m)
            kind = m.pop("kind")
            factors.append(make_state(kind, cutoff, 1, tail_tol=tail_tol, **{k: _complex(v) for k, v in m.items()}))
        return tensor(*factors, tail_tol=tail_tol)
    kind = spec.pop("kind")
    return make_state(kind, cutoff, 2, tail_tol=tail_tol, **{k: _complex(v) for k, v in spec.items()})


def build_train(spec: dict | None) -> LOTrain | None:
    if spec is None:
        return None
    omega0 = float(spec.get("omega0", 0.0))
    pulses = [PulseEnvelope(float(p["center"]), float(p["width"]), omega0, p.get("shape", "gaussian"))
              for p in spec["pulses"]]
    mags, phases = zip(*spec["amplitudes"]) if spec.get("amplitudes") else ([1.0] * len(pulses), [0.0] * len(pulses))
    return LOTrain.from_polar(pulses, mags, phases)


@dataclass
class ExperimentConfig:
    state: dict
    eta: float = 1.0
    phase_mode: str = "averaged"
    phi: float = 0.0
    n_max: int = 4
    q_grid: list | None = None
    dphi_grid: list | None = None
    shots: int = 100_000
    batch_size: int = DEFAULT_BATCH_SIZE
    seed: int = 0
    bootstrap: dict = field(default_factory=lambda: {"n_boot": DEFAULT_BOOTSTRAP, "seed": 0, "groups": DEFAULT_GROUPS})
    train: dict | None = None
    overlap_tol: float = 1e-4
    override_overlap_check: bool = False
    output_dir: str = "out"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.phase_mode not in PHASE_MODES:
            raise ConfigError(f"phase_mode must be one of {PHASE_MODES}")
        if not 0 < self.eta <= 1:
            raise ConfigError("eta must lie in (0, 1]")
        if self.n_max < 1 or (self.phase_mode == "averaged" and self.n_max % 2):
            raise ConfigError("n_max must be positive, and even for phase-averaged runs")
        if self.shots < 1:
            raise ConfigError("shots must be positive")
        for name in ("q_grid", "dphi_grid"):
            grid = getattr(self, name)
            if grid is not None and len(grid) == 0:
                raise ConfigError(f"{name} must not be empty")

    @property
    def qs(self) -> np.ndarray:
        if self.q_grid is not None:
            return np.asarray(self.q_grid, dtype=float)
        return chebyshev_q_grid(self.n_max + 1)

    @property
    def dphis(self) -> np.ndarray:
        if self.dphi_grid is not None:
            return np.asarray(self.dphi_grid, dtype=float)
        return dphi_grid(8)

    @property
    def seeds(self) -> dict:
        return {"sampling": self.seed, "bootstrap": self.bootstrap.get("seed", 0)}

    def build_state(self) -> FockState:
        return build_state(self.state)

    def build_train(self) -> LOTrain | None:
        return build_train(self.train)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "state" not in d:
            raise ConfigError("config needs a 'state' entry")
        return cls(**d)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        """Read a config file, or the config embedded in a run manifest."""
        doc = json.loads(Path(path).read_text())
        if "files" in doc and "config" in doc:
            doc = doc["config"]
        return cls.from_dict(doc)

    def hash(self) -> str:
        """SHA-256 of the canonical config, ignoring where outputs are written."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)
