"""File formats: sample batches, moment tables, correlations, physics, manifests.

Batch CSV: ``#``-prefixed header lines carrying the serialized setting as
``# key: json-value``, then one outcome per line at full precision.
JSON outputs hold full-precision floats; CSV outputs are rounded to six
significant digits. Each output carries the config hash and seeds.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from pathlib import Path

import numpy as np

from .measurement import MeasurementSetting, SampleBatch
from .moments import CorrelationSet, MomentEstimate, MomentTable, PhysicalQuantities


class HashMismatchError(RuntimeError):
    """A file listed in a manifest differs from its recorded hash."""


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write(path, data: str | bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode) as fh:
        fh.write(data)
    os.replace(tmp, path)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _g6(x: float) -> str:
    return f"{x:.6g}"


def _csv_text(meta: dict, header: list[str], rows) -> str:
    buf = io.StringIO()
    for k in sorted(meta):
        buf.write(f"# {k}: {json.dumps(meta[k], sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# -- sample batches ----------------------------------------------------------

def batch_to_csv(batch: SampleBatch, meta: dict | None = None) -> str:
    header = dict(batch.setting.to_dict())
    header["partition"] = list(batch.partition)
    header.update(meta or {})
    lines = [f"# {k}: {json.dumps(header[k], sort_keys=True)}" for k in sorted(header)]
    lines.append("outcome")
    body = "\n".join(lines) + "\n"
    return body + "".join(f"{x!r}\n" for x in batch.outcomes.tolist())


def read_batch_csv(path) -> tuple[SampleBatch, dict]:
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = json.loads(value)
    # header comments plus the column title line
    outcomes = np.loadtxt(path, dtype=float, ndmin=1, skiprows=len(meta) + 1)
    setting_fields = {f for f in MeasurementSetting.__dataclass_fields__ if f != "train"}
    setting = MeasurementSetting(**{k: meta[k] for k in setting_fields if k in meta})
    return SampleBatch(setting, outcomes), meta


# -- moment tables -----------------------------------------------------------

def moments_to_json(table: MomentTable, meta: dict) -> dict:
    return {
        **meta,
        "n_max": table.n_max,
        "phase_mode": table.phase_mode,
        "eta": table.eta,
        "entries": [
            {"q": e.q, "dphi": e.dphi, "phi": e.phi, "shots": e.shots,
             "values": e.values.tolist(), "cov": e.cov.tolist()}
            for e in table.entries
        ],
    }


def moments_from_json(d: dict) -> MomentTable:
    entries = tuple(
        MomentEstimate(q=e["q"], dphi=e["dphi"], phi=e["phi"], shots=e["shots"],
                       values=np.array(e["values"]), cov=np.array(e["cov"]))
        for e in d["entries"]
    )
    return MomentTable(entries, d["n_max"], d["phase_mode"], d["eta"])


def moments_to_csv(table: MomentTable, meta: dict) -> str:
    header = ["q", "dphi"] + [f"m{n}" for n in range(1, table.n_max + 1)] + \
             [f"se{n}" for n in range(1, table.n_max + 1)] + ["shots"]
    rows = [[_g6(e.q), _g6(e.dphi)] + [_g6(v) for v in e.values] + [_g6(s) for s in e.se] + [e.shots]
            for e in table.entries]
    return _csv_text(meta, header, rows)


# -- correlations ------------------------------------------------------------

def _key(k) -> str:
    return f"{k[0]},{k[1]}"


def correlations_to_json(corr: CorrelationSet, meta: dict) -> dict:
    return {
        **meta,
        "status": corr.status,
        "eta": corr.eta,
        "phase_mode": corr.phase_mode,
        "phi": corr.phi,
        "dphis": corr.dphis.tolist(),
        "keys": [_key(k) for k in corr.keys],
        "values": corr.values.tolist(),
        "cov": corr.cov.tolist(),
        "condition_numbers": {str(n): c for n, c in sorted(corr.cond.items())},
    }


def correlations_from_json(d: dict) -> CorrelationSet:
    keys = tuple(tuple(int(x) for x in k.split(",")) for k in d["keys"])
    return CorrelationSet(
        dphis=np.array(d["dphis"]), keys=keys, values=np.array(d["values"]), cov=np.array(d["cov"]),
        status=d["status"], eta=d["eta"], phase_mode=d["phase_mode"], phi=d["phi"],
        cond={int(n): c for n, c in d["condition_numbers"].items()},
    )


def correlations_to_csv(corr: CorrelationSet, meta: dict) -> str:
    rows = []
    for d, dphi in enumerate(corr.dphis):
        for k, key in enumerate(corr.keys):
            rows.append([_g6(dphi), key[0], key[1], _g6(corr.values[d, k]),
                         _g6(np.sqrt(max(corr.cov[d, k, k], 0.0))), corr.status])
    return _csv_text(meta, ["dphi", "p1", "p2", "value", "se", "status"], rows)


# -- physical quantities -----------------------------------------------------

def physics_to_json(phys: PhysicalQuantities) -> dict:
    return {
        "status": phys.status,
        "quantities": {k: {"value": phys.values[k], "se": phys.errors[k]} for k in phys.values},
        "residuals": phys.residuals,
        "flags": list(phys.flags),
    }


def physics_from_json(d: dict) -> PhysicalQuantities:
    q = d["quantities"]
    return PhysicalQuantities(
        values={k: v["value"] for k, v in q.items()},
        errors={k: v["se"] for k, v in q.items()},
        residuals=d.get("residuals", {}),
        flags=list(d.get("flags", [])),
        status=d.get("status", "corrected"),
    )


def physics_to_csv(phys: PhysicalQuantities, meta: dict) -> str:
    rows = [[k, _g6(phys.values[k]), _g6(phys.errors[k])] for k in phys.values]
    return _csv_text(meta, ["quantity", "value", "se"], rows)


# -- manifests ---------------------------------------------------------------

def file_record(root: Path, path: Path, kind: str, **extra) -> dict:
    return {"path": str(path.relative_to(root)), "sha256": sha256_file(path), "kind": kind, **extra}


def verify_manifest(manifest_path) -> dict:
    """Load a manifest and check every referenced file against its hash."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    root = manifest_path.parent
    for section in ("files", "reconstruction"):
        for rec in manifest.get(section, []):
            p = root / rec["path"]
            if not p.exists():
                raise HashMismatchError(f"{rec['path']} listed in the manifest is missing")
            digest = sha256_file(p)
            if digest != rec["sha256"]:
                raise HashMismatchError(f"{rec['path']}: hash {digest[:12]} differs from manifest {rec['sha256'][:12]}")
    return manifest
