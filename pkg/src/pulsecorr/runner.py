"""Config-driven orchestration: simulate, reconstruct, oracle dumps, comparison, sweeps.

Output directory layout::

    config.json                  effective configuration
    batches/q{i}_d{j}.csv        one sample batch per (q, dphi) setting
    moments.json / moments.csv   estimated <F^n> per setting
    manifest.json                every file above with its SHA-256 (written last)
    correlations_contaminated.*  reconstructed correlations before correction
    correlations_corrected.*     after efficiency correction
    physics.json / physics.csv   extracted physical quantities
    figures/*.png
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as fio
from .config import ExperimentConfig
from .measurement import MeasurementSetting, TrainValidationError, sample
from .moments import decontaminate, estimate_moments, extract_physics, invert_q_system
from .oracle import contaminate, exact_physics, exact_table
from .pulses import validate_train

log = logging.getLogger(__name__)

Z_LIMIT = 5.0


def setting_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def _meta(cfg: ExperimentConfig) -> dict:
    return {"config_hash": cfg.hash(), "seeds": cfg.seeds}


def plan_settings(cfg: ExperimentConfig) -> list[tuple[int, int, MeasurementSetting]]:
    train = cfg.build_train()
    if cfg.override_overlap_check:
        train = None
    out = []
    for i, q in enumerate(cfg.qs):
        for j, d in enumerate(cfg.dphis):
            index = i * len(cfg.dphis) + j
            s = MeasurementSetting(q=float(q), phi=cfg.phi, dphi=float(d), eta=cfg.eta, phase_mode=cfg.phase_mode,
                                   shots=cfg.shots, seed=setting_seed(cfg.seed, index), batch_size=cfg.batch_size,
                                   train=train, overlap_tol=cfg.overlap_tol)
            out.append((i, j, s))
    return out


def check_train(cfg: ExperimentConfig):
    train = cfg.build_train()
    if train is None or cfg.override_overlap_check:
        return None
    report = validate_train(train, tol=cfg.overlap_tol)
    if not report.passed:
        raise TrainValidationError(f"LO train fails the overlap check (use --override-overlap-check):\n{report}")
    return report


def run_simulate(cfg: ExperimentConfig, workers: int = 1, figures: bool = True) -> Path:
    """Sample every (q, dphi) setting and write batches, moments and the manifest."""
    check_train(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    state = cfg.build_state()
    meta = _meta(cfg)
    plan = plan_settings(cfg)

    def job(item):
        i, j, setting = item
        batch = sample(state, setting)
        path = out / "batches" / f"q{i}_d{j}.csv"
        fio.atomic_write(path, fio.batch_to_csv(batch, meta))
        return batch, path

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(job, plan))
    log.info("sampled %d settings x %d shots", len(plan), cfg.shots)

    batches = [b for b, _ in results]
    bs = cfg.bootstrap
    table = estimate_moments(batches, cfg.n_max, n_boot=bs.get("n_boot", 200), seed=bs.get("seed", 0),
                             n_groups=bs.get("groups", 1000))
    fio.atomic_write(out / "config.json", cfg.dumps())
    fio.atomic_write(out / "moments.json", fio.dump_json(fio.moments_to_json(table, meta)))
    fio.atomic_write(out / "moments.csv", fio.moments_to_csv(table, meta))

    files = [fio.file_record(out, out / "config.json", "config")]
    for (i, j, s), (_, path) in zip(plan, results):
        files.append(fio.file_record(out, path, "batch", q=s.q, dphi=s.dphi, seed=s.seed))
    files.append(fio.file_record(out, out / "moments.json", "moments"))
    files.append(fio.file_record(out, out / "moments.csv", "moments"))
    if figures:
        from .report import plot_histograms

        first = [b for (i, j, _), b in zip(plan, batches) if j == 0]
        files.append(fio.file_record(out, plot_histograms(first, out / "figures" / "histograms.png"), "figure"))

    manifest = {"schema_version": 1, **meta, "config": cfg.to_dict(), "files": files}
    fio.atomic_write(out / "manifest.json", fio.dump_json(manifest))
    return out / "manifest.json"


def reconstruct(table, eta: float):
    """Contaminated correlations, corrected correlations and physics from a moment table."""
    raw = invert_q_system(table)
    corrected = decontaminate(raw, eta)
    return raw, corrected, extract_physics(corrected)


def run_reconstruct(manifest_path, figures: bool = True, from_batches: bool = True) -> dict:
    """Reconstruct correlations and physics for a simulated run; extends the manifest."""
    manifest_path = Path(manifest_path)
    manifest = fio.verify_manifest(manifest_path)
    out = manifest_path.parent
    cfg = ExperimentConfig.from_dict(manifest["config"])
    meta = _meta(cfg)
    expected = len(cfg.qs) * len(cfg.dphis)
    batch_recs = [r for r in manifest["files"] if r["kind"] == "batch"]
    if len(batch_recs) != expected:
        raise ValueError(f"manifest lists {len(batch_recs)} batches, the grid needs {expected}")

    if from_batches:
        batches = [fio.read_batch_csv(out / r["path"])[0] for r in batch_recs]
        bs = cfg.bootstrap
        table = estimate_moments(batches, cfg.n_max, n_boot=bs.get("n_boot", 200), seed=bs.get("seed", 0),
                                 n_groups=bs.get("groups", 1000))
    else:
        table = fio.moments_from_json(json.loads((out / "moments.json").read_text()))

    raw, corrected, phys = reconstruct(table, cfg.eta)
    raw_phys = extract_physics(raw)
    written = []
    for name, corr in (("correlations_contaminated", raw), ("correlations_corrected", corrected)):
        fio.atomic_write(out / f"{name}.json", fio.dump_json(fio.correlations_to_json(corr, meta)))
        fio.atomic_write(out / f"{name}.csv", fio.correlations_to_csv(corr, meta))
        written += [out / f"{name}.json", out / f"{name}.csv"]
    physics = {**meta, "kind": "reconstruction", "physics": fio.physics_to_json(phys),
               "physics_uncorrected": fio.physics_to_json(raw_phys)}
    fio.atomic_write(out / "physics.json", fio.dump_json(physics))
    fio.atomic_write(out / "physics.csv", fio.physics_to_csv(phys, meta))
    written += [out / "physics.json", out / "physics.csv"]
    if figures:
        from .report import plot_correlations

        written.append(plot_correlations(corrected, out / "figures" / "correlations_corrected.png"))
        written.append(plot_correlations(raw, out / "figures" / "correlations_contaminated.png"))

    manifest["reconstruction"] = [fio.file_record(out, p, "reconstruction") for p in written]
    fio.atomic_write(manifest_path, fio.dump_json(manifest))
    return physics


def oracle_dump(cfg: ExperimentConfig) -> dict:
    """Exact correlation tables (ideal and at the configured eta) and physics."""
    state = cfg.build_state()
    averaged = cfg.phase_mode == "averaged"
    ideal = exact_table(state, cfg.dphis, cfg.n_max, phase_averaged=averaged, phi=cfg.phi)
    measured = contaminate(ideal, cfg.eta)
    phys = exact_physics(state)
    return {
        **_meta(cfg),
        "kind": "oracle",
        "dphis": cfg.dphis.tolist(),
        "ideal": {f"{k[0]},{k[1]}": v.tolist() for k, v in ideal.items()},
        "contaminated": {f"{k[0]},{k[1]}": v.tolist() for k, v in measured.items()},
        "physics": {"status": "exact", "quantities": {k: {"value": v, "se": 0.0} for k, v in phys.items()},
                    "residuals": {}, "flags": []},
    }


def run_oracle(cfg: ExperimentConfig, out: Path | None = None) -> Path:
    out = Path(out or cfg.output_dir)
    dump = oracle_dump(cfg)
    fio.atomic_write(out / "oracle.json", fio.dump_json(dump))
    rows = [[k, i, f"{d:.6g}", f"{dump['ideal'][k][i]:.6g}", f"{dump['contaminated'][k][i]:.6g}"]
            for k in dump["ideal"] for i, d in enumerate(dump["dphis"])]
    fio.atomic_write(out / "oracle.csv", fio._csv_text(_meta(cfg), ["key", "index", "dphi", "ideal", "contaminated"], rows))
    return out / "oracle.json"


def _load_result(path) -> dict:
    """Physics-bearing JSON: a manifest (verified, via its physics.json) or an oracle/physics dump."""
    path = Path(path)
    doc = json.loads(path.read_text())
    if "files" in doc:
        fio.verify_manifest(path)
        if not doc.get("reconstruction"):
            raise ValueError("the manifest has no reconstruction yet; run `reconstruct` first")
        phys = json.loads((path.parent / "physics.json").read_text())
        return phys
    return doc


def run_compare(result_path, reference_path, out: Path | None = None) -> dict:
    """Per-quantity z-scores of a result against a reference (normally an oracle dump)."""
    result = _load_result(result_path)
    reference = json.loads(Path(reference_path).read_text())
    if result.get("config_hash") != reference.get("config_hash"):
        raise fio.HashMismatchError(
            f"config hash {result.get('config_hash', '?')[:12]} differs from reference {reference.get('config_hash', '?')[:12]}"
        )
    est = fio.physics_from_json(result["physics"])
    ref = {k: v["value"] for k, v in reference["physics"]["quantities"].items()}
    z = est.z_scores(ref)
    rows = [{"quantity": k, "value": est.values[k], "se": est.errors[k], "reference": ref[k], "z": z[k]} for k in z]
    worst = max((abs(r["z"]) for r in rows), default=0.0)
    report = {"config_hash": result["config_hash"], "max_abs_z": worst, "passed": bool(worst <= Z_LIMIT),
              "rows": rows}
    if out is not None:
        out = Path(out)
        fio.atomic_write(out / "compare.json", fio.dump_json(report))
        fio.atomic_write(out / "compare.csv", fio._csv_text(
            {"config_hash": result["config_hash"]}, ["quantity", "value", "se", "reference", "z"],
            [[r["quantity"], f"{r['value']:.6g}", f"{r['se']:.6g}", f"{r['reference']:.6g}", f"{r['z']:.3f}"]
             for r in rows]))
    return report


def run_sweep(cfg: ExperimentConfig, etas, workers: int = 1, figures: bool = True) -> dict:
    """Repeat simulate + reconstruct for each detection efficiency."""
    root = Path(cfg.output_dir)
    rows = []
    for eta in etas:
        sub = replace(cfg, eta=float(eta), output_dir=str(root / f"eta_{float(eta):g}"))
        manifest = run_simulate(sub, workers=workers, figures=False)
        phys = run_reconstruct(manifest, figures=False)
        rows.append({"eta": float(eta), "config_hash": sub.hash(),
                     "values": {k: v["value"] for k, v in phys["physics"]["quantities"].items()},
                     "errors": {k: v["se"] for k, v in phys["physics"]["quantities"].items()}})
    reference = exact_physics(cfg.build_state())
    summary = {"seeds": cfg.seeds, "base_config_hash": cfg.hash(), "runs": rows, "exact": reference}
    fio.atomic_write(root / "sweep.json", fio.dump_json(summary))
    names = list(rows[0]["values"]) if rows else []
    table = [[f"{r['eta']:g}"] + [f"{r['values'][n]:.6g}" for n in names] + [f"{r['errors'][n]:.6g}" for n in names]
             for r in rows]
    fio.atomic_write(root / "sweep.csv", fio._csv_text({"base_config_hash": cfg.hash(), "seeds": cfg.seeds},
                                                      ["eta"] + names + [f"se_{n}" for n in names], table))
    if figures and rows:
        from .report import plot_sweep

        plot_sweep([r["eta"] for r in rows], rows, reference, root / "figures" / "sweep.png")
    return summary
