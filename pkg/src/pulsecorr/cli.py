"""Command-line entry point: ``pulsecorr <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ExperimentConfig
from .io import HashMismatchError
from .measurement import TrainValidationError
from .pulses import validate_train
from . import runner


def _add_common(p):
    p.add_argument("config", help="experiment config (JSON)")
    p.add_argument("--seed", type=int, help="sampling seed (overrides the config)")
    p.add_argument("--shots", type=int, help="shots per setting")
    p.add_argument("--out", help="output directory")
    p.add_argument("--n-max", type=int, dest="n_max", help="highest moment order")
    p.add_argument("--override-overlap-check", action="store_true",
                   help="run even if the LO pulses overlap")
    p.add_argument("--workers", type=int, default=1, help="settings sampled concurrently")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    return cfg.with_overrides(
        seed=args.seed, shots=args.shots, output_dir=args.out, n_max=args.n_max,
        override_overlap_check=True if args.override_overlap_check else None,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pulsecorr", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample all (q, dphi) settings")
    _add_common(p)

    p = sub.add_parser("reconstruct", help="reconstruct correlations and physics from a run")
    p.add_argument("manifest")
    p.add_argument("--from-moments", action="store_true", help="reuse moments.json instead of the batch files")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("oracle", help="dump exact correlation tables and physics")
    _add_common(p)

    p = sub.add_parser("compare", help="z-scores of a run (manifest) against an oracle dump")
    p.add_argument("result", help="manifest.json of a reconstructed run, or any physics/oracle JSON")
    p.add_argument("reference", help="oracle.json")
    p.add_argument("--out", help="write compare.json/csv here")

    p = sub.add_parser("sweep", help="repeat the pipeline over detection efficiencies")
    _add_common(p)
    p.add_argument("--etas", type=float, nargs="+", required=True)

    p = sub.add_parser("validate-train", help="check LO pulse overlaps")
    p.add_argument("config")
    p.add_argument("--tol", type=float, help="overlap tolerance (default from config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "simulate":
            path = runner.run_simulate(_load(args), workers=args.workers, figures=not args.no_figures)
            print(path)
        elif args.command == "reconstruct":
            phys = runner.run_reconstruct(args.manifest, figures=not args.no_figures,
                                          from_batches=not args.from_moments)
            for name, q in phys["physics"]["quantities"].items():
                print(f"{name:20s} {q['value']: .6g} +- {q['se']:.3g}")
            for flag in phys["physics"]["flags"]:
                print(f"flag: {flag}")
        elif args.command == "oracle":
            print(runner.run_oracle(_load(args)))
        elif args.command == "compare":
            report = runner.run_compare(args.result, args.reference, out=args.out)
            for r in report["rows"]:
                verdict = "ok" if abs(r["z"]) <= runner.Z_LIMIT else "FAIL"
                print(f"{r['quantity']:20s} z={r['z']: .3f} {verdict}")
            print(f"max |z| = {report['max_abs_z']:.3f}")
            return 0 if report["passed"] else 1
        elif args.command == "sweep":
            summary = runner.run_sweep(_load(args), args.etas, workers=args.workers, figures=not args.no_figures)
            print(json.dumps([{"eta": r["eta"], **r["values"]} for r in summary["runs"]], indent=1))
        elif args.command == "validate-train":
            cfg = ExperimentConfig.load(args.config)
            train = cfg.build_train()
            if train is None:
                print("config has no LO train", file=sys.stderr)
                return 2
            report = validate_train(train, tol=args.tol if args.tol is not None else cfg.overlap_tol)
            print(report)
            return 0 if report.passed else 1
    except (HashMismatchError, TrainValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
