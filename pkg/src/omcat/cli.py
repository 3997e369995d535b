"""Command-line entry point: ``omcat <experiment> [--config FILE] [--out DIR] ...``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import traceback
from pathlib import Path

from .experiments import (EXPERIMENTS, ConfigError, ExperimentError, load_config, run,
                          write_bundle)

EXIT_CONFIG = 2
EXIT_EXPERIMENT = 3
EXIT_INTERNAL = 1

HELP = {
    "wigner-movie": "Wigner frames of the mechanical state over time",
    "eta-scan": "nonclassical ratio after a half-period pulse over a parameter grid",
    "eta-dissipation-scan": "eta scan with cavity loss and mechanical damping (Lindblad)",
    "overlap-scan": "overlap of numerics with undriven and first-order states",
    "periodicity-check": "pulse then free evolution: periodicity and revivals of eta",
    "vacuum-analysis": "vacuum initial state: W(-g) threshold and Wigner grids",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="omcat", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", type=Path, help="INI config file")
        p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                       help="worker processes for sweeps (default: available cores)")
        p.add_argument("--seed", type=int, help="random seed recorded with the run")
        p.add_argument("--nc", type=int, help="cavity Fock cut-off override")
        p.add_argument("--nm", type=int, help="mechanical Fock cut-off override")
        p.add_argument("--tolerance", type=float,
                       help="commutator truncation-gate threshold (default 0.01)")
    return parser


def _error_record(out: Path | None, experiment: str, kind: str, exc: BaseException) -> dict:
    rec = {"status": "error", "experiment": experiment, "error": kind,
           "type": type(exc).__name__, "message": str(exc)}
    print(json.dumps(rec), file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(json.dumps(rec, indent=2) + "\n", encoding="utf-8")
        except OSError:
            pass
    return rec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.experiment,
                          {"n_cavity": args.nc, "n_mech": args.nm, "seed": args.seed,
                           "truncation": args.tolerance})
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
    except (ConfigError, ValueError) as exc:
        _error_record(args.out, args.experiment, "config", exc)
        return EXIT_CONFIG
    try:
        bundle = run(cfg, workers=args.workers)
        paths = write_bundle(bundle, args.out)
    except ExperimentError as exc:
        _error_record(args.out, args.experiment, "experiment", exc)
        return EXIT_EXPERIMENT
    except ConfigError as exc:
        _error_record(args.out, args.experiment, "config", exc)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        logging.debug(traceback.format_exc())
        _error_record(args.out, args.experiment, "internal", exc)
        return EXIT_INTERNAL
    if "error" in bundle.summary:
        _error_record(args.out, args.experiment, "experiment",
                      ExperimentError(bundle.summary["error"]))
        return EXIT_EXPERIMENT
    print(json.dumps({"status": "ok", "experiment": cfg.name,
                      "files": [str(p) for p in paths], "summary": bundle.summary},
                     default=str))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
