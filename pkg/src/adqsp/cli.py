"""Command line entry point: ``sim <experiment> [--config PATH] [--seed N]
[--trials N] [--full] [--out DIR] [--workers N]``.

Writes one CSV per table plus ``manifest.json`` into the output directory.
Exit status is 0 on success, 2 for an invalid configuration and 3 when a
property check fails.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import platform
import sys

import numpy as np
import scipy

from . import __version__
from .config import EXPERIMENTS, FULL_TRIALS, ConfigError, config_hash, load_config
from .experiments import run_experiment
from .kernels import BACKEND

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sim", description=__doc__.split("\n\n")[0])
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="JSON document overriding the defaults")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--trials", type=int)
    ap.add_argument("--full", action="store_true", help=f"use {FULL_TRIALS} trials")
    ap.add_argument("--out", default="out", help="output directory (default: out)")
    ap.add_argument("--workers", type=int, help="worker processes (results do not depend on it)")
    return ap


def write_table(path, header, rows) -> str:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    over = {"experiment": args.experiment}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.trials is not None:
        over["trials"] = args.trials
    if args.full:
        over["trials"] = FULL_TRIALS
    if args.workers is not None:
        over["workers"] = args.workers
    try:
        cfg = load_config(args.config, over)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    result = run_experiment(cfg)
    os.makedirs(args.out, exist_ok=True)
    outputs = {}
    for name, (header, rows) in sorted(result.tables.items()):
        outputs[name] = write_table(os.path.join(args.out, name), header, rows)
    recorded = {k: v for k, v in cfg.items() if k != "workers"}
    manifest = {
        "experiment": cfg["experiment"],
        "seed": cfg["seed"],
        "trials": cfg["trials"],
        "config": recorded,
        "config_sha256": config_hash(recorded),
        "versions": {"adqsp": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__,
                     "kernel_backend": BACKEND},
        "outputs": outputs,
        "checks": [{"name": c.name, "passed": bool(c.passed), "value": float(c.value),
                    "tolerance": c.tolerance, "detail": c.detail} for c in result.checks],
        "notes": result.notes,
    }
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.6g} ({c.tolerance})"
              + (f" {c.detail}" if c.detail and not c.passed else ""))
    return EXIT_OK if result.passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
