"""Command-line entry point: ``morseham solve|spectrum|morse|verify|sweep``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .errors import ConfigError, MorsehamError
from .harness import (EXIT_CONFIG, EXIT_FAIL, EXIT_OK, EXIT_SOLVER, ExperimentConfig, run_config, sweep,
                      verify_theorems)

COMMAND_TASKS = {
    "solve": ["solve", "profile"],
    "spectrum": ["spectrum"],
    "morse": ["morse"],
    "verify": ["solve", "profile", "spectrum", "morse", "oracle", "verify"],
}


def _parser():
    ap = argparse.ArgumentParser(prog="morseham", description="Radial nodal solutions of Hamiltonian elliptic "
                                 "systems: shooting, spectra and Morse index verification.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("solve", "compute a radial solution and its nodal profile"),
                        ("spectrum", "radial spectra of the linearized potentials"),
                        ("morse", "Morse index report"),
                        ("verify", "run every task and verify the index bounds, or re-check stored reports"),
                        ("sweep", "run a parameter grid and write summary.csv")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=(name != "verify"), help="JSON experiment config")
        p.add_argument("--out", help="output directory (default: config output_dir or ./out)")
        p.add_argument("--grid-size", type=int, metavar="M", help="spectral grid nodes")
        p.add_argument("--jobs", type=int, default=1, metavar="K", help="parallel sweep cells")
        if name == "verify":
            p.add_argument("--reports", nargs="+", help="stored report.json files to re-evaluate")
    return ap


def _load_raw(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _apply_overrides(raw, args, command):
    raw = dict(raw)
    if args.grid_size is not None:
        raw["grid"] = dict(raw.get("grid", {}), spectral_nodes=args.grid_size)
    if command in COMMAND_TASKS:
        raw["tasks"] = COMMAND_TASKS[command]
    return raw


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    level = os.environ.get("MORSEHAM_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify" and args.reports:
            table, machine, code = verify_theorems(args.reports)
            print(table)
            if args.out:
                os.makedirs(args.out, exist_ok=True)
                with open(os.path.join(args.out, "verification.json"), "w", encoding="utf-8") as fh:
                    json.dump(machine, fh, sort_keys=True, indent=2)
            return code
        if not args.config:
            raise ConfigError("--config or --reports is required")
        raw = _apply_overrides(_load_raw(args.config), args, args.command)
        out = args.out or raw.get("output_dir") or "out"
        if args.command == "sweep":
            if "sweep" not in raw:
                raise ConfigError("config: missing field 'sweep'")
            rows, summary = sweep(raw, raw["sweep"], out, jobs=args.jobs)
            print(f"{len(rows)} runs, summary at {summary}")
            failed = [r for r in rows if r["exit_code"] not in (EXIT_OK,)]
            return EXIT_FAIL if failed else EXIT_OK
        rep = run_config(ExperimentConfig.from_dict(raw), out)
        verdict = rep.data.get("verification", {}).get("verdict")
        status = rep.data.get("status")
        print(f"{status}: report at {os.path.join(out, 'report.json')}" + (f", verdict {verdict}" if verdict else ""))
        return rep.exit_code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MorsehamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
