"""Command-line entry point: ``dualfield run | validate | list-scenarios``."""

import argparse
import json
import os
import platform
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import SCENARIOS, ConfigError, config_to_dict, load_config
from .io import write_csv
from .scenarios import CALL_GRAPH, run_scenario

OUTPUT_ENV = "DUALFIELD_OUTPUT_DIR"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def resolve_output(cfg, flag):
    """Flag, then ``[output] dir``, then the environment variable, then ``./runs``."""
    for candidate in (flag, cfg.output.dir, os.environ.get(OUTPUT_ENV)):
        if candidate:
            return Path(candidate)
    return Path("runs") / cfg.scenario.name


def apply_overrides(cfg, seed=None, threads=None, out=None):
    section = cfg.scenario
    if seed is not None:
        if seed < 0:
            raise ConfigError(["--seed must be nonnegative"])
        section = replace(section, seed=seed)
    if threads is not None:
        if threads < 1:
            raise ConfigError(["--threads must be at least 1"])
        section = replace(section, threads=threads)
    output = replace(cfg.output, dir=str(out)) if out is not None else cfg.output
    return cfg.replace(scenario=section, output=output)


def write_manifest(path, cfg, wall_time, checks):
    manifest = {
        "scenario": cfg.scenario.name,
        "seed": cfg.scenario.seed,
        "threads": cfg.scenario.threads,
        "config": config_to_dict(cfg),
        "versions": {"dualfield": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "wall_time_s": wall_time,
        "call_graph": CALL_GRAPH[cfg.scenario.name],
        "criteria": sorted({c.criterion for c in checks}),
        "passed": all(c.passed for c in checks),
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run(cfg, out=None):
    """Run one scenario; returns ``(exit_status, checks, output_dir)``."""
    out = resolve_output(cfg, out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    checks = run_scenario(cfg, out, threads=cfg.scenario.threads)
    wall = time.perf_counter() - start
    write_csv(out / "summary.csv",
              ["criterion", "scenario", "quantity", "value", "relation", "tolerance", "pass"],
              ([c.criterion, cfg.scenario.name, c.quantity, c.value, c.relation, c.tolerance,
                c.passed] for c in checks))
    write_manifest(out / "manifest.json", cfg, wall, checks)
    status = EXIT_OK if all(c.passed for c in checks) else EXIT_FAILED
    return status, checks, out


def _parser():
    p = argparse.ArgumentParser(prog="dualfield", description="Field simulator for absorbing media.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario config")
    r.add_argument("config")
    r.add_argument("--out", default=None, help=f"output directory (default: ${OUTPUT_ENV})")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--threads", type=int, default=None)
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    sub.add_parser("list-scenarios", help="print the scenario names")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "list-scenarios":
        for name in SCENARIOS:
            print(name)
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"{args.config}: ok ({cfg.scenario.name})")
            return EXIT_OK
        cfg = apply_overrides(cfg, args.seed, args.threads, args.out)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        status, checks, out = run(cfg, args.out)
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] criterion {c.criterion} {c.quantity} = "
              f"{c.value:.4g} ({c.relation} {c.tolerance:.4g})")
    print(f"outputs in {out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
