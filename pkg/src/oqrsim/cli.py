"""Command-line entry point.

    oqrsim simulate --config run.yaml --out out/fig2
    oqrsim simulate --sweep --set pulse.freq_THz=0.1 --set grid.E0_max=3e7
    oqrsim scan --set initial.state=[1,0] --threads 8
    oqrsim magnus-orders --set pulse.E0_V_per_m=8e6
    oqrsim spectrum
    oqrsim density

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__, config
from .config import FULL_RESOLUTION, ConfigError
from .io import write_outputs, write_trajectory
from .scan import (
    NUMERICAL_ERRORS,
    run_magnus_orders,
    run_scan,
    run_simulate,
    run_spectrum,
    run_sweep,
)

log = logging.getLogger("oqrsim")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--threads", type=int, help="worker processes for scans")
    common.add_argument("--seedless", action="store_true",
                        help="reserved; the computation uses no random numbers")
    common.add_argument("--format", choices=("csv", "json"), help="table format")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key, e.g. pulse.E0_V_per_m=7e6")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="oqrsim", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"oqrsim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", parents=[common], help="orientation trace, density and OQR report")
    sim.add_argument("--sweep", action="store_true", help="sweep E0 over grid.E0_* at pulse.freq_THz")
    scan = sub.add_parser("scan", parents=[common], help="A_OQR landscape over (E0, delta1)")
    scan.add_argument("--full", action="store_true",
                      help=f"use a {FULL_RESOLUTION}x{FULL_RESOLUTION} grid")
    sub.add_parser("magnus-orders", parents=[common], help="populations under single Magnus orders")
    sub.add_parser("spectrum", parents=[common], help="pulse amplitude spectrum")
    sub.add_parser("density", parents=[common], help="angular density map")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.set)
    if args.out:
        overrides.append(("output.dir", args.out))
    if args.format:
        overrides.append(("output.format", args.format))
    if args.threads is not None:
        overrides.append(("threads", args.threads))
    if getattr(args, "full", False):
        overrides += [("grid.E0_count", FULL_RESOLUTION), ("grid.delta1_count", FULL_RESOLUTION)]
    try:
        cfg = config.resolve(config.load(args.config, overrides))
        if args.command == "simulate" and args.sweep:
            result = run_sweep(cfg)
        elif args.command in ("simulate", "density"):
            result = run_simulate(cfg)
        elif args.command == "scan":
            result = run_scan(cfg)
        elif args.command == "magnus-orders":
            result = run_magnus_orders(cfg)
        else:
            result = run_spectrum(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    only = {"density"} if args.command == "density" else None
    try:
        paths = write_outputs(result, cfg.out_dir, cfg.fmt, cfg.plot_scripts, only=only)
        if args.command == "simulate" and not args.sweep and not cfg.thermal:
            paths.append(write_trajectory(result.ensemble.members[0].trajectory,
                                          f"{cfg.out_dir}/trajectory.csv"))
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return 1
    failed = getattr(result, "errors", [])
    if failed:
        log.warning("%d grid points failed; see metadata.json", len(failed))
    if hasattr(result, "report"):
        r = result.report
        print(f"<cos>_max={r.max_value:.4f} <cos>_min={r.min_value:.4f} A_OQR={r.amplitude:.4f}")
    for p in paths:
        log.info("wrote %s", p)
    print(f"wrote {len(paths)} files to {cfg.out_dir}")
    return EXIT_NUMERICAL if failed and len(failed) == len(getattr(result, "points", [])) else 0
