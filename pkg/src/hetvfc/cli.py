"""Command line entry point: ``hetvfc run <config> [options]``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import time
from pathlib import Path

from .campaign import run_campaign, write_outputs
from .config import ConfigError, ExperimentConfig, SweepAxis, dump_config, load_config, validate

OUTPUT_ENV = "HETVFC_OUTPUT_DIR"
EXIT_CONFIG = 2
EXIT_IO = 3

log = logging.getLogger("hetvfc")


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out += list(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _sweep(text: str) -> SweepAxis:
    name, sep, values = text.partition("=")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"expected field=v1,v2,... got {text!r}")
    try:
        vals = [float(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric sweep value in {text!r}") from None
    return SweepAxis(name.strip(), vals)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hetvfc", description="Heterogeneous VLC/RF fog offloading experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a campaign and write CSV files")
    run.add_argument("config", help="YAML experiment config (an empty file gives the defaults)")
    run.add_argument("--out", help=f"output directory (overrides ${OUTPUT_ENV} and the config)")
    run.add_argument("--seeds", type=_int_list, help="comma list, ranges as a..b")
    run.add_argument("--methods", type=lambda s: [m.strip() for m in s.split(",") if m.strip()])
    run.add_argument("--sweep", type=_sweep, action="append", default=[], help="field=v1,v2,...; repeat for a grid")
    run.add_argument("--jobs", type=int, help="worker processes")

    dflt = sub.add_parser("defaults", help="print the default config as YAML")
    dflt.set_defaults(config=None)
    return p


def resolve(args) -> tuple[ExperimentConfig, Path]:
    cfg = load_config(args.config)
    changes = {}
    if args.seeds is not None:
        changes["seeds"] = args.seeds
    if args.methods is not None:
        changes["methods"] = args.methods
    if args.sweep:
        changes["sweep"] = args.sweep
    if args.jobs is not None:
        changes["jobs"] = args.jobs
    cfg = validate(dataclasses.replace(cfg, **changes))
    out = args.out or os.environ.get(OUTPUT_ENV) or cfg.output
    return cfg, Path(out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "defaults":
        sys.stdout.write(dump_config(ExperimentConfig()))
        return 0
    try:
        cfg, out_dir = resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    t = time.perf_counter()
    result = run_campaign(cfg)
    try:
        written = write_outputs(result, out_dir)
        (out_dir / "config.yaml").write_text(dump_config(cfg))
    except OSError as exc:
        print(f"cannot write results: {exc}", file=sys.stderr)
        return EXIT_IO
    log.info("campaign finished in %.1f s", time.perf_counter() - t)
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
