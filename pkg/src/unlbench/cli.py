"""unlbench command line: sweep, analyze, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .analysis import analyze
from .config import load_config
from .errors import CellFailure, ConfigError
from .plotting import write_report
from .sweep import read_results_csv, run_sweep, write_results_csv

log = logging.getLogger("unlbench")

EXIT_OK, EXIT_CELL, EXIT_CONFIG = 0, 1, 2


def cmd_sweep(config_path, out_dir, threads: int = 1) -> int:
    try:
        cfg = load_config(config_path)
        plans = cfg.plans()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.raw, indent=2, sort_keys=True) + "\n")
    results = out / "results.csv"
    records, cache = [], {}
    for plan in plans:
        (out / f"plan_{plan.target.slug}_{plan.protocol}.json").write_text(
            json.dumps(plan.to_dict(), indent=2) + "\n")
        try:
            grid = run_sweep(plan, threads=threads, checkpoint_dir=out / "checkpoints", model_cache=cache)
        except CellFailure as exc:
            partial = out / "results.partial.csv"
            write_results_csv(records + exc.partial, partial)
            print(f"sweep failed [{plan.protocol}, {plan.target.slug}]: {exc}; "
                  f"finished records flushed to {partial}", file=sys.stderr)
            return EXIT_CELL
        records.extend(grid.ordered())
        log.info("%s %s: %d records", plan.target.slug, plan.protocol, len(grid.records))
    write_results_csv(records, results)
    partial = out / "results.partial.csv"
    if partial.exists():
        partial.unlink()
    print(f"wrote {len(records)} records to {results}")
    return EXIT_OK


def cmd_analyze(results_csv, out_json) -> int:
    try:
        rows = read_results_csv(results_csv)
        summary = analyze(rows)
    except (ConfigError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    Path(out_json).parent.mkdir(parents=True, exist_ok=True)
    Path(out_json).write_text(json.dumps(summary, indent=2) + "\n")
    print(f"wrote {len(summary['entries'])} summary entries to {out_json}")
    return EXIT_OK


def cmd_report(results_csv, out_dir) -> int:
    try:
        rows = read_results_csv(results_csv)
        summary = analyze(rows)
    except (ConfigError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    paths = write_report(summary, out_dir)
    print(f"wrote {len(paths)} files to {out_dir}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="unlbench", description=__doc__)
    parser.add_argument("--threads", type=int, default=1,
                        help="worker processes for sweep cells (scheduling only)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("sweep", help="run the configured sweeps")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p = sub.add_parser("analyze", help="summarize a results CSV as JSON")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p = sub.add_parser("report", help="render SVG figures and a summary CSV")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    if args.command == "sweep":
        return cmd_sweep(args.config, args.out, args.threads)
    if args.command == "analyze":
        return cmd_analyze(args.inp, args.out)
    return cmd_report(args.inp, args.out)


if __name__ == "__main__":
    sys.exit(main())
