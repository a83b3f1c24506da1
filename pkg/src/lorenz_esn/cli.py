"""``lorenz-esn`` command line: gen-data, run, report."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .harness import (
    ALL_PAIRS,
    RunConfig,
    format_report,
    pair_data,
    resolve_data_dir,
    run_all,
    timing_path,
    write_result,
)
from .lorenz import save_pair

DEFAULT_DATA_DIR = "data"
DEFAULT_OUT = "report.json"


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="master seed (default 42)")
    p.add_argument("--data-dir", help=f"pair data directory (default ${{LORENZ_ESN_DATA_DIR}} or ./{DEFAULT_DATA_DIR})")
    p.add_argument("--pair", type=int, action="append", choices=ALL_PAIRS, metavar="K", help="restrict to pair K (repeatable)")
    p.add_argument("--config", help="JSON file with RunConfig fields; flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lorenz-esn", description="Adaptive echo state network benchmark on Lorenz-63.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="synthesize pair datasets into the data directory")
    _common(gen)

    run = sub.add_parser("run", help="run the benchmark and write a report")
    _common(run)
    run.add_argument("--out", help=f"report path (default {DEFAULT_OUT})")
    run.add_argument("--time-budget", type=float, help="wall-clock budget in seconds (default 90)")
    run.add_argument("--oracle", action="store_true", help="score the ground truth itself (plumbing check)")

    rep = sub.add_parser("report", help="pretty-print a stored report")
    rep.add_argument("path")
    return parser


def _run_config(args) -> RunConfig:
    values = {}
    if args.config:
        with open(args.config) as fh:
            values = json.load(fh)
    if args.seed is not None:
        values["master_seed"] = args.seed
    if args.data_dir is not None:
        values["data_dir"] = args.data_dir
    if args.pair:
        values["pairs"] = args.pair
    if getattr(args, "out", None) is not None:
        values["output_path"] = args.out
    if getattr(args, "time_budget", None) is not None:
        values["time_budget"] = args.time_budget
    if getattr(args, "oracle", False):
        values["oracle"] = True
    values.setdefault("data_dir", resolve_data_dir(None) or DEFAULT_DATA_DIR)
    return RunConfig.from_dict(values)


def _gen_data(args) -> int:
    config = _run_config(args)
    for pair_id in config.pairs:
        # always synthesize; never read back what is already on disk
        data = pair_data(RunConfig.from_dict({**_plain(config), "data_dir": None}), pair_id)
        paths = save_pair(data, os.path.join(config.data_dir, f"pair{pair_id}"))
        print(f"pair {pair_id}: {len(paths)} files in {os.path.dirname(paths[0])}")
    return 0


def _plain(config: RunConfig) -> dict:
    return {k: getattr(config, k) for k in config.__dataclass_fields__}


def _run(args) -> int:
    config = _run_config(args)
    result = run_all(config)
    out = config.output_path or DEFAULT_OUT
    report_path, tpath = write_result(result, out)
    print(format_report(result.report, result.timing))
    print(f"wrote {report_path} and {tpath}")
    return 1 if result.report["failures"] else 0


def _report(args) -> int:
    with open(args.path) as fh:
        report = json.load(fh)
    timing = None
    if os.path.exists(timing_path(args.path)):
        with open(timing_path(args.path)) as fh:
            timing = json.load(fh)
    print(format_report(report, timing))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"gen-data": _gen_data, "run": _run, "report": _report}[args.command]
    try:
        return handler(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"lorenz-esn: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
