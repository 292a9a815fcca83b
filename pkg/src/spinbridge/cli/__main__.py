"""``spinbridge simulate|compare|validate``."""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import SpinBridgeError
from .config import check_log_base, parse_config
from .runner import compare, run

log = logging.getLogger("spinbridge")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinbridge", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run every sweep point of a config")
    sim.add_argument("config")
    sim.add_argument("--out", help="output directory (overrides output.directory)")
    sim.add_argument("--threads", type=int, help="number of sweep points run concurrently")
    sim.add_argument("--dump-states", action="store_true", help="write final two-mode density matrices")
    sim.add_argument("--log-base", choices=("2", "e"), help="logarithm base of the log-negativity")

    cmp = sub.add_parser("compare", help="pointwise differences between two runs")
    cmp.add_argument("dir_a")
    cmp.add_argument("dir_b")
    cmp.add_argument("--out", help="directory for compare.csv (default: dir_a)")

    val = sub.add_parser("validate", help="parse a config and print it with defaults filled in")
    val.add_argument("config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "validate":
            sys.stdout.write(parse_config(args.config).to_yaml())
            return 0
        if args.command == "compare":
            print(compare(args.dir_a, args.dir_b, args.out))
            return 0
        cfg = parse_config(args.config)
        if args.log_base:
            cfg.log_base = check_log_base(args.log_base)
        if args.threads is not None and args.threads < 1:
            raise SpinBridgeError("--threads must be positive")
        manifest = run(cfg, out=args.out, threads=args.threads, dump_states=args.dump_states or None)
        for rec in manifest["points"]:
            if "error" in rec:
                log.error("point %d failed: %s", rec["index"], rec["error"])
        log.info("%d points, %d errors", len(manifest["points"]), manifest["errors"])
        return 1 if manifest["errors"] else 0
    except SpinBridgeError as exc:
        print(f"spinbridge: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
