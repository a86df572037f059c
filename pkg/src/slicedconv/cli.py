"""Command-line entry point.

    slicedconv run --suite cases.jsonl --arch machine.txt --nwin 16 --nf 8 \
        [--seed N] [--jobs N] [--out report.csv] [--verify-only] \
        [--dump-regions regions.json]

Exit codes: 0 ok, 1 correctness failure, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .arch import load_arch, load_mk
from .harness import format_csv, load_suite, run_suite


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slicedconv",
        description="Sliced direct-convolution engine benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run a convolution suite against the oracle")
    run_p.add_argument("--suite", required=True, help="JSONL suite of convolutions")
    run_p.add_argument("--arch", required=True, help="machine description file")
    run_p.add_argument("--nwin", type=int, required=True,
                       help="output windows per microkernel call")
    run_p.add_argument("--nf", type=int, required=True,
                       help="filters per microkernel call")
    run_p.add_argument("--seed", type=int, default=0,
                       help="64-bit seed for tensor initialization (default 0)")
    run_p.add_argument("--jobs", type=int, default=1,
                       help="parallel verification workers (timing stays serial)")
    run_p.add_argument("--out", default=None,
                       help="write the CSV report here instead of stdout")
    run_p.add_argument("--verify-only", action="store_true",
                       help="skip timing loops; report the verification pass")
    run_p.add_argument("--dump-regions", default=None, metavar="PATH",
                       help="write each case's region decomposition as JSON")
    return parser


def cmd_run(args) -> int:
    try:
        arch = load_arch(args.arch)
        mk = load_mk(args.arch, n_win=args.nwin, n_f=args.nf)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        cases, errors = load_suite(args.suite)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for msg in errors:
        print(f"skipped record: {msg}", file=sys.stderr)
    if not cases:
        print("error: suite contains no valid cases", file=sys.stderr)
        return 2

    reports, regions_map = run_suite(
        cases, arch, mk, seed=args.seed, verify_only=args.verify_only,
        jobs=args.jobs, collect_regions=args.dump_regions is not None)

    csv_text = format_csv(reports)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)

    if args.dump_regions:
        dump = {cid: [r.to_dict() for r in regs]
                for cid, regs in regions_map.items()}
        with open(args.dump_regions, "w", encoding="utf-8") as fh:
            json.dump(dump, fh, indent=2)

    n_bad = sum(not r.correct for r in reports)
    print(f"{len(reports)} cases, {len(reports) - n_bad} correct, "
          f"{n_bad} incorrect, {len(errors)} rejected records", file=sys.stderr)
    if n_bad:
        return 1
    if errors:
        return 2
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
