"""Command line interface: ``rumtest run | patches | enumerate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from rumtest import io
from rumtest.choice_types import enumerate_rational_types
from rumtest.errors import InfeasibleMargin, InputError, OnBoundary, TooLarge, UnknownPatch
from rumtest.geometry import DEFAULT_MARGIN, TIE_POLICIES, enumerate_patches
from rumtest.pipeline import MODES, TestConfig, run_test

EXIT_OK = 0
EXIT_PARTIAL = 2
EXIT_INPUT = 3


def _tau(value: str):
    if value == "auto":
        return value
    try:
        tau = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError("tau must be a number or 'auto'") from None
    if tau < 0:
        raise argparse.ArgumentTypeError("tau must be nonnegative")
    return tau


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rumtest", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="compute J_N and its bootstrap p-value")
    run.add_argument("--prices", required=True)
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--choices", help="one observed bundle per row")
    src.add_argument("--patch-counts", help="period,patch_index,count")
    run.add_argument("--tau", type=_tau, default="auto")
    run.add_argument("--bootstrap", type=int, default=200, metavar="M")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--mode", choices=MODES, default="heur-bounds")
    run.add_argument("--subset-size", type=int, default=1000)
    run.add_argument("--time-limit", type=float, default=None, metavar="SECS")
    run.add_argument("--pricing-time-limit", type=float, default=None, metavar="SECS")
    run.add_argument("--restarts", type=int, default=10)
    run.add_argument("--tie-policy", choices=TIE_POLICIES, default="error")
    run.add_argument("--margin", type=float, default=DEFAULT_MARGIN)
    run.add_argument("--trace", metavar="PATH", help="write JSON-lines iteration trace")
    run.add_argument("--out", help="write report.json here")
    run.add_argument("--table", action="store_true", help="print a text summary table")

    pat = sub.add_parser("patches", help="enumerate patches and write a JSON fixture")
    pat.add_argument("--prices", required=True)
    pat.add_argument("--margin", type=float, default=DEFAULT_MARGIN)
    pat.add_argument("--out", required=True)

    enu = sub.add_parser("enumerate", help="list every rational choice type")
    enu.add_argument("--patches", required=True)
    enu.add_argument("--limit", type=int, default=10**6)
    enu.add_argument("--out", help="write the types as a JSON array (default: stdout)")
    return parser


def _cmd_run(args) -> int:
    dataset = io.load_dataset(args.prices, args.choices, args.patch_counts)
    config = TestConfig(
        tau=args.tau,
        bootstrap=args.bootstrap,
        seed=args.seed,
        subset_size=args.subset_size,
        mode=args.mode,
        restarts=args.restarts,
        time_limit=args.time_limit,
        pricing_time_limit=args.pricing_time_limit,
        tie_policy=args.tie_policy,
        margin=args.margin,
    )
    trace_fh = open(args.trace, "w") if args.trace else None
    try:
        trace = (lambda e: trace_fh.write(json.dumps(e) + "\n")) if trace_fh else None
        report = run_test(dataset, config, trace=trace)
    finally:
        if trace_fh:
            trace_fh.close()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_json() + "\n")
    if args.table:
        print(report.table())
    elif not args.out:
        print(report.to_json())
    return EXIT_PARTIAL if report.partial else EXIT_OK


def _cmd_patches(args) -> int:
    _, prices = io.read_prices(args.prices)
    ps = enumerate_patches(prices, args.margin)
    io.save_patches(args.out, ps)
    print(f"{ps.T} periods, patches per period: {ps.sizes.tolist()}", file=sys.stderr)
    return EXIT_OK


def _cmd_enumerate(args) -> int:
    ps = io.load_patches(args.patches)
    types = enumerate_rational_types(ps, args.limit)
    if args.out:
        io.save_types(args.out, types)
        print(f"{len(types)} rational of {ps.total_types()} types", file=sys.stderr)
    else:
        print(json.dumps([list(t) for t in types]))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    handler = {"run": _cmd_run, "patches": _cmd_patches, "enumerate": _cmd_enumerate}
    try:
        return handler[args.command](args)
    except (InputError, OnBoundary, UnknownPatch, InfeasibleMargin, TooLarge, OSError) as exc:
        print(f"rumtest: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
