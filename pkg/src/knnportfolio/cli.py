"""Command line interface.

Exit codes: 0 success (or unknown answer), 10 SAT, 20 UNSAT, 1 runtime
failure, 2 usage or input error. Machine-readable results go to stdout,
diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time

from . import __version__
from .dimacs import parse_file
from .evaluator import report, sweep, sweep_csv, sweep_matrix
from .exceptions import AllSolversFailed, ExecutableNotFound, PortfolioError, SpawnFailure
from .features import FEATURE_NAMES, extract_features
from .knowledge_base import build_kb, load_kb, load_manifest, save_kb
from .metrics import DistanceVariant, Status
from .runner import Answer, portfolio_solve
from .selector import DEFAULT_K, select_solver

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

logger = logging.getLogger("knnportfolio")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _distance(text):
    try:
        return DistanceVariant.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _k_range(text):
    """``1-30``, ``5`` or ``1,3,9``."""
    try:
        if "-" in text:
            lo, hi = text.split("-", 1)
            ks = list(range(int(lo), int(hi) + 1))
        else:
            ks = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad k range {text!r}") from None
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError(f"bad k range {text!r}")
    return ks


def _distances(text):
    return [_distance(t) for t in text.split(",") if t.strip()]


def _load(args):
    kb = load_kb(args.kb, manifest=getattr(args, "solvers", None))
    if args.cutoff is not None:
        kb = kb.with_cutoff(args.cutoff)
    return kb


def cmd_features(args) -> int:
    if len(args.cnf) > 1 and not args.csv:
        print("error: several files need --csv", file=sys.stderr)
        return EXIT_USAGE
    writer = csv.writer(sys.stdout, lineterminator="\n") if args.csv else None
    for path in args.cnf:
        t0 = time.perf_counter()
        f = extract_features(parse_file(path))
        elapsed = time.perf_counter() - t0
        if writer is not None:
            row = [os.path.basename(path), "unknown"] + [repr(v) for v in f.tolist()]
            if args.time:
                row.append(repr(elapsed))
            writer.writerow(row)
            continue
        for i, (name, value) in enumerate(zip(FEATURE_NAMES, f.tolist()), start=1):
            print(f"{i}\t{name.split('_', 1)[1]}\t{value!r}")
        if args.time:
            print(f"time_seconds\t{elapsed!r}")
    return EXIT_OK


def cmd_train(args) -> int:
    executables = load_manifest(args.solvers) if args.solvers else None
    kb = build_kb(args.table, cnf_dir=args.cnf_dir, cutoff=args.cutoff,
                  executables=executables, jobs=args.jobs)
    save_kb(kb, args.out)
    dup = sum(d.reason == "duplicate" for d in kb.dropped)
    unsolved = sum(d.reason == "unsolved" for d in kb.dropped)
    print(f"records\t{len(kb)}")
    print(f"solvers\t{len(kb.solvers)}")
    print(f"dropped_duplicate\t{dup}")
    print(f"dropped_unsolved\t{unsolved}")
    return EXIT_OK


def cmd_select(args) -> int:
    kb = _load(args)
    f = extract_features(parse_file(args.cnf))
    result = select_solver(kb, f, args.k, args.distance)
    print(result.chosen_solver)
    for line in result.trace_lines():
        print(line, file=sys.stderr)
    return EXIT_OK


def cmd_solve(args) -> int:
    kb = _load(args)
    try:
        rep = portfolio_solve(kb, args.cnf, args.k, args.distance, fallback=args.fallback,
                              grace=args.grace)
    except AllSolversFailed as exc:
        if exc.report is not None:
            print(exc.report.render())
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(rep.render())
    for line in rep.selection.trace_lines():
        print(line, file=sys.stderr)
    if rep.outcome.status is Status.FAILED:
        return EXIT_FAILURE
    return rep.answer.exit_code if rep.answer is not Answer.UNKNOWN else EXIT_OK


def cmd_evaluate(args) -> int:
    kb = _load(args)
    rep = report(kb, [(d, args.k) for d in args.distances], jobs=args.jobs)
    table = sweep(kb, args.k_range, args.distances, jobs=args.jobs)
    sys.stdout.write(rep.text())
    sys.stdout.write("\n")
    sys.stdout.write(sweep_matrix(table))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(rep.csv())
    if args.sweep_csv:
        with open(args.sweep_csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(sweep_csv(table))
    return EXIT_OK


def _selection_flags(p, kb_required=True):
    p.add_argument("--kb", required=kb_required, help="knowledge base file (v1 CSV)")
    p.add_argument("-k", type=_positive_int, default=DEFAULT_K,
                   help=f"number of neighbours (default {DEFAULT_K})")
    p.add_argument("--distance", type=_distance, default=DistanceVariant.ARGOSMART,
                   help="argosmart (default) or euclidean")
    p.add_argument("--cutoff", type=_positive_float, default=None,
                   help="override the KB cutoff in seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knnportfolio", description="k-nearest-neighbour SAT solver portfolio")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="print the 29 instance features")
    p.add_argument("cnf", nargs="+")
    p.add_argument("--time", action="store_true", help="also report extraction seconds")
    p.add_argument("--csv", action="store_true", help="one CSV row per file in KB column order")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="build a knowledge base from a runtime table")
    p.add_argument("table", help="CSV: instance[,category][,f01..f29],<solver>...")
    p.add_argument("--cnf-dir", default=None)
    p.add_argument("--cutoff", type=_positive_float, default=1500.0)
    p.add_argument("--out", required=True)
    p.add_argument("--solvers", default=None, help="solver manifest TSV")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("select", help="choose a solver for an instance")
    p.add_argument("cnf")
    _selection_flags(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("solve", help="choose and run a solver")
    p.add_argument("cnf")
    _selection_flags(p)
    p.add_argument("--fallback", action="store_true",
                   help="on a failed run, try the next ranked solver")
    p.add_argument("--solvers", default=None, help="solver manifest TSV (default: KB sidecar)")
    p.add_argument("--grace", type=_positive_float, default=1.0,
                   help="seconds between SIGTERM and SIGKILL on timeout")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="leave-one-out report and k sweep")
    _selection_flags(p)
    p.add_argument("--k-range", type=_k_range, default=list(range(1, 31)))
    p.add_argument("--distances", type=_distances,
                   default=[DistanceVariant.ARGOSMART, DistanceVariant.SCALED_EUCLIDEAN])
    p.add_argument("--csv", default=None, help="write report rows to this CSV file")
    p.add_argument("--sweep-csv", default=None, help="write distance,k,solved rows here")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ExecutableNotFound, SpawnFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (PortfolioError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
