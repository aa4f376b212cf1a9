"""Command line interface: ``run``, ``ftest`` and ``inspect``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from collections import defaultdict
from pathlib import Path

from .data import DataError, load_dataset
from .harness import (ProtocolError, build_config, emit_report, f_test, fold_table,
                      parse_config, read_iterations_csv, run_protocol)
from .search import ALGOS
from .trainers import TrainAlgo

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("agcrn")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="agcrn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run the repeated split-and-search protocol")
    p.add_argument("--dataset", required=True, action="append",
                   help="bundled name (cancer, diabetes, glass) or CSV path; repeatable")
    p.add_argument("--algo", default="all", choices=[a.value for a in ALGOS] + ["all"])
    p.add_argument("--seed", type=_u64, default=None)
    p.add_argument("--iterations", type=_positive, default=10)
    p.add_argument("--topology", choices=["moore", "vonneumann"], default=None)
    p.add_argument("--config", type=Path, help="key = value file")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--reference", type=Path,
                   help="iterations.csv of another run to compare against with the F-test")

    p = sub.add_parser("ftest", help="5x2cv F-test between two per-iteration CSV files")
    p.add_argument("--a", type=Path, required=True)
    p.add_argument("--b", type=Path, required=True)
    p.add_argument("--column", default="test_err")

    p = sub.add_parser("inspect", help="print the evolution traces of a result directory")
    p.add_argument("--result", type=Path, required=True)
    p.add_argument("--level", choices=["pra", "paf", "ppi"], default=None)
    return parser


def _cmd_run(args) -> int:
    values = {}
    if args.config is not None:
        try:
            values = parse_config(args.config.read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        except ValueError as exc:
            raise UsageError(f"{args.config}: {exc}") from exc
    if args.seed is not None:
        values["seed"] = args.seed
    if args.topology is not None:
        values["topology"] = parse_config(f"topology = {args.topology}")["topology"]
    try:
        cfg = build_config(values)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    algos = ALGOS if args.algo == "all" else (TrainAlgo(args.algo),)
    reference = read_iterations_csv(args.reference) if args.reference else None

    datasets = [load_dataset(name) for name in args.dataset]
    results = []
    for d in datasets:
        log.info("%s: %d patterns, %d attributes, %d classes", d.name, len(d), d.n_attributes, d.n_classes)
        try:
            results.append(run_protocol(d, cfg, args.iterations, algos))
        except ProtocolError as exc:
            results.append(exc.partial)
            emit_report(results, args.out, cfg, datasets, reference)
            log.error("%s (partial results written to %s)", exc, args.out)
            return EXIT_RUNTIME
    paths = emit_report(results, args.out, cfg, datasets, reference)
    sys.stdout.write(paths["table.txt"].read_text())
    return EXIT_OK


def _cmd_ftest(args) -> int:
    a, b = read_iterations_csv(args.a), read_iterations_csv(args.b)
    ga, gb = _grouped(a), _grouped(b)
    keys = [k for k in ga if k in gb]
    if not keys:
        raise DataError("no (dataset, algo) pair present in both files")
    tests = [(key, f_test(fold_table(ga[key], args.column), fold_table(gb[key], args.column)))
             for key in keys]
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["dataset", "algo", "f_stat", "significant"])
    for key, res in tests:
        writer.writerow([*key, repr(res.statistic), "true" if res.significant else "false"])
    return EXIT_OK


def _grouped(records):
    out = defaultdict(list)
    for r in records:
        out[(r.dataset, r.algo)].append(r)
    return out


def _cmd_inspect(args) -> int:
    root = args.result
    table, traces = root / "table.txt", root / "traces.csv"
    if not traces.exists():
        raise DataError(f"{root}: no traces.csv")
    if table.exists():
        sys.stdout.write(table.read_text() + "\n")
    with open(traces, newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if args.level is None or r["level"] == args.level]
    head = f"{'dataset':<10} {'it':>3} {'algo':<4} {'level':<5} {'bera':>4} {'beafa':>5} {'cell':>4} " \
           f"{'gen':>3} {'best':>12} {'mean':>12} {'repl':>4} {'fail':>4}"
    print(head)
    for r in rows:
        print(f"{r['dataset']:<10} {r['iteration']:>3} {r['algo']:<4} {r['level']:<5} {r['bera']:>4} "
              f"{r['beafa']:>5} {r['cell']:>4} {r['generation']:>3} {float(r['best']):>12.5f} "
              f"{float(r['mean']):>12.5f} {r['replacements']:>4} {r['failures']:>4}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "ftest": _cmd_ftest, "inspect": _cmd_inspect}[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        print(f"agcrn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ValueError, KeyError) as exc:
        print(f"agcrn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"agcrn: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"agcrn: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
