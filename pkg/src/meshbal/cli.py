"""Command-line front end.

    meshbal partition MESH --method rtk --p 4 --out parts.csv
    meshbal sfc-dump MESH --method hilbert --mode preserve --out keys.csv
    meshbal bench SCENARIO --method rtk --out records.jsonl

Exit codes: 0 ok, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import contextlib
import statistics
import sys

import numpy as np

from .errors import InvalidArgumentError, MeshBalError
from .harness import Method, iter_scenario, load_scenario
from .mesh import load_mesh
from .metrics import quality_report
from .part1d import partition_1d
from .rtree import RefinementForest, partition_serial
from .sfc import MAX_ORDER, CurveKind, NormalizeMode, element_keys, key_fraction

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class _UsageError(Exception):
    pass


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _common(sub, methods, default_method, scenario=False):
    # bench leaves unset flags as None so the scenario file keeps its values
    sub.add_argument("--method", choices=methods, default=default_method)
    sub.add_argument(
        "--mode",
        choices=[m.value for m in NormalizeMode],
        default=None if scenario else NormalizeMode.PRESERVE_ASPECT.value,
    )
    sub.add_argument("--order", type=int, default=None if scenario else MAX_ORDER, help=f"bits per axis, 1..{MAX_ORDER}")
    sub.add_argument("--workers", type=int, default=None if scenario else 1)
    sub.add_argument("--out", help="output path (default: stdout)")
    sub.add_argument("--seed", type=int, help="weight seed (bench only; accepted everywhere)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meshbal", description=__doc__.split("\n\n")[0])
    subs = parser.add_subparsers(dest="command", required=True)

    part = subs.add_parser("partition", help="partition a tetmesh v1 file once")
    part.add_argument("mesh")
    _common(part, ["rtk", "morton", "hilbert"], "rtk")
    part.add_argument("--p", type=int, required=True)
    part.add_argument("--k", type=int, default=4)
    part.add_argument("--report", help="quality report JSON path (default: <out>.report.json)")

    dump = subs.add_parser("sfc-dump", help="write element_id,key CSV")
    dump.add_argument("mesh")
    _common(dump, ["morton", "hilbert"], "hilbert")

    bench = subs.add_parser("bench", help="run an adaptive scenario")
    bench.add_argument("scenario")
    _common(bench, ["rtk", "morton", "hilbert"], None, scenario=True)
    bench.add_argument("--p", type=int)
    bench.add_argument("--k", type=int)
    bench.add_argument("--steps", type=int)
    bench.add_argument("--timings", action="store_true", help="include wall-clock fields in records")
    return parser


def _validate(parser, args):
    if args.order is not None and not 1 <= args.order <= MAX_ORDER:
        parser.error(f"--order must be in [1, {MAX_ORDER}], got {args.order}")
    if args.workers is not None and args.workers < 1:
        parser.error("--workers must be >= 1")
    if getattr(args, "p", None) is not None and args.p < 1:
        parser.error(f"--p must be >= 1, got {args.p}")
    if getattr(args, "k", None) is not None and args.k < 2:
        parser.error(f"--k must be >= 2, got {args.k}")
    if getattr(args, "steps", None) is not None and args.steps < 1:
        parser.error(f"--steps must be >= 1, got {args.steps}")
    if getattr(args, "seed", None) is not None and args.seed < 0:
        parser.error("--seed must be nonnegative")


def cmd_partition(args) -> int:
    mesh = load_mesh(args.mesh)
    weights = mesh.weights()
    forest = RefinementForest.from_mesh(mesh)
    if args.method == "rtk":
        labels = partition_serial(forest, weights, args.p)
    else:
        keyed = element_keys(mesh, NormalizeMode(args.mode), CurveKind(args.method), args.order, args.workers)
        ids = np.array([e for e, _, _ in keyed], dtype=np.int64)
        keys = key_fraction([k for _, k, _ in keyed], args.order)
        w = np.array([w for _, _, w in keyed], dtype=float)
        _, labels = partition_1d((keys, w, ids), args.p, args.k, workers=args.workers)

    report = quality_report(mesh, None, labels, None, weights, args.p, forest)
    with _output(args.out) as fh:
        fh.write("element_id,part\n")
        for eid in mesh.element_ids():
            fh.write(f"{eid},{labels[eid]}\n")
    report_path = args.report or (f"{args.out}.report.json" if args.out and args.out != "-" else None)
    if report_path:
        with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report.to_json() + "\n")
    else:
        print(report.to_json(), file=sys.stderr)
    return EXIT_OK


def cmd_sfc_dump(args) -> int:
    mesh = load_mesh(args.mesh)
    keyed = element_keys(mesh, NormalizeMode(args.mode), CurveKind(args.method), args.order, args.workers)
    with _output(args.out) as fh:
        fh.write("element_id,key\n")
        for eid, key, _ in keyed:
            fh.write(f"{eid},{key}\n")
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        scenario = load_scenario(
            args.scenario,
            method=args.method,
            mode=args.mode,
            order=args.order,
            p=args.p,
            k=args.k,
            seed=args.seed,
            steps=args.steps,
            workers=args.workers,
        )
    except InvalidArgumentError as exc:
        raise _UsageError(str(exc)) from None

    rows = []
    summary_to = sys.stdout if args.out and args.out != "-" else sys.stderr
    with _output(args.out) as fh:
        for rec in iter_scenario(scenario):
            fh.write(rec.to_json(args.timings) + "\n")
            rows.append(rec)
    print(
        f"method={Method(scenario.method).value} mode={scenario.mode.value} p={scenario.p} steps={len(rows)}",
        file=summary_to,
    )
    print(f"{'mean_imbalance':>16} {'mean_edge_cut':>14} {'mean_migration':>15}", file=summary_to)
    print(
        f"{statistics.fmean(r.report.imbalance for r in rows):16.6f}"
        f" {statistics.fmean(r.report.interface_faces for r in rows):14.3f}"
        f" {statistics.fmean(r.report.migration_fraction for r in rows):15.6f}",
        file=summary_to,
    )
    return EXIT_OK


_COMMANDS = {"partition": cmd_partition, "sfc-dump": cmd_sfc_dump, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        _validate(parser, args)
    except SystemExit as exc:
        return int(exc.code)
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"meshbal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        name = exc.filename if exc.filename is not None else ""
        print(f"meshbal: error: cannot access {name!r}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except MeshBalError as exc:
        print(f"meshbal: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
