"""Command line entry point: ``shiftcut {cluster,oracle,invariance,bench,gen}``.

Exit status is 0 on success, 2 on invalid input and 3 on I/O failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import __version__
from .errors import ValidationError
from .matrix import ShiftSpec
from .optimizer import SearchConfig, brute_force_optimum, local_search, sweep_timing_probe
from .workbench import (
    METHODS,
    PAYLOAD_KINDS,
    ExperimentSpec,
    emit_report,
    generate_blobs,
    generate_line_dataset,
    load_csv,
    run_experiment,
    save_csv,
)

log = logging.getLogger("shiftcut")

EXIT_VALIDATION = 2
EXIT_IO = 3


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="CSV file")
    p.add_argument("--kind", choices=PAYLOAD_KINDS, default="features")
    p.add_argument("--labels", action="store_true", help="last column holds ground-truth labels")


def _shift(text: str) -> ShiftSpec:
    try:
        return ShiftSpec.parse(text)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shiftcut", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="run the restart protocol and write a report")
    _add_input(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--shift", type=_shift, default=ShiftSpec("adaptive"),
                   help="none, adaptive or const:<alpha> (default adaptive)")
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--methods", default="shifted_min_cut",
                   help=f"comma-separated subset of {','.join(METHODS)}")
    p.add_argument("--max-sweeps", type=int, default=1000)
    p.add_argument("--report", help="output path; printed to stdout when omitted")
    p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("oracle", help="compare local search with exhaustive search (n <= 12)")
    _add_input(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--shift", type=_shift, default=ShiftSpec("adaptive"))
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("invariance", help="run the shift-invariance checks on seeded random data")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bench", help="time single local-search sweeps")
    p.add_argument("--n", default="500,1000,2000", help="comma-separated object counts")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("gen", help="write a synthetic dataset as CSV (labels in last column)")
    p.add_argument("dataset", choices=("line", "blobs"))
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=3, help="blobs only")
    p.add_argument("--per-cluster", type=int, default=20, help="blobs only")
    p.add_argument("--dims", type=int, default=2, help="blobs only")
    return parser


def _cmd_cluster(args) -> int:
    ds = load_csv(args.input, args.kind, args.labels)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    spec = ExperimentSpec(ds, k=args.k, shift=args.shift, restarts=args.restarts, seed=args.seed,
                          methods=methods, max_sweeps=args.max_sweeps, score=args.labels)
    report = run_experiment(spec)
    if args.report:
        emit_report(report, args.report, args.format)
        log.info("report written to %s", args.report)
    else:
        print(json.dumps(report, indent=2))
    return 0


def _cmd_oracle(args) -> int:
    ds = load_csv(args.input, args.kind, args.labels)
    s = args.shift.apply(ds.similarity_matrix())
    labels, cost = brute_force_optimum(s, args.k)
    rep = local_search(s, SearchConfig(k=args.k, restarts=args.restarts, seed=args.seed))
    print(f"exhaustive optimum  cost={cost:.10g} labels={labels.tolist()}")
    print(f"local search        cost={rep.best_cost:.10g} labels={rep.best_labels.labels.tolist()}")
    print(f"restarts reaching optimum: "
          f"{int(np.sum(np.isclose(rep.per_restart_final_costs, cost, rtol=1e-10, atol=0)))}/{args.restarts}")
    return 0


def _cmd_invariance(args) -> int:
    from . import invariance as inv

    rng = np.random.default_rng(args.seed)
    failures = 0
    for t in range(args.trials):
        pts = rng.standard_normal((args.n, 3))
        d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
        for crit in inv.LINKAGES:
            for alpha in (-2.0, 0.5, 10.0):
                ok = inv.check_linkage_shift_invariance(d, alpha, crit).holds()
                failures += not ok
        shift = rng.uniform(-100, 100, 3)
        for method in ("kmeans", *inv.FEATURE_LINKAGES):
            failures += not inv.check_feature_shift_invariance(pts, shift, method, k=3, seed=t).same
        v = rng.dirichlet(np.ones(args.n))
        x = rng.standard_normal((args.n, args.n))
        x = x + x.T
        f0, f1 = inv.quadratic_objective(x, v, 3.5)
        failures += not abs(f1 - f0 - 3.5) <= 1e-10 * max(1.0, abs(f1))
    print(f"{args.trials} trials, {failures} failed checks")
    return 0 if failures == 0 else 1


def _cmd_bench(args) -> int:
    ns = [int(v) for v in args.n.split(",")]
    for row in sweep_timing_probe(ns, args.k, args.seed):
        ratio = "" if row["ratio"] is None else f"  ratio={row['ratio']:.2f}"
        print(f"n={row['n']:6d} k={row['k']:3d} sweep={row['seconds'] * 1e3:9.3f} ms{ratio}")
    return 0


def _cmd_gen(args) -> int:
    if args.dataset == "line":
        ds = generate_line_dataset(seed=args.seed)
    else:
        ds = generate_blobs(k=args.k, per_cluster=args.per_cluster, dims=args.dims, seed=args.seed)
    save_csv(ds, args.output)
    print(f"wrote {ds.n} objects to {args.output}")
    return 0


COMMANDS = {
    "cluster": _cmd_cluster,
    "oracle": _cmd_oracle,
    "invariance": _cmd_invariance,
    "bench": _cmd_bench,
    "gen": _cmd_gen,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
