"""Command line entry point: ``activediag {gen,run,time}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from . import oracle
from .harness import (
    DEFAULT_INHIBITION,
    DEFAULT_LEAK,
    DEFAULT_PRIOR,
    SELECTORS,
    ExperimentConfig,
    build_network,
    run_experiment,
    timing_probe,
)
from .model import QmrDtNoiseModel, validate
from .netgen import generate_pa_bdg, save_graph


def _probability(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="activediag",
        description="Active fault diagnosis on bipartite noisy-OR networks.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a preferential-attachment BDG file")
    gen.add_argument("--objects", type=_positive, default=300, help="number of objects (default 300)")
    gen.add_argument("--queries", type=_positive, default=300, help="number of queries (default 300)")
    gen.add_argument("--edges-per-query", type=_positive, default=3, help="parents per query (default 3)")
    gen.add_argument("--prior", type=_probability, default=DEFAULT_PRIOR, help="fault prior (default 0.03)")
    gen.add_argument("--leak", type=_probability, default=DEFAULT_LEAK, help="leak probability (default 0.05)")
    gen.add_argument(
        "--inhibition", type=_probability, default=DEFAULT_INHIBITION, help="inhibition probability (default 0.05)"
    )
    gen.add_argument("--seed", type=int, default=0, help="generator seed (default 0)")
    gen.add_argument("-o", "--out", default="-", help="output file, '-' for stdout (default)")

    run = sub.add_parser("run", help="run a diagnosis experiment and write CSV")
    run.add_argument("--seed", type=int, required=True, help="master seed (required)")
    run.add_argument(
        "--selectors", nargs="+", choices=SELECTORS, default=["auc_sf", "entropy_sf", "random"],
        help="selectors to compare (default: auc_sf entropy_sf random)",
    )
    run.add_argument("--budget", type=int, default=50, help="queries per episode (default 50)")
    run.add_argument("--realizations", type=_positive, default=200, help="episodes per selector (default 200)")
    run.add_argument("--graph", help="BDG v1 file; otherwise a PA graph is generated")
    run.add_argument("--objects", type=_positive, default=100, help="generated graph objects (default 100)")
    run.add_argument("--queries", type=_positive, default=100, help="generated graph queries (default 100)")
    run.add_argument("--edges-per-query", type=_positive, default=3, help="generated graph fan-out (default 3)")
    run.add_argument("--graph-seed", type=int, help="seed for graph generation (default: --seed)")
    run.add_argument("--prior", type=_probability, help="override fault prior (default 0.03, or file values)")
    run.add_argument("--leak", type=_probability, help="override leak probability (default 0.05, or file values)")
    run.add_argument("--inhibition", type=_probability, help="override inhibition (default 0.05, or file values)")
    run.add_argument("--likelihood-floor", action="store_true", help="clip likelihoods at 1e-300 instead of aborting")
    run.add_argument("--oracle-entropy", action="store_true", help="record exact conditional entropy (small M)")
    run.add_argument(
        "--oracle-size-limit", type=_positive, default=oracle.DEFAULT_SIZE_LIMIT,
        help=f"max objects for exact enumeration (default {oracle.DEFAULT_SIZE_LIMIT})",
    )
    run.add_argument(
        "--record-time", action="store_true",
        help="fill select_time_us (makes output timing dependent)",
    )
    run.add_argument("--jobs", type=_positive, default=1, help="worker processes (default 1)")
    run.add_argument("-o", "--out", default="episodes.csv", help="per-episode CSV (default episodes.csv)")
    run.add_argument("--summary", help="summary CSV (default <out stem>.summary.csv)")
    run.add_argument("--meta", help="metadata JSON (default <out stem>.meta.json)")

    tm = sub.add_parser("time", help="time one AUC selection on square PA graphs")
    tm.add_argument("--sizes", type=_positive, nargs="+", default=[250, 500, 1000, 2000], help="values of M = N")
    tm.add_argument("--repeats", type=_positive, default=5, help="timed calls per size (default 5)")
    tm.add_argument("--seed", type=int, default=0, help="seed (default 0)")
    tm.add_argument("-o", "--out", default="-", help="output CSV, '-' for stdout (default)")
    return parser


def _cmd_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.edges_per_query > args.objects:
        raise ValueError("--edges-per-query cannot exceed --objects")
    graph = generate_pa_bdg(args.objects, args.queries, args.edges_per_query, rng)
    model = QmrDtNoiseModel.uniform(graph, args.prior, args.leak, args.inhibition)
    save_graph(graph, model, sys.stdout if args.out == "-" else args.out)
    return 0


def _cmd_run(args) -> int:
    config = ExperimentConfig(
        seed=args.seed,
        selectors=tuple(args.selectors),
        budget=args.budget,
        realizations=args.realizations,
        graph_path=args.graph,
        num_objects=args.objects,
        num_queries=args.queries,
        edges_per_query=args.edges_per_query,
        graph_seed=args.graph_seed,
        prior=args.prior,
        leak=args.leak,
        inhibition=args.inhibition,
        likelihood_floor=args.likelihood_floor,
        oracle_entropy=args.oracle_entropy,
        oracle_size_limit=args.oracle_size_limit,
        record_time=args.record_time,
        jobs=args.jobs,
    )
    graph, model = build_network(config)
    problems = validate(graph, model)
    if problems:
        raise ValueError("invalid network:\n  " + "\n  ".join(problems))
    result = run_experiment(config, graph, model)
    result.write(args.out, args.summary, args.meta)
    meta = result.metadata()
    logging.getLogger("activediag").info(
        "wrote %s (%d realizations skipped, %d episodes aborted)",
        args.out, meta["skipped_count"], len(meta["aborted_episodes"]),
    )
    return 0


def _cmd_time(args) -> int:
    rows = timing_probe(args.sizes, np.random.default_rng(args.seed), repeats=args.repeats)
    out = sys.stdout if args.out == "-" else open(args.out, "w", encoding="utf-8", newline="\n")
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["num_objects", "num_queries", "median_seconds"])
        for r in rows:
            w.writerow([r["num_objects"], r["num_queries"], repr(r["median_seconds"])])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handler = {"gen": _cmd_gen, "run": _cmd_run, "time": _cmd_time}[args.command]
    try:
        return handler(args)
    except (OSError, ValueError) as exc:
        print(f"activediag: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
