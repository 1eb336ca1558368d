"""Command-line entry point: ``offgrid <subcommand> [options]``.

Exit status is 0 on success, 2 for configuration or input errors and 3 for
failures while running. ``OFFGRID_THREADS`` caps the BLAS/OpenMP thread
pools; all randomness comes from ``--seeds``.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from .data import DataError, generate_tight_example, pairwise_sq_distances, save_distance_csv
from .experiment import (
    ConfigError,
    RunConfig,
    SchemaError,
    bench,
    bench_csv,
    dumps,
    load_dataset,
    report,
    run_experiment,
    write_doc,
)
from .kernel import KernelError, rbf_kernel
from .kkm import kkm_run, random_partition
from .quality import cnnc
from .search import resolve_sigma0, sigma_lower_bound

logger = logging.getLogger("offgrid")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
THREADS_ENV = "OFFGRID_THREADS"


def _int_list(text: str) -> list[int]:
    """``"0,1,2"`` or a range ``"0:50"`` (end exclusive)."""
    text = text.strip()
    try:
        if ":" in text:
            lo, hi = text.split(":", 1)
            return list(range(int(lo), int(hi)))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers like 0,1,2 or 0:50, got {text!r}") from None


def _add_data_args(p: argparse.ArgumentParser) -> None:
    src = p.add_argument_group("input")
    src.add_argument("--data", help="CSV of points, one per row")
    src.add_argument("--distances", help="CSV square matrix of squared distances instead of points")
    src.add_argument("--label-col", type=int, default=None, help="zero-based label column (negative counts from the end)")
    src.add_argument("--standardize", action="store_true", help="scale features to unit variance")
    src.add_argument("--skip-header", action="store_true", help="ignore the first row")


def _add_run_args(p: argparse.ArgumentParser, *, search: bool = False) -> None:
    _add_data_args(p)
    p.add_argument("--k", type=int, required=True, help="number of clusters")
    p.add_argument("--seeds", type=_int_list, default=[0], help="seeds for the initial partitions")
    p.add_argument("--sigma0", default="percentile:1", help="percentile:<q> | theorem1 | <value>")
    p.add_argument("--max-iters", type=int, default=300, help="kernel k-means iteration cap")
    p.add_argument("--out", default=None, help="output JSON path (default stdout)")
    if search:
        p.add_argument("--depth", type=int, default=1)
        p.add_argument("--schedule", type=_int_list, default=None, help="increasing depths, e.g. 1,2")
        p.add_argument("--max-steps", type=int, default=100)
        p.add_argument("--restrict", default="full", help="full | movers | margin:<frac>")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="offgrid", description="RBF bandwidth search for kernel k-means")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="kernel k-means at one bandwidth")
    _add_run_args(p)
    p.add_argument("--sigma", default=None, help="bandwidth (overrides --sigma0)")

    p = sub.add_parser("search", help="off-the-grid bandwidth search")
    _add_run_args(p, search=True)

    p = sub.add_parser("grid", help="kernel k-means on the 1e-6..1e6 grid")
    _add_run_args(p)

    p = sub.add_parser("mknn", help="kernel k-means at mean k-NN distance bandwidths")
    _add_run_args(p)
    p.add_argument("--log-base", choices=["e", "2"], default="e", help="log base of the neighbour range")

    p = sub.add_parser("binsearch", help="bandwidth bisection baseline")
    _add_run_args(p, search=True)
    p.add_argument("--precision", type=float, default=1e-3)

    p = sub.add_parser("newton-check", help="compare dyadic, bisection and Newton critical bandwidths (k=2)")
    _add_run_args(p, search=True)

    p = sub.add_parser("bench", help="time the dyadic search against bisection")
    _add_data_args(p)
    p.add_argument("--synthetic", type=_int_list, default=None, help="sizes of synthetic blob datasets, e.g. 1000,2000")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--seeds", type=_int_list, default=[0])
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--precision", type=float, default=1e-3)
    p.add_argument("--sigma0", default="percentile:1")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--out", default=None, help="output JSON path (default stdout)")
    p.add_argument("--csv", default=None, help="also write size/time rows as CSV")

    p = sub.add_parser("report", help="summarize trace files")
    p.add_argument("traces", nargs="+")
    p.add_argument("--out", default=None, help="text table path (default stdout)")
    p.add_argument("--csv", default=None, help="also write the table as CSV")

    p = sub.add_parser("gen-tight", help="write the instance on which the lower bound is tight")
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n2", type=int, required=True)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--out", required=True, help="distance matrix CSV")
    p.add_argument("--labels-out", default=None, help="ground-truth labels, one per line")
    return parser


_STRATEGY = {"search": "offgrid", "grid": "grid", "mknn": "mknn",
             "binsearch": "binsearch", "newton-check": "newton-check", "cluster": "offgrid"}


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        strategy=_STRATEGY[args.command],
        k=args.k,
        data=args.data,
        distances=args.distances,
        label_col=args.label_col,
        standardize=args.standardize,
        skip_header=args.skip_header,
        depth=getattr(args, "depth", 1),
        schedule=getattr(args, "schedule", None),
        seeds=tuple(args.seeds),
        sigma0=args.sigma0 if getattr(args, "sigma", None) is None else str(args.sigma),
        max_steps=getattr(args, "max_steps", 100),
        restrict=getattr(args, "restrict", "full"),
        precision=getattr(args, "precision", 1e-3),
        mknn_log_base=getattr(args, "log_base", "e"),
        max_iters=args.max_iters,
        out=args.out,
    )


def _cmd_cluster(cfg: RunConfig) -> dict:
    data = load_dataset(cfg)
    sigma = resolve_sigma0(data.D, cfg.sigma0)
    K = rbf_kernel(data.D, sigma)
    runs = []
    for seed in cfg.seeds:
        run = kkm_run(K, random_partition(data.n, cfg.k, seed), cfg.max_iters)
        quality = cnnc(run.partition, data.D, labels=data.labels)
        runs.append({
            "seed": seed,
            "assignment": run.partition.assignment.tolist(),
            "iterations": run.iterations,
            "converged": run.converged,
            "objective": run.objectives[-1],
            "quality": quality.as_dict(),
        })
    return {
        "schema": 1,
        "kind": "cluster",
        "config": cfg.as_dict(),
        "sigma": sigma,
        "lower_bound": sigma_lower_bound(data.D).sigma,
        "runs": runs,
    }


def _synthetic(n: int, seed: int) -> np.ndarray:
    from sklearn.datasets import make_blobs

    X, _ = make_blobs(n_samples=n, centers=3, n_features=2, random_state=seed)
    return pairwise_sq_distances(X)


def _cmd_bench(args) -> dict:
    datasets = []
    if args.synthetic:
        for n in args.synthetic:
            if n < 3:
                raise ConfigError(f"synthetic: sizes must be >= 3, got {n}")
            datasets.append((f"blobs{n}", lambda seed, n=n: _synthetic(n, seed)))
    if args.data or args.distances:
        cfg = RunConfig("offgrid", args.k, args.data, args.distances, args.label_col,
                        args.standardize, args.skip_header, seeds=tuple(args.seeds))
        loaded = load_dataset(cfg)
        datasets.append((loaded.name, lambda seed: loaded.D))
    if not datasets:
        raise ConfigError("data: give --data, --distances or --synthetic")
    rows = []
    for name, make in datasets:
        for seed in args.seeds:
            row = bench(make(seed), args.k, seed, depth=args.depth, precision=args.precision,
                        sigma0=args.sigma0, repeats=args.repeats)
            row["dataset"] = name
            rows.append(row)
    if args.csv:
        Path(args.csv).write_text(bench_csv(rows))
    return {"schema": 1, "kind": "bench", "rows": rows}


def _cmd_report(args) -> None:
    docs = []
    for path in args.traces:
        try:
            docs.append(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not JSON ({exc})") from None
    table, table_csv = report(docs, args.traces)
    if args.out:
        Path(args.out).write_text(table)
    else:
        print(table, end="")
    if args.csv:
        Path(args.csv).write_text(table_csv)


def _cmd_gen_tight(args) -> None:
    ex = generate_tight_example(args.n1, args.n2, args.eps)
    save_distance_csv(ex.distances, args.out)
    if args.labels_out:
        np.savetxt(args.labels_out, ex.labels, fmt="%d")
    print(dumps({"n": ex.n, "special": ex.special, "sigma": ex.sigma, "eps": ex.eps}))


def _thread_limit():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return nullcontext()
    try:
        threads = int(value)
        if threads < 1:
            raise ValueError
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}: expected a positive integer, got {value!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=threads)


def run(args: argparse.Namespace) -> None:
    with _thread_limit():
        if args.command == "report":
            _cmd_report(args)
        elif args.command == "gen-tight":
            _cmd_gen_tight(args)
        elif args.command == "bench":
            write_doc(_cmd_bench(args), args.out)
        elif args.command == "cluster":
            write_doc(_cmd_cluster(config_from_args(args)), args.out)
        else:
            cfg = config_from_args(args)
            write_doc(run_experiment(cfg), cfg.out)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except (ConfigError, DataError, SchemaError, FileNotFoundError, KernelError) as exc:
        print(f"offgrid: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        logger.debug("failure", exc_info=True)
        print(f"offgrid: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
