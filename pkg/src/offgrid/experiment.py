"""Experiment harness: configs, per-seed strategy runs, benchmarks and reports.

Trace documents are JSON with a top-level ``"schema": 1``. Everything that
depends on the clock lives under ``"timings"`` so that two runs of the same
config can be compared byte for byte with :func:`deterministic_view`.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import statistics
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import load_csv, pairwise_sq_distances
from .kernel import rbf_kernel
from .kkm import kkm_run, random_partition
from .quality import neighbor_order
from .search import (
    NewtonDivergence,
    SearchTrace,
    binary_search_critical,
    bisection_driver,
    critical_search,
    default_sigma_cap,
    evaluate_sigmas,
    grid_sigmas,
    hierarchical_search,
    mknn_sigmas,
    newton_critical_min,
    resolve_sigma0,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STRATEGIES = ("offgrid", "grid", "mknn", "binsearch", "newton-check")

__all__ = [
    "SCHEMA_VERSION",
    "STRATEGIES",
    "ConfigError",
    "SchemaError",
    "RunConfig",
    "load_dataset",
    "run_experiment",
    "bench",
    "report",
    "deterministic_view",
    "dumps",
]


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


class SchemaError(ValueError):
    """A trace document does not match the expected layout."""


@dataclass
class RunConfig:
    strategy: str
    k: int
    data: str | None = None
    distances: str | None = None
    label_col: int | None = None
    standardize: bool = False
    skip_header: bool = False
    depth: int = 1
    schedule: tuple[int, ...] | None = None
    seeds: tuple[int, ...] = (0,)
    sigma0: str = "percentile:1"
    max_steps: int = 100
    restrict: str = "full"
    precision: float = 1e-3
    mknn_log_base: str = "e"
    max_iters: int = 300
    out: str | None = None

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        if self.schedule is not None:
            self.schedule = tuple(int(d) for d in self.schedule)
        self.validate()

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy: expected one of {', '.join(STRATEGIES)}, got {self.strategy!r}")
        if (self.data is None) == (self.distances is None):
            raise ConfigError("data: give exactly one of a point file or a distance file")
        if not isinstance(self.k, int) or self.k < 1:
            raise ConfigError(f"k: must be a positive integer, got {self.k!r}")
        if not self.seeds:
            raise ConfigError("seeds: need at least one seed")
        if self.depth < 1:
            raise ConfigError(f"depth: must be >= 1, got {self.depth}")
        if self.schedule is not None:
            if not self.schedule or self.schedule[0] < 1:
                raise ConfigError("schedule: must be a nonempty list of depths >= 1")
            if any(b <= a for a, b in zip(self.schedule, self.schedule[1:])):
                raise ConfigError(f"schedule: must be strictly increasing, got {list(self.schedule)}")
        if self.max_steps < 1:
            raise ConfigError(f"max_steps: must be >= 1, got {self.max_steps}")
        if not self.precision > 0:
            raise ConfigError(f"precision: must be positive, got {self.precision}")
        if self.mknn_log_base not in ("e", "2"):
            raise ConfigError(f"mknn_log_base: expected 'e' or '2', got {self.mknn_log_base!r}")
        self.restriction()
        spec = self.sigma0
        if spec != "theorem1":
            try:
                value = float(spec.split(":", 1)[1]) if spec.startswith("percentile:") else float(spec)
            except ValueError:
                raise ConfigError(f"sigma0: expected percentile:q, theorem1 or a number, got {spec!r}") from None
            if spec.startswith("percentile:") and not 0 < value <= 100:
                raise ConfigError(f"sigma0: percentile must be in (0, 100], got {value}")
            if not spec.startswith("percentile:") and not value > 0:
                raise ConfigError(f"sigma0: must be positive, got {value}")
        if self.strategy == "newton-check" and self.k != 2:
            raise ConfigError("k: the newton-check strategy needs k = 2")

    def restriction(self) -> tuple[str, float]:
        if self.restrict in ("full", "movers"):
            return self.restrict, 0.25
        if self.restrict.startswith("margin"):
            _, _, frac = self.restrict.partition(":")
            try:
                value = float(frac) if frac else 0.25
            except ValueError:
                raise ConfigError(f"restrict: bad margin fraction {frac!r}") from None
            if not 0 < value <= 1:
                raise ConfigError(f"restrict: margin fraction must be in (0, 1], got {value}")
            return "margin", value
        raise ConfigError(f"restrict: expected full, movers or margin:<frac>, got {self.restrict!r}")

    @property
    def depths(self) -> tuple[int, ...]:
        return self.schedule if self.schedule is not None else (self.depth,)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        d["schedule"] = list(self.schedule) if self.schedule is not None else None
        d.pop("out")
        return d


@dataclass
class _Loaded:
    name: str
    D: np.ndarray
    labels: np.ndarray | None
    n: int
    d: int | None


def load_dataset(cfg: RunConfig) -> _Loaded:
    """Read the config's point file (or distance file) into a distance matrix."""
    if cfg.data is not None:
        ds = load_csv(cfg.data, cfg.label_col, cfg.standardize, cfg.skip_header)
        return _Loaded(ds.name, pairwise_sq_distances(ds), ds.labels, ds.n, ds.d)
    D = np.loadtxt(cfg.distances, delimiter=",", ndmin=2)
    if D.shape[0] != D.shape[1] or not np.allclose(D, D.T) or np.any(np.diag(D) != 0) or np.any(D < 0):
        raise ConfigError(f"distances: {cfg.distances} is not a symmetric zero-diagonal nonnegative matrix")
    labels = None
    if cfg.label_col is not None:
        raise ConfigError("label_col: not supported with a distance file")
    return _Loaded(Path(cfg.distances).stem, D, labels, D.shape[0], None)


def _strip_timing(trace: SearchTrace) -> tuple[dict, list[float]]:
    doc = trace.as_dict()
    times = [s.pop("wall_time_ms") for s in doc["steps"]]
    return doc, times


def _summary(trace: SearchTrace) -> dict:
    best = trace.best_by_cnnc()
    return {
        "n_sigmas": len(trace.steps),
        "best_cnnc": trace.best_cnnc(),
        "best_nmi": trace.best_nmi(),
        "selected_sigma": best.sigma,
        "selected_nmi": best.nmi,
    }


def _run_seed(cfg: RunConfig, data: _Loaded, seed: int, neighbors: np.ndarray) -> SearchTrace:
    P0 = random_partition(data.n, cfg.k, seed)
    sigma0 = resolve_sigma0(data.D, cfg.sigma0)
    common = dict(labels=data.labels, max_iters=cfg.max_iters, neighbors=neighbors)
    if cfg.strategy == "offgrid":
        policy, fraction = cfg.restriction()
        return hierarchical_search(data.D, cfg.k, sigma0, cfg.depths, P0=P0,
                                   max_steps=cfg.max_steps, restriction_policy=policy,
                                   margin_fraction=fraction, **common)
    if cfg.strategy == "grid":
        return evaluate_sigmas(data.D, cfg.k, grid_sigmas(), P0, method="grid", **common)
    if cfg.strategy == "mknn":
        base = math.e if cfg.mknn_log_base == "e" else 2.0
        return evaluate_sigmas(data.D, cfg.k, mknn_sigmas(data.D, base), P0, method="mknn", **common)
    if cfg.strategy == "binsearch":
        return bisection_driver(data.D, cfg.k, sigma0, cfg.precision, cfg.max_steps, P0=P0, **common)
    raise AssertionError(cfg.strategy)


def _newton_check(cfg: RunConfig, data: _Loaded, seed: int) -> dict:
    # critical bandwidth of the converged partition by three independent methods
    sigma0 = resolve_sigma0(data.D, cfg.sigma0)
    K = rbf_kernel(data.D, sigma0)
    run = kkm_run(K, random_partition(data.n, 2, seed), cfg.max_iters)
    P = run.partition
    out = {"seed": seed, "sigma0": sigma0, "converged": run.converged}
    res = critical_search(K, P, max(cfg.depths[-1], 20))
    out["dyadic"] = res.sigma_next
    bis = binary_search_critical(data.D, sigma0, P, 1e-9 * sigma0, default_sigma_cap(data.D), K=K)
    out["bisection"] = bis.sigma
    try:
        out["newton"] = newton_critical_min(K, P, D=data.D)
        out["newton_error"] = None
    except (NewtonDivergence, ValueError) as exc:
        out["newton"] = None
        out["newton_error"] = str(exc)
    values = [v for v in (out["dyadic"], out["bisection"], out["newton"]) if v is not None]
    out["max_relative_spread"] = (max(values) - min(values)) / min(values) if len(values) > 1 else None
    return out


def _mean(values):
    values = [v for v in values if v is not None]
    return statistics.fmean(values) if values else None


def run_experiment(cfg: RunConfig) -> dict:
    """Run the configured strategy once per seed and return the trace document."""
    data = load_dataset(cfg)
    doc = {
        "schema": SCHEMA_VERSION,
        "kind": "trace",
        "config": cfg.as_dict(),
        "dataset": {"name": data.name, "n": data.n, "d": data.d,
                    "n_classes": None if data.labels is None else int(np.unique(data.labels).size)},
    }
    if cfg.strategy == "newton-check":
        t0 = time.perf_counter()
        doc["checks"] = [_newton_check(cfg, data, s) for s in cfg.seeds]
        doc["timings"] = {"total_ms": (time.perf_counter() - t0) * 1e3}
        return doc

    neighbors = neighbor_order(data.D)
    runs, timings = [], []
    for seed in cfg.seeds:
        trace = _run_seed(cfg, data, seed, neighbors)
        body, times = _strip_timing(trace)
        runs.append({"seed": seed, "summary": _summary(trace), "trace": body})
        timings.append({"seed": seed, "step_ms": times})
    doc["runs"] = runs
    doc["aggregate"] = {
        "n_seeds": len(runs),
        "best_nmi_mean": _mean(r["summary"]["best_nmi"] for r in runs),
        "best_cnnc_mean": _mean(r["summary"]["best_cnnc"] for r in runs),
        "selected_nmi_mean": _mean(r["summary"]["selected_nmi"] for r in runs),
        "n_sigmas_mean": _mean(r["summary"]["n_sigmas"] for r in runs),
    }
    all_steps = [t for entry in timings for t in entry["step_ms"]]
    doc["timings"] = {"per_seed": timings, "mean_iteration_ms": _mean(all_steps)}
    return doc


# --------------------------------------------------------------------------
# benchmark


def _median_ms(fn, repeats: int) -> tuple[float, object]:
    times, result = [], None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(times), result


def bench(
    D: np.ndarray,
    k: int = 2,
    seed: int = 0,
    *,
    depth: int = 10,
    precision: float = 1e-3,
    sigma0: str | float = "percentile:1",
    repeats: int = 3,
    max_iters: int = 300,
) -> dict:
    """Per-iteration time of the dyadic search against bisection on the bandwidth.

    Both searches start from the same converged partition at ``sigma0``. An
    iteration is one candidate kernel built and probed; each method's time
    is divided by the probes it used. Relative errors are against a
    bisection oracle run to ``1e-9`` relative width.
    """
    D = np.asarray(D, dtype=np.float64)
    s0 = resolve_sigma0(D, sigma0)
    K = rbf_kernel(D, s0)
    P = kkm_run(K, random_partition(D.shape[0], k, seed), max_iters).partition
    cap = default_sigma_cap(D)

    t_dy, res = _median_ms(lambda: critical_search(K, P, depth, check_converged=False), repeats)
    t_bi, bis = _median_ms(lambda: binary_search_critical(D, s0, P, precision, cap, K=K), repeats)
    oracle = binary_search_critical(D, s0, P, 1e-9 * s0, cap, K=K)

    def rel(v):
        if v is None or oracle.sigma is None:
            return None
        return abs(v - oracle.sigma) / oracle.sigma

    per_dy = t_dy / max(1, res.probes)
    per_bi = t_bi / max(1, bis.probes)
    return {
        "n": int(D.shape[0]),
        "k": k,
        "seed": seed,
        "depth": depth,
        "precision": precision,
        "found": res.found and oracle.found,
        "offgrid_probes": res.probes,
        "binsearch_probes": bis.probes,
        "offgrid_iteration_ms": per_dy,
        "binsearch_iteration_ms": per_bi,
        "speedup": per_bi / per_dy if per_dy > 0 else None,
        "offgrid_rel_error": rel(res.sigma_next),
        "binsearch_rel_error": rel(bis.sigma),
    }


def bench_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    fields = ["n", "offgrid_iteration_ms", "binsearch_iteration_ms", "speedup",
              "offgrid_rel_error", "binsearch_rel_error"]
    writer = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


# --------------------------------------------------------------------------
# report


def _check_trace_doc(doc: dict, where: str) -> None:
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA_VERSION:
        raise SchemaError(f"{where}: expected schema {SCHEMA_VERSION}, got {doc.get('schema') if isinstance(doc, dict) else type(doc).__name__}")
    if doc.get("kind") != "trace":
        raise SchemaError(f"{where}: not a trace document")
    for key in ("config", "dataset"):
        if key not in doc:
            raise SchemaError(f"{where}: missing {key!r}")
    if "runs" not in doc and "checks" not in doc:
        raise SchemaError(f"{where}: missing 'runs'")
    for r in doc.get("runs", []):
        if not {"seed", "summary", "trace"} <= set(r):
            raise SchemaError(f"{where}: malformed run entry")
        for s in r["trace"]["steps"]:
            if not {"sigma", "cnnc", "kkm_iterations"} <= set(s):
                raise SchemaError(f"{where}: malformed step in seed {r['seed']}")


def report(docs: Sequence[dict], names: Sequence[str] | None = None) -> tuple[str, str]:
    """Aggregate trace documents into an aligned text table and a CSV.

    Rows are grouped by (dataset, strategy); columns are means over all
    seeds in the group. Nothing is recomputed from the data.
    """
    names = list(names) if names is not None else [f"doc{i}" for i in range(len(docs))]
    groups: dict[tuple[str, str], list[dict]] = {}
    for doc, name in zip(docs, names):
        _check_trace_doc(doc, name)
        key = (doc["dataset"]["name"], doc["config"]["strategy"])
        groups.setdefault(key, []).extend(doc.get("runs", []))
    rows = []
    for (dataset, strategy), runs in groups.items():
        rows.append({
            "dataset": dataset,
            "strategy": strategy,
            "seeds": len(runs),
            "best_nmi": _mean(r["summary"]["best_nmi"] for r in runs),
            "best_cnnc": _mean(r["summary"]["best_cnnc"] for r in runs),
            "n_sigmas": _mean(r["summary"]["n_sigmas"] for r in runs),
        })
    cols = ["dataset", "strategy", "seeds", "best_nmi", "best_cnnc", "n_sigmas"]

    def fmt(v):
        if v is None:
            return "-"
        return f"{v:.4f}" if isinstance(v, float) else str(v)

    cells = [cols] + [[fmt(r[c]) for c in cols] for r in rows]
    widths = [max(len(row[j]) for row in cells) for j in range(len(cols))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return "\n".join(lines) + "\n", buf.getvalue()


# --------------------------------------------------------------------------
# serialization


def deterministic_view(doc: dict) -> dict:
    """The document without its clock-dependent fields."""
    return {k: v for k, v in doc.items() if k != "timings"}


def dumps(doc: dict) -> str:
    """Canonical JSON: sorted keys and shortest round-trip floats."""
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False)


def write_doc(doc: dict, path: str | Path | None) -> str:
    text = dumps(doc) + "\n"
    if path is None or str(path) == "-":
        print(text, end="")
    else:
        Path(path).write_text(text)
    return text
