"""Bandwidth search for kernel k-means with an RBF kernel.

The main entry points are

* :func:`sigma_lower_bound`: below ``d_min / ln(3n)`` kernel k-means never
  moves a point, whatever the partition.
* :func:`critical_search`: given a partition converged under ``K``, find
  the smallest larger bandwidth at which it would change, by walking a
  dyadic exponent ``e`` of ``K`` with one square root, one entry-wise
  product or quotient, and one single-iteration probe per step.
* :func:`offgrid_driver` / :func:`hierarchical_search`: chain critical
  searches and k-means runs to enumerate every bandwidth where the
  clustering changes.

Baselines (Newton root finding, plain bisection on the bandwidth, mean
k-NN distances and the log grid) live here too, so they share the probe.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .data import min_offdiag, percentile_sq_distance
from .fastexp import DyadicExponent
from .kernel import (
    KernelMatrix,
    elementwise_sqrt,
    hadamard,
    hadamard_div,
    rbf_kernel,
    rebase,
    reparametrize_exact,
)
from .kkm import (
    Partition,
    kkm_run,
    margin_ranking,
    probe_changes,
    proximity_table,
    random_partition,
)
from .quality import cnnc, neighbor_order

logger = logging.getLogger(__name__)

__all__ = [
    "BandwidthBound",
    "NotConvergedError",
    "NewtonDivergence",
    "SearchCounter",
    "CriticalSearchResult",
    "TraceStep",
    "SearchTrace",
    "BisectionResult",
    "sigma_lower_bound",
    "default_sigma_cap",
    "resolve_sigma0",
    "critical_search",
    "offgrid_driver",
    "hierarchical_search",
    "newton_critical",
    "newton_g",
    "newton_critical_min",
    "binary_search_critical",
    "bisection_driver",
    "mknn_sigmas",
    "grid_sigmas",
    "evaluate_sigmas",
]


class NotConvergedError(RuntimeError):
    """The partition handed to a critical search is not a fixed point of ``K``."""


class NewtonDivergence(ArithmeticError):
    """Newton iteration left the admissible range, stalled, or ran out of steps."""


# --------------------------------------------------------------------------
# lower bound


class BandwidthBound(NamedTuple):
    sigma: float
    d_min: float
    n: int
    degenerate: bool

    def __float__(self):
        return self.sigma


def sigma_lower_bound(D: np.ndarray) -> BandwidthBound:
    """``d_min / ln(3n)``: at or below this bandwidth no point is ever reassigned.

    Duplicate points make ``d_min`` zero; the bound is then 0 and flagged
    degenerate.
    """
    D = np.asarray(D)
    n = D.shape[0]
    if n < 2:
        raise ValueError("need at least 2 points")
    d_min = min_offdiag(D)
    if d_min <= 0:
        logger.warning("duplicate points: bandwidth lower bound is 0")
        return BandwidthBound(0.0, 0.0, n, True)
    return BandwidthBound(d_min / math.log(3 * n), d_min, n, False)


def default_sigma_cap(D: np.ndarray) -> float:
    return 1e3 * float(np.max(D))


def resolve_sigma0(D: np.ndarray, spec: str | float) -> float:
    """Parse ``"percentile:q"``, ``"theorem1"`` or a number into a bandwidth."""
    if isinstance(spec, (int, float)):
        value = float(spec)
    elif spec == "theorem1":
        bound = sigma_lower_bound(D)
        if bound.degenerate:
            raise ValueError("theorem1 start is 0 for data with duplicate points")
        value = bound.sigma
    elif spec.startswith("percentile:"):
        value = percentile_sq_distance(D, float(spec.split(":", 1)[1]))
    else:
        value = float(spec)
    if not value > 0:
        raise ValueError(f"starting bandwidth must be positive, got {value!r} from {spec!r}")
    return value


# --------------------------------------------------------------------------
# dyadic critical search


@dataclass
class SearchCounter:
    """Operation counts of one critical search (the convergence check is separate)."""

    sqrts: int = 0
    hadamards: int = 0
    probes: int = 0
    check_probes: int = 0
    validation_disagreements: int = 0


@dataclass
class CriticalSearchResult:
    """Outcome of :func:`critical_search`.

    ``exponent`` is the largest probed exponent of ``K`` at which the
    partition changed; ``upper`` is the smallest at which it did not, with
    ``upper - exponent.value == 2**-depth``. ``sigma_next`` is the
    corresponding bandwidth ``sigma / e``.
    """

    found: bool
    exponent: DyadicExponent | None
    upper: Fraction
    sigma_next: float | None
    K_next: KernelMatrix | None
    movers: np.ndarray
    probes: int
    depth: int
    counter: SearchCounter = field(default_factory=SearchCounter)


def _restriction_rows(policy: str, K: KernelMatrix, P: Partition, fraction: float):
    if policy == "margin":
        ranked = margin_ranking(proximity_table(K, P), P)
        if ranked.size == 0:
            return None
        keep = max(1, math.ceil(fraction * P.n))
        return np.sort(ranked[:keep])
    return None


def critical_search(
    K: KernelMatrix,
    P: Partition,
    depth: int,
    restriction_policy: str = "full",
    *,
    margin_fraction: float = 0.25,
    check_converged: bool = True,
    validate: bool = False,
) -> CriticalSearchResult:
    """Locate the next bandwidth at which ``P`` stops being a fixed point.

    Walks the exponent ``e`` of ``K`` through dyadic rationals: ``R`` holds
    ``K ** 2**-j`` (one square root per step) and the candidate ``C = K ** e``
    is multiplied by ``R`` after a probe that saw a change (raise ``e``,
    i.e. shrink the bandwidth back towards the critical value) and divided by
    ``R`` otherwise. ``e`` starts at 1, where ``P`` is stable, so the first
    candidate is ``K ** 1/2``.

    ``restriction_policy`` is ``"full"`` (probe every point), ``"movers"``
    (after the first observed change only re-check the points that moved
    then) or ``"margin"`` (only the ``margin_fraction`` of points with the
    smallest proximity margin under ``K``). With ``validate`` each
    restricted probe is repeated in full and disagreements are counted.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if restriction_policy not in ("full", "movers", "margin"):
        raise ValueError(f"unknown restriction policy {restriction_policy!r}")
    counter = SearchCounter()
    if check_converged:
        counter.check_probes += 1
        changed, movers = probe_changes(K, P)
        if changed:
            raise NotConvergedError(
                f"partition is not converged under K: {movers.size} point(s) would move"
            )
    rows = _restriction_rows(restriction_policy, K, P, margin_fraction)

    n = K.n
    # R is updated in place; the candidates rotate through three buffers so
    # the best changing candidate survives without a copy
    r_buf = np.empty((n, n))
    pool = [np.empty((n, n)) for _ in range(3)]
    R = K
    C = K
    best: KernelMatrix | None = None
    best_movers = np.empty(0, dtype=np.int64)
    best_signs: tuple[int, ...] = ()
    signs: list[int] = []
    changed = False  # e = 1 is stable by contract

    for j in range(1, depth + 1):
        R = elementwise_sqrt(R, out=r_buf)
        counter.sqrts += 1
        out = next(b for b in pool if b is not C.entries and (best is None or b is not best.entries))
        if changed:
            C = hadamard(C, R, out=out)
        else:
            C = hadamard_div(C, R, out=out)
        counter.hadamards += 1
        signs.append(1 if (j == 1 or changed) else -1)

        changed, movers = probe_changes(C, P, restriction=rows)
        counter.probes += 1
        if validate and rows is not None:
            full_changed, _ = probe_changes(C, P)
            counter.validation_disagreements += int(full_changed != changed)
        if changed:
            best = C
            best_movers = movers
            best_signs = tuple(signs)
            if restriction_policy == "movers" and rows is None:
                rows = movers

    if best is None:
        return CriticalSearchResult(
            found=False,
            exponent=None,
            upper=Fraction(1, 2**depth),
            sigma_next=None,
            K_next=None,
            movers=best_movers,
            probes=counter.probes,
            depth=depth,
            counter=counter,
        )
    best.entries.flags.writeable = False
    exponent = DyadicExponent(best_signs)
    relative = best.exponent / K.exponent
    assert relative == exponent.value
    return CriticalSearchResult(
        found=True,
        exponent=exponent,
        upper=exponent.value + Fraction(1, 2**depth),
        sigma_next=best.bandwidth,
        K_next=best,
        movers=best_movers,
        probes=counter.probes,
        depth=depth,
        counter=counter,
    )


# --------------------------------------------------------------------------
# traces and drivers


@dataclass
class TraceStep:
    sigma: float
    assignment: list[int]
    cnnc: float
    empty_clusters: int
    nmi: float | None
    kkm_iterations: int
    converged: bool
    probe_count: int
    depth: int | None
    wall_time_ms: float = 0.0

    def as_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "assignment": self.assignment,
            "cnnc": self.cnnc,
            "empty_clusters": self.empty_clusters,
            "nmi": self.nmi,
            "kkm_iterations": self.kkm_iterations,
            "converged": self.converged,
            "probe_count": self.probe_count,
            "depth": self.depth,
            "wall_time_ms": self.wall_time_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceStep":
        return cls(**d)


@dataclass
class SearchTrace:
    """Bandwidths visited by a strategy, in increasing order, with their clusterings."""

    method: str
    steps: list[TraceStep] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def sigmas(self) -> list[float]:
        return [s.sigma for s in self.steps]

    def best_by_cnnc(self) -> TraceStep:
        return min(self.steps, key=lambda s: (s.cnnc, s.sigma))

    def best_nmi(self) -> float | None:
        scores = [s.nmi for s in self.steps if s.nmi is not None]
        return max(scores) if scores else None

    def best_cnnc(self) -> float:
        return min(s.cnnc for s in self.steps)

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "stop_reason": self.stop_reason,
            "steps": [s.as_dict() for s in self.steps],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SearchTrace":
        return cls(d["method"], [TraceStep.from_dict(s) for s in d["steps"]], d.get("stop_reason", ""))


class _Scorer:
    """Caches the neighbour order so each partition costs one c-NNC pass."""

    def __init__(self, D: np.ndarray, labels=None, neighbors=None):
        self.neighbors = neighbor_order(D) if neighbors is None else neighbors
        self.labels = labels

    def step(self, sigma, P, run, probes, depth, elapsed) -> TraceStep:
        report = cnnc(P, neighbors=self.neighbors, labels=self.labels)
        return TraceStep(
            sigma=float(sigma),
            assignment=P.assignment.tolist(),
            cnnc=report.cnnc,
            empty_clusters=report.empty_clusters,
            nmi=report.nmi,
            kkm_iterations=run.iterations,
            converged=run.converged,
            probe_count=probes,
            depth=depth,
            wall_time_ms=elapsed * 1e3,
        )


def offgrid_driver(
    D: np.ndarray,
    k: int,
    sigma0: float,
    depth: int,
    max_steps: int = 100,
    seed=None,
    *,
    P0: Partition | None = None,
    sigma_cap: float | None = None,
    labels=None,
    restriction_policy: str = "full",
    margin_fraction: float = 0.25,
    max_iters: int = 300,
    neighbors: np.ndarray | None = None,
) -> SearchTrace:
    """Enumerate the bandwidths at which kernel k-means changes its output.

    Runs k-means to convergence at ``sigma0`` from ``P0`` (a seeded random
    partition if omitted), then repeatedly finds the critical bandwidth of
    the current (kernel, partition) pair and reruns k-means there. Stops
    when no change is found, the bandwidth passes ``sigma_cap``, k-means
    fails to converge, or the trace holds ``max_steps`` bandwidths.
    """
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    if sigma_cap is None:
        sigma_cap = default_sigma_cap(D)
    P = P0 if P0 is not None else random_partition(n, k, seed)
    scorer = _Scorer(D, labels, neighbors)
    trace = SearchTrace("offgrid")

    t0 = time.perf_counter()
    K = rbf_kernel(D, sigma0)
    run = kkm_run(K, P, max_iters)
    P = run.partition
    trace.steps.append(scorer.step(sigma0, P, run, 0, depth, time.perf_counter() - t0))
    if not run.converged:
        trace.stop_reason = "kkm did not converge"
        return trace

    while len(trace.steps) < max_steps:
        t0 = time.perf_counter()
        if K.exponent != 1:
            K = rebase(K)
        result = critical_search(K, P, depth, restriction_policy, margin_fraction=margin_fraction)
        if not result.found:
            trace.stop_reason = "no change found"
            break
        if result.sigma_next > sigma_cap:
            trace.stop_reason = "sigma cap reached"
            break
        if K.clamped:
            # floored entries do not follow the power law; rebuild exactly
            K = rbf_kernel(D, result.sigma_next)
        else:
            K = result.K_next
        run = kkm_run(K, P, max_iters)
        P = run.partition
        trace.steps.append(
            scorer.step(K.bandwidth, P, run, result.probes, depth, time.perf_counter() - t0)
        )
        if not run.converged:
            trace.stop_reason = "kkm did not converge"
            break
    else:
        trace.stop_reason = "max steps"
    return trace


def hierarchical_search(
    D: np.ndarray,
    k: int,
    sigma0: float,
    depth_schedule: Sequence[int] = (1, 2),
    seed=None,
    *,
    P0: Partition | None = None,
    max_steps: int = 100,
    sigma_cap: float | None = None,
    labels=None,
    restriction_policy: str = "full",
    margin_fraction: float = 0.25,
    max_iters: int = 300,
    neighbors: np.ndarray | None = None,
) -> SearchTrace:
    """Coarse-to-fine search over an increasing depth schedule.

    After each stage the two bandwidths with the lowest c-NNC bound the next,
    deeper stage, which restarts from the partition found at the lower one.
    Returns all visited steps merged in increasing bandwidth order.
    """
    schedule = list(depth_schedule)
    if not schedule:
        raise ValueError("depth schedule must be nonempty")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("depth schedule must be strictly increasing")
    D = np.asarray(D, dtype=np.float64)
    if neighbors is None:
        neighbors = neighbor_order(D)
    common = dict(labels=labels, restriction_policy=restriction_policy,
                  margin_fraction=margin_fraction, max_iters=max_iters, neighbors=neighbors)
    trace = offgrid_driver(D, k, sigma0, schedule[0], max_steps, seed, P0=P0,
                           sigma_cap=sigma_cap, **common)
    trace.method = "offgrid"
    for depth in schedule[1:]:
        ranked = sorted(trace.steps, key=lambda s: (s.cnnc, s.sigma))
        if len(ranked) < 2:
            trace.stop_reason += "; degenerate interval"
            break
        lo, hi = sorted(ranked[:2], key=lambda s: s.sigma)
        if lo.sigma == hi.sigma:
            trace.stop_reason += "; degenerate interval"
            break
        start = Partition(np.asarray(lo.assignment), k)
        sub = offgrid_driver(D, k, lo.sigma, depth, max_steps, P0=start,
                             sigma_cap=hi.sigma, **common)
        known = {s.sigma for s in trace.steps}
        merged = trace.steps + [s for s in sub.steps if s.sigma not in known]
        trace.steps = sorted(merged, key=lambda s: s.sigma)
        trace.stop_reason += f"; depth {depth}: {sub.stop_reason}"
    trace.stop_reason = trace.stop_reason.lstrip("; ")
    return trace


# --------------------------------------------------------------------------
# Newton baseline (two clusters)


def _log_kernel(K: KernelMatrix, D: np.ndarray | None) -> np.ndarray:
    # sigma * log K(x, y) = -||x - y||**2, constant in the new bandwidth
    if D is not None:
        return -np.asarray(D, dtype=np.float64)
    return K.bandwidth * np.log(K.entries)


def newton_g(L: np.ndarray, P: Partition, x: int, s: float) -> tuple[float, float]:
    """Proximity gap ``delta(x, own) - delta(x, other)`` and its derivative at bandwidth ``s``."""
    own = P.assignment[x]
    groups = (P.members(own), P.members(1 - own))
    g = dg = 0.0
    for sign, idx in zip((1.0, -1.0), groups):
        m = idx.size
        lx = L[x, idx]
        kx = np.exp(lx / s)
        lb = L[np.ix_(idx, idx)]
        kb = np.exp(lb / s)
        g += sign * (2.0 * kx.sum() / m - kb.sum() / m**2)
        dg += sign * (-2.0 * np.sum(lx * kx) / (s * s * m) + np.sum(lb * kb) / (s * s * m**2))
    return g, dg


def newton_critical(
    K: KernelMatrix,
    P: Partition,
    x: int,
    tol: float = 1e-12,
    max_iters: int = 100,
    *,
    sigma_init: float | None = None,
    sigma_cap: float | None = None,
    D: np.ndarray | None = None,
) -> float:
    """Newton's method on the proximity gap of point ``x`` (two clusters only).

    Returns the bandwidth ``s > sigma`` where ``x`` becomes indifferent
    between its cluster and the other. Raises :class:`NewtonDivergence` on
    a flat derivative, an iterate outside ``(sigma, sigma_cap)``, or no
    convergence within ``max_iters``.
    """
    if P.k != 2:
        raise ValueError("the Newton baseline handles k = 2 only")
    if np.any(P.sizes == 0):
        raise ValueError("both clusters must be nonempty")
    sigma = K.bandwidth
    L = _log_kernel(K, D)
    cap = sigma_cap if sigma_cap is not None else 1e3 * float(-L.min()) + sigma
    s = sigma_init if sigma_init is not None else 2.0 * sigma
    for _ in range(max_iters):
        g, dg = newton_g(L, P, x, s)
        if abs(dg) < 1e-14:
            raise NewtonDivergence(f"flat derivative at s={s:.6g}")
        step = g / dg
        s_new = s - step
        if not sigma < s_new < cap:
            raise NewtonDivergence(f"iterate {s_new:.6g} left ({sigma:.6g}, {cap:.6g})")
        if abs(s_new - s) <= tol * s_new:
            return s_new
        s = s_new
    raise NewtonDivergence(f"no convergence in {max_iters} iterations")


def newton_critical_min(
    K: KernelMatrix,
    P: Partition,
    *,
    D: np.ndarray | None = None,
    sigma_cap: float | None = None,
    scan_ratio: float = 1.01,
    tol: float = 1e-12,
) -> float:
    """Smallest per-point Newton root: the critical bandwidth for ``k = 2``.

    Each point's iteration starts from the last bandwidth of a geometric
    scan (ratio ``scan_ratio``) before its gap first turns negative, so it
    converges to the first crossing rather than an arbitrary root.
    """
    sigma = K.bandwidth
    L = _log_kernel(K, D)
    cap = sigma_cap if sigma_cap is not None else 1e3 * float(-L.min()) + sigma
    s = sigma
    pending = set(range(P.n))
    starts: dict[int, float] = {}
    while pending and s < cap:
        s_next = s * scan_ratio
        table = proximity_table(np.exp(L / s_next), P)
        own = P.assignment
        gap = table.delta[np.arange(P.n), own] - table.delta[np.arange(P.n), 1 - own]
        for x in list(pending):
            if gap[x] < 0:
                starts[x] = s
                pending.discard(x)
        s = s_next
    if not starts:
        raise NewtonDivergence("no point changes cluster below the bandwidth cap")
    roots = []
    first = min(starts.values())
    for x, s0 in starts.items():
        if s0 > first * scan_ratio**2:
            continue
        try:
            roots.append(newton_critical(K, P, x, tol, sigma_init=max(s0, sigma * (1 + 1e-9)),
                                         sigma_cap=cap, D=D))
        except NewtonDivergence as exc:
            logger.debug("point %d: %s", x, exc)
    if not roots:
        raise NewtonDivergence("Newton diverged for every candidate point")
    return min(roots)


# --------------------------------------------------------------------------
# plain bisection baseline


class BisectionResult(NamedTuple):
    sigma: float | None
    found: bool
    lo: float
    hi: float
    probes: int


def binary_search_critical(
    D: np.ndarray | None,
    sigma: float,
    P: Partition,
    precision: float = 1e-3,
    sigma_hi: float | None = None,
    *,
    K: KernelMatrix | None = None,
) -> BisectionResult:
    """Bisection on the bandwidth itself, rebuilding the kernel by a general power.

    ``[sigma, sigma_hi]`` must bracket the change: ``P`` stable at ``sigma``
    and changing at ``sigma_hi``. Returns the midpoint of the final interval,
    once it is narrower than the absolute ``precision``.
    """
    if K is None:
        K = rbf_kernel(D, sigma)
    if sigma_hi is None:
        sigma_hi = default_sigma_cap(D if D is not None else -K.bandwidth * np.log(K.entries))
    lo, hi = float(sigma), float(sigma_hi)
    if hi - lo < precision:
        return BisectionResult(0.5 * (lo + hi), True, lo, hi, 0)
    buf = np.empty_like(K.entries)
    probes = 1
    changed, _ = probe_changes(reparametrize_exact(K, hi, out=buf), P)
    if not changed:
        return BisectionResult(None, False, lo, hi, probes)
    while hi - lo >= precision:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        changed, _ = probe_changes(reparametrize_exact(K, mid, out=buf), P)
        probes += 1
        if changed:
            hi = mid
        else:
            lo = mid
    return BisectionResult(0.5 * (lo + hi), True, lo, hi, probes)


def bisection_driver(
    D: np.ndarray,
    k: int,
    sigma0: float,
    precision: float = 1e-3,
    max_steps: int = 100,
    seed=None,
    *,
    P0: Partition | None = None,
    sigma_cap: float | None = None,
    labels=None,
    max_iters: int = 300,
    neighbors: np.ndarray | None = None,
) -> SearchTrace:
    """Same loop as :func:`offgrid_driver` with bisection locating each change.

    The next k-means run uses the upper end of the final interval, which is
    known to change the partition.
    """
    D = np.asarray(D, dtype=np.float64)
    if sigma_cap is None:
        sigma_cap = default_sigma_cap(D)
    P = P0 if P0 is not None else random_partition(D.shape[0], k, seed)
    scorer = _Scorer(D, labels, neighbors)
    trace = SearchTrace("binsearch")
    t0 = time.perf_counter()
    sigma = sigma0
    K = rbf_kernel(D, sigma)
    run = kkm_run(K, P, max_iters)
    P = run.partition
    trace.steps.append(scorer.step(sigma, P, run, 0, None, time.perf_counter() - t0))
    while len(trace.steps) < max_steps and run.converged:
        t0 = time.perf_counter()
        res = binary_search_critical(D, sigma, P, precision, sigma_cap, K=K)
        if not res.found:
            trace.stop_reason = "no change found"
            return trace
        sigma = res.hi
        K = rbf_kernel(D, sigma)
        run = kkm_run(K, P, max_iters)
        P = run.partition
        trace.steps.append(scorer.step(sigma, P, run, res.probes, None, time.perf_counter() - t0))
    trace.stop_reason = "max steps" if run.converged else "kkm did not converge"
    return trace


# --------------------------------------------------------------------------
# heuristic and grid baselines


def mknn_sigmas(D: np.ndarray, log_base: float = math.e) -> list[float]:
    """Bandwidths ``2 s_j**2`` from the mean distance ``s_j`` to the j-th neighbour.

    ``j`` runs over ``1 .. floor(2 (log n + 1))``, truncated at ``n - 1``;
    the factor 2 and the square convert from the ``exp(-d**2 / (2 s**2))``
    convention. Zero bandwidths (duplicate points) are dropped.
    """
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    if n < 3:
        raise ValueError("need at least 3 points")
    jmax = min(int(math.floor(2 * (math.log(n, log_base) + 1))), n - 1)
    dist = np.sqrt(D)
    np.fill_diagonal(dist, np.inf)
    nearest = np.sort(dist, axis=1)[:, :jmax]
    means = nearest.mean(axis=0)
    sigmas = []
    for j, s in enumerate(means, start=1):
        if s <= 0:
            logger.warning("mean distance to neighbour %d is 0; dropping it", j)
            continue
        sigma = 2.0 * float(s) ** 2
        if not sigmas or sigma > sigmas[-1]:
            sigmas.append(sigma)
    return sigmas


def grid_sigmas() -> list[float]:
    """The 13 decades ``1e-6 .. 1e6``."""
    return [float(f"1e{i}") for i in range(-6, 7)]


def evaluate_sigmas(
    D: np.ndarray,
    k: int,
    sigmas: Sequence[float],
    P0: Partition,
    *,
    method: str = "grid",
    labels=None,
    max_iters: int = 300,
    neighbors: np.ndarray | None = None,
) -> SearchTrace:
    """Run k-means from the same ``P0`` at every bandwidth of a fixed list."""
    D = np.asarray(D, dtype=np.float64)
    scorer = _Scorer(D, labels, neighbors)
    trace = SearchTrace(method)
    for sigma in sorted(sigmas):
        t0 = time.perf_counter()
        run = kkm_run(rbf_kernel(D, sigma), P0, max_iters)
        trace.steps.append(
            scorer.step(sigma, run.partition, run, 0, None, time.perf_counter() - t0)
        )
    trace.stop_reason = "list exhausted"
    return trace
