"""Kernel k-means (batch Lloyd iterations in feature space).

Centroids are never materialized. For a partition with clusters ``pi_c`` of
size ``n_c`` the assignment rule only needs

    S_c(x) = sum_{y in pi_c} K(x, y)          (cross sums)
    T_c    = sum_{y, z in pi_c} K(y, z)       (self sums)

and picks the cluster maximizing ``2 S_c(x) / n_c - T_c / n_c**2``, which
is the squared feature-space distance to the centroid with the constant
``K(x, x)`` dropped.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .kernel import KernelMatrix

logger = logging.getLogger(__name__)

__all__ = [
    "Partition",
    "ProximityTable",
    "KKMResult",
    "proximity_table",
    "assign_step",
    "kkm_run",
    "kkm_objective",
    "probe_changes",
    "margin_ranking",
    "random_partition",
]


def _entries(K) -> np.ndarray:
    return K.entries if isinstance(K, KernelMatrix) else np.asarray(K, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class Partition:
    """Assignment of ``n`` points to ``k`` cluster ids; clusters may be empty."""

    assignment: np.ndarray
    k: int

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64).copy()
        if a.ndim != 1:
            raise ValueError("assignment must be 1-D")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if a.size and (a.min() < 0 or a.max() >= self.k):
            raise ValueError(f"cluster ids must lie in [0, {self.k})")
        a.flags.writeable = False
        object.__setattr__(self, "assignment", a)

    @property
    def n(self) -> int:
        return self.assignment.size

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    @property
    def n_empty(self) -> int:
        return int(np.count_nonzero(self.sizes == 0))

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == c)

    def indicator(self) -> np.ndarray:
        H = np.zeros((self.n, self.k))
        H[np.arange(self.n), self.assignment] = 1.0
        return H

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.assignment, other.assignment)

    def __hash__(self):
        return hash((self.k, self.assignment.tobytes()))

    def __repr__(self):
        return f"Partition(n={self.n}, k={self.k}, sizes={self.sizes.tolist()})"


def random_partition(n: int, k: int, rng=None, max_tries: int = 1000) -> Partition:
    """Uniform random assignment with every cluster nonempty.

    Draws are rejected until all ``k`` clusters are hit; after ``max_tries``
    rejections a random set of ``k`` points is pinned to distinct clusters.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(rng)
    a = rng.integers(0, k, size=n)
    for _ in range(max_tries):
        if np.unique(a).size == k:
            return Partition(a, k)
        a = rng.integers(0, k, size=n)
    pinned = rng.choice(n, size=k, replace=False)
    a[pinned] = np.arange(k)
    return Partition(a, k)


@dataclass(frozen=True)
class ProximityTable:
    """Cluster sums and proximity scores for one kernel and one partition.

    ``delta`` is ``-inf`` on empty clusters so they are never chosen.
    ``rows`` lists the points the ``cross``/``delta`` rows refer to (all
    points unless the table was restricted).
    """

    cross: np.ndarray
    self_sums: np.ndarray
    delta: np.ndarray
    sizes: np.ndarray
    rows: np.ndarray


def _delta(cross: np.ndarray, self_sums: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    delta = np.full(cross.shape, -np.inf)
    nz = sizes > 0
    ns = sizes[nz].astype(np.float64)
    delta[:, nz] = 2.0 * cross[:, nz] / ns - self_sums[nz] / (ns * ns)
    return delta


def _self_from_blocks(Km: np.ndarray, P: Partition) -> np.ndarray:
    out = np.zeros(P.k)
    for c in range(P.k):
        idx = P.members(c)
        if idx.size:
            out[c] = Km[np.ix_(idx, idx)].sum()
    return out


def proximity_table(K, P: Partition, rows: np.ndarray | None = None) -> ProximityTable:
    """Compute the proximity of every (point, cluster) pair under ``K``.

    When ``rows`` is given only those points get ``cross``/``delta`` rows;
    the self sums are then taken from the diagonal blocks directly.
    """
    Km = _entries(K)
    if Km.shape != (P.n, P.n):
        raise ValueError(f"kernel is {Km.shape} but partition has {P.n} points")
    sizes = P.sizes
    H = P.indicator()
    if rows is None:
        rows = np.arange(P.n)
        cross = Km @ H
        self_sums = np.einsum("ic,ic->c", cross, H)
    else:
        rows = np.asarray(rows, dtype=np.int64)
        cross = Km[rows] @ H
        self_sums = _self_from_blocks(Km, P)
    return ProximityTable(cross, self_sums, _delta(cross, self_sums, sizes), sizes, rows)


def _choose(delta: np.ndarray, current: np.ndarray) -> np.ndarray:
    # ties go to the current cluster, then to the lowest id (argmax is first-hit)
    best = delta.argmax(axis=1)
    stay = delta[np.arange(delta.shape[0]), current] >= delta[np.arange(delta.shape[0]), best]
    return np.where(stay, current, best)


def kkm_objective(table: ProximityTable) -> float:
    """Feature-space k-means cost ``sum_x ||phi(x) - m_c(x)||**2`` (full tables only).

    Summing the squared distances of a cluster's members collapses to
    ``n_c - T_c / n_c``.
    """
    nz = table.sizes > 0
    return float(table.sizes.sum() - np.sum(table.self_sums[nz] / table.sizes[nz]))


def assign_step(K, P: Partition) -> tuple[Partition, int]:
    """One synchronous reassignment; returns the new partition and move count."""
    table = proximity_table(K, P)
    new = _choose(table.delta, P.assignment)
    changed = int(np.count_nonzero(new != P.assignment))
    if changed == 0:
        return P, 0
    return Partition(new, P.k), changed


class KKMResult(NamedTuple):
    partition: Partition
    iterations: int
    converged: bool
    objectives: list[float]


def kkm_run(K, P0: Partition, max_iters: int = 300, check_objective: bool = True) -> KKMResult:
    """Iterate :func:`assign_step` until no point moves or ``max_iters`` is hit.

    ``objectives[j]`` is the cost of the partition entering iteration ``j``
    plus, at the end, the cost of the returned partition. With
    ``check_objective`` an increase beyond rounding raises ``RuntimeError``,
    which can only happen for a kernel that is not positive semidefinite.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    P = P0
    objectives: list[float] = []
    for it in range(1, max_iters + 1):
        table = proximity_table(K, P)
        objectives.append(kkm_objective(table))
        if check_objective and len(objectives) > 1:
            prev, cur = objectives[-2], objectives[-1]
            if cur > prev + 1e-9 * max(1.0, abs(prev)):
                raise RuntimeError(f"objective increased from {prev!r} to {cur!r}")
        new = _choose(table.delta, P.assignment)
        if np.array_equal(new, P.assignment):
            return KKMResult(P, it, True, objectives)
        P = Partition(new, P.k)
    objectives.append(kkm_objective(proximity_table(K, P)))
    logger.debug("kernel k-means hit max_iters=%d without converging", max_iters)
    return KKMResult(P, max_iters, False, objectives)


def probe_changes(K, P: Partition, restriction: np.ndarray | None = None) -> tuple[bool, np.ndarray]:
    """Would one batch iteration from ``P`` move any point under ``K``?

    Only the points in ``restriction`` are checked when it is given.
    Returns the flag and the sorted indices of the points that would move.
    """
    table = proximity_table(K, P, rows=restriction)
    current = P.assignment[table.rows]
    new = _choose(table.delta, current)
    movers = np.sort(table.rows[new != current])
    return bool(movers.size), movers


def margins(table: ProximityTable, P: Partition) -> np.ndarray:
    """``delta(x, own) - max_{c != own} delta(x, c)`` for each row of the table."""
    delta = table.delta
    own = P.assignment[table.rows]
    r = np.arange(delta.shape[0])
    own_delta = delta[r, own].copy()
    others = delta.copy()
    others[r, own] = -np.inf
    return own_delta - others.max(axis=1)


def margin_ranking(table: ProximityTable, P: Partition) -> np.ndarray:
    """Points ordered by ascending margin (closest to switching first)."""
    if P.k == 1:
        return np.empty(0, dtype=np.int64)
    m = margins(table, P)
    order = np.argsort(m, kind="stable")
    return table.rows[order]
