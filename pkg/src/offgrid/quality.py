"""Clustering quality: NMI against ground truth and the bandwidth-free c-NNC cost."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kkm import Partition

__all__ = [
    "EULER_GAMMA",
    "QualityReport",
    "nmi",
    "neighbor_order",
    "nnc",
    "nnc_cluster",
    "harmonic_normalizer",
    "cnnc",
]

EULER_GAMMA = 0.5772156649015329


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(y, z) -> float:
    """Normalized mutual information ``2 I(y, z) / (H(y) + H(z))``.

    Natural logs; 0 log 0 is 0. When either labeling is constant the ratio is
    undefined: the result is 1 if both are constant, else 0.
    """
    y = np.asarray(y)
    z = np.asarray(z)
    if y.shape != z.shape or y.ndim != 1:
        raise ValueError(f"label vectors must have equal 1-D shape, got {y.shape} and {z.shape}")
    n = y.size
    if n == 0:
        raise ValueError("empty labelings")
    _, yi = np.unique(y, return_inverse=True)
    _, zi = np.unique(z, return_inverse=True)
    table = np.zeros((yi.max() + 1, zi.max() + 1))
    np.add.at(table, (yi, zi), 1.0)
    hy = _entropy(table.sum(axis=1), n)
    hz = _entropy(table.sum(axis=0), n)
    if hy == 0.0 or hz == 0.0:
        return 1.0 if hy == hz else 0.0
    pxy = table / n
    px = pxy.sum(axis=1, keepdims=True)
    pz = pxy.sum(axis=0, keepdims=True)
    nz = pxy > 0
    mi = float(np.sum(pxy[nz] * np.log(pxy[nz] / (px @ pz)[nz])))
    return min(1.0, max(0.0, 2.0 * mi / (hy + hz)))


def neighbor_order(D: np.ndarray) -> np.ndarray:
    """Row ``i`` lists every other point by increasing distance from ``i``.

    Equal distances are ordered by ascending index. Shape ``(n, n - 1)``.
    """
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    masked = D.copy()
    np.fill_diagonal(masked, np.inf)
    order = np.argsort(masked, axis=1, kind="stable")
    return order[:, : n - 1]


def nnc(i: int, c: int, assignment: np.ndarray, neighbors: np.ndarray) -> float:
    """Fraction of the ``c`` nearest neighbours of point ``i`` in another cluster."""
    if not 1 <= c <= neighbors.shape[1]:
        raise ValueError(f"neighbour count must be in [1, {neighbors.shape[1]}], got {c}")
    assignment = np.asarray(assignment)
    nb = neighbors[i, :c]
    return float(np.count_nonzero(assignment[nb] != assignment[i])) / c


def harmonic_normalizer(n: int) -> float:
    """``ln(n - 1) + gamma + 1 / (2n - 2)``, an approximation of ``H_{n-1}``."""
    if n < 2:
        raise ValueError("need n >= 2")
    return math.log(n - 1) + EULER_GAMMA + 1.0 / (2 * n - 2)


def _point_scores(assignment: np.ndarray, neighbors: np.ndarray, rows=None) -> np.ndarray:
    # sum_c (1/c) NNC(i, c) per point, from cumulative foreign-neighbour counts
    rows = np.arange(neighbors.shape[0]) if rows is None else np.asarray(rows)
    c = np.arange(1, neighbors.shape[1] + 1, dtype=np.float64)
    weights = 1.0 / (c * c)
    out = np.empty(rows.size)
    for start in range(0, rows.size, 512):
        r = rows[start : start + 512]
        foreign = assignment[neighbors[r]] != assignment[r, None]
        out[start : start + 512] = np.cumsum(foreign, axis=1) @ weights
    return out


def nnc_cluster(members: np.ndarray, assignment: np.ndarray, neighbors: np.ndarray) -> float:
    """Harmonic-weighted neighbour disagreement of one cluster, in [0, 1]."""
    members = np.asarray(members, dtype=np.int64)
    n = neighbors.shape[0]
    if n < 2:
        raise ValueError("need n >= 2")
    if members.size == 0:
        return 0.0
    scores = _point_scores(np.asarray(assignment), neighbors, members)
    return float(scores.sum()) / (harmonic_normalizer(n) * max(1, members.size))


@dataclass(frozen=True)
class QualityReport:
    cnnc: float
    empty_clusters: int
    per_cluster_nnc: tuple[float, ...]
    nmi: float | None = None

    def as_dict(self) -> dict:
        return {
            "nmi": self.nmi,
            "cnnc": self.cnnc,
            "empty_clusters": self.empty_clusters,
            "per_cluster_nnc": list(self.per_cluster_nnc),
        }


def cnnc(
    P: Partition,
    D: np.ndarray | None = None,
    *,
    neighbors: np.ndarray | None = None,
    labels=None,
) -> QualityReport:
    """Score a partition: ``(empty clusters + sum of per-cluster NNC) / k``.

    Pass a precomputed ``neighbors`` order to avoid resorting ``D`` when the
    same dataset is scored many times. ``labels`` adds NMI to the report.
    """
    if neighbors is None:
        if D is None:
            raise ValueError("need a distance matrix or a neighbour order")
        neighbors = neighbor_order(D)
    a = P.assignment
    n = a.size
    scores = _point_scores(a, neighbors)
    sizes = P.sizes
    norm = harmonic_normalizer(n)
    sums = np.bincount(a, weights=scores, minlength=P.k)
    per_cluster = tuple(float(s / (norm * max(1, m))) for s, m in zip(sums, sizes))
    empty = int(np.count_nonzero(sizes == 0))
    value = (empty + sum(per_cluster)) / P.k
    score = nmi(labels, a) if labels is not None else None
    return QualityReport(value, empty, per_cluster, score)
