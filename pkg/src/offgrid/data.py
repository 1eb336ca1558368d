"""Dataset ingestion, pairwise squared distances and synthetic instances."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "DataSet",
    "DataError",
    "TightExample",
    "load_csv",
    "standardize",
    "pairwise_sq_distances",
    "percentile_sq_distance",
    "min_offdiag",
    "generate_tight_example",
    "tight_example_gap",
    "save_distance_csv",
]


class DataError(ValueError):
    """Raised for malformed or infeasible input data."""


@dataclass
class DataSet:
    """``n`` points in ``d`` dimensions, optionally with integer class ids.

    ``label_names`` maps each class id back to the raw label string.
    """

    points: np.ndarray
    labels: np.ndarray | None = None
    name: str = "data"
    label_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise DataError(f"points must be 2-D, got shape {pts.shape}")
        if pts.shape[0] < 2:
            raise DataError(f"need at least 2 points, got {pts.shape[0]}")
        if pts.shape[1] < 1:
            raise DataError("need at least 1 feature column")
        if not np.all(np.isfinite(pts)):
            raise DataError("all coordinates must be finite")
        self.points = pts
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (pts.shape[0],):
                raise DataError(
                    f"labels length {labels.shape} does not match n={pts.shape[0]}"
                )
            self.labels = labels

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def n_classes(self) -> int | None:
        if self.labels is None:
            return None
        return len(np.unique(self.labels))


def standardize(points: np.ndarray) -> np.ndarray:
    """Center and scale each column to unit sample variance.

    Zero-variance columns are centered but left unscaled.
    """
    points = np.asarray(points, dtype=np.float64)
    centered = points - points.mean(axis=0)
    std = points.std(axis=0, ddof=1) if points.shape[0] > 1 else np.zeros(points.shape[1])
    scale = np.where(std > 0, std, 1.0)
    return centered / scale


def _encode_labels(raw: list[str]) -> tuple[np.ndarray, list[str]]:
    # ids in order of first appearance
    names: dict[str, int] = {}
    ids = np.empty(len(raw), dtype=np.int64)
    for i, value in enumerate(raw):
        ids[i] = names.setdefault(value, len(names))
    return ids, list(names)


def load_csv(
    path: str | Path,
    label_column: int | None = None,
    standardize_columns: bool = False,
    skip_header: bool = False,
    delimiter: str | None = None,
    name: str | None = None,
) -> DataSet:
    """Read a headerless CSV of reals into a :class:`DataSet`.

    Args:
        path: file to read.
        label_column: zero-based index of the label column, removed from the
            features and encoded to ids 0..C-1 in order of first appearance.
            Negative indices count from the end.
        standardize_columns: scale every feature to unit sample variance.
        skip_header: drop the first row.
        delimiter: field separator. ``None`` means comma, falling back to
            whitespace when a line has no comma.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    rows: list[list[str]] = []
    with path.open(newline="") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if skip_header and lines:
        lines = lines[1:]
    for line in lines:
        if delimiter is None:
            fields = next(csv.reader([line])) if "," in line else line.split()
        else:
            fields = next(csv.reader([line], delimiter=delimiter))
        rows.append([f.strip() for f in fields])
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 rows, got {len(rows)}")
    width = len(rows[0])
    for r, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: row {r} has {len(row)} fields, expected {width}")

    if label_column is not None:
        col = label_column if label_column >= 0 else width + label_column
        if not 0 <= col < width:
            raise DataError(f"label column {label_column} out of range for width {width}")
    else:
        col = None

    feature_cols = [c for c in range(width) if c != col]
    values = np.empty((len(rows), len(feature_cols)), dtype=np.float64)
    for r, row in enumerate(rows):
        for j, c in enumerate(feature_cols):
            try:
                v = float(row[c])
            except ValueError:
                raise DataError(f"{path}: cannot parse row {r}, column {c}: {row[c]!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: non-finite value at row {r}, column {c}")
            values[r, j] = v

    labels = label_names = None
    if col is not None:
        labels, label_names = _encode_labels([row[col] for row in rows])
    if standardize_columns:
        values = standardize(values)
    ds = DataSet(values, labels, name=name or path.stem, label_names=label_names or [])
    D = pairwise_sq_distances(ds)
    if ds.n > 1 and min_offdiag(D) == 0.0:
        logger.warning("%s contains duplicate points; the no-reassignment bound is 0", ds.name)
    return ds


def pairwise_sq_distances(ds: DataSet | np.ndarray) -> np.ndarray:
    """Squared Euclidean distance matrix with an exact zero diagonal.

    Uses explicit differences (not the Gram-matrix expansion) so that
    entries are never negative and small distances keep full precision.
    """
    X = ds.points if isinstance(ds, DataSet) else np.asarray(ds, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    D = np.zeros((n, n), dtype=np.float64)
    for m in range(X.shape[1]):
        diff = X[:, m, None] - X[None, :, m]
        D += diff * diff
    # fp subtraction is antisymmetric up to sign, so D is exactly symmetric
    np.fill_diagonal(D, 0.0)
    return D


def _upper(D: np.ndarray) -> np.ndarray:
    iu = np.triu_indices(D.shape[0], k=1)
    return D[iu]


def min_offdiag(D: np.ndarray) -> float:
    """Smallest squared distance between two distinct points."""
    return float(_upper(D).min())


def percentile_sq_distance(D: np.ndarray, q: float) -> float:
    """Nearest-rank ``q``-th percentile of the strict upper triangle of ``D``."""
    if not 0 < q <= 100:
        raise ValueError(f"percentile must be in (0, 100], got {q}")
    values = np.sort(_upper(np.asarray(D)))
    if values.size == 0:
        raise ValueError("need at least 2 points")
    rank = max(1, math.ceil(q / 100.0 * values.size))
    return float(values[rank - 1])


@dataclass
class TightExample:
    """Distance-matrix instance on which the no-reassignment bound is tight.

    Points ``0..n1-1`` form the first cluster, the rest the second; the
    special point that drifts towards the first cluster is ``special``.
    """

    distances: np.ndarray
    labels: np.ndarray
    special: int
    eps: float

    @property
    def n(self) -> int:
        return self.distances.shape[0]

    @property
    def sigma(self) -> float:
        """The bandwidth ``eps / ln(n / 3)`` at which the special point moves."""
        return self.eps / math.log(self.n / 3.0)


def generate_tight_example(n1: int, n2: int, eps: float = 1.0) -> TightExample:
    """Build the two-cluster family whose special point sits between clusters.

    Every point of the first cluster is at squared distance ``eps`` from the
    special point ``y`` (the first member of cluster two) and from each
    other; ``y`` is at ``2 eps`` from the rest of its own cluster, whose
    remaining members are ``eps`` apart. The two clusters are otherwise at
    ``eps`` from each other, which keeps ``eps`` the minimum distance.
    """
    if n1 < 1 or n2 < 2:
        raise DataError(f"infeasible sizes n1={n1}, n2={n2}; need n1 >= 1, n2 >= 2")
    if not eps > 0:
        raise DataError("eps must be positive")
    n = n1 + n2
    D = np.full((n, n), float(eps))
    y = n1
    D[y, n1 + 1 :] = 2.0 * eps
    D[n1 + 1 :, y] = 2.0 * eps
    np.fill_diagonal(D, 0.0)
    labels = np.r_[np.zeros(n1, dtype=np.int64), np.ones(n2, dtype=np.int64)]
    return TightExample(D, labels, y, float(eps))


def tight_example_gap(n1: int, n2: int) -> float:
    """Closed-form margin by which ``y`` prefers the first cluster at ``sigma``.

    Evaluates, with ``kappa = exp(-1/sigma * eps) = 3/n``, the difference
    ``delta(y, pi_1) - delta(y, pi_2)`` directly from cluster sums. Positive
    means ``y`` switches.
    """
    n = n1 + n2
    a = 3.0 / n  # kernel value at squared distance eps
    a2 = a * a  # at 2 eps
    cross1 = n1 * a
    self1 = n1 + n1 * (n1 - 1) * a
    cross2 = 1.0 + (n2 - 1) * a2
    self2 = n2 + 2 * (n2 - 1) * a2 + (n2 - 1) * (n2 - 2) * a
    delta1 = 2 * cross1 / n1 - self1 / n1**2
    delta2 = 2 * cross2 / n2 - self2 / n2**2
    return delta1 - delta2


def save_distance_csv(D: np.ndarray, path: str | Path) -> None:
    np.savetxt(path, D, delimiter=",", fmt="%.17g")
