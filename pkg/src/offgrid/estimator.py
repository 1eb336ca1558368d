"""scikit-learn style estimators wrapping kernel k-means and the bandwidth search."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .data import pairwise_sq_distances
from .kernel import rbf_kernel
from .kkm import Partition, kkm_run, random_partition
from .search import hierarchical_search, resolve_sigma0, sigma_lower_bound

__all__ = ["KernelKMeans", "OffGridKernelKMeans"]


def _predict_from_training(K_cross: np.ndarray, K_train: np.ndarray, labels: np.ndarray, k: int):
    # proximity of new points to the training clusters; empty clusters never win
    H = Partition(labels, k).indicator()
    sizes = H.sum(axis=0)
    self_sums = np.einsum("ic,ic->c", K_train @ H, H)
    delta = np.full((K_cross.shape[0], k), -np.inf)
    nz = sizes > 0
    delta[:, nz] = 2.0 * (K_cross @ H)[:, nz] / sizes[nz] - self_sums[nz] / sizes[nz] ** 2
    return delta.argmax(axis=1)


class _KernelPredictMixin:
    def predict(self, X):
        """Assign new points to the nearest fitted cluster in feature space."""
        check_is_fitted(self, "labels_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        diff = X[:, None, :] - self.X_fit_[None, :, :]
        cross = np.exp(-np.einsum("ijk,ijk->ij", diff, diff) / self.sigma_)
        K_train = rbf_kernel(pairwise_sq_distances(self.X_fit_), self.sigma_).entries
        return _predict_from_training(cross, K_train, self.labels_, self.n_clusters)


class KernelKMeans(_KernelPredictMixin, ClusterMixin, BaseEstimator):
    """Kernel k-means with a fixed RBF bandwidth ``exp(-||x - y||**2 / sigma)``.

    Parameters
    ----------
    n_clusters : int
    sigma : float
        RBF bandwidth (divides the squared distance).
    max_iter : int
    random_state : int, Generator or None
        Seeds the random initial partition.
    """

    def __init__(self, n_clusters=2, sigma=1.0, max_iter=300, random_state=None):
        self.n_clusters = n_clusters
        self.sigma = sigma
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64, ensure_min_samples=2)
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        D = pairwise_sq_distances(X)
        K = rbf_kernel(D, self.sigma)
        P0 = random_partition(X.shape[0], self.n_clusters, self.random_state)
        run = kkm_run(K, P0, self.max_iter)
        self.X_fit_ = X
        self.sigma_ = float(self.sigma)
        self.labels_ = run.partition.assignment.copy()
        self.n_iter_ = run.iterations
        self.converged_ = run.converged
        self.inertia_ = run.objectives[-1]
        return self


class OffGridKernelKMeans(_KernelPredictMixin, ClusterMixin, BaseEstimator):
    """Kernel k-means that picks its own RBF bandwidth.

    Enumerates the bandwidths at which the clustering changes, starting from
    ``sigma0``, and keeps the partition with the lowest c-NNC cost.

    Parameters
    ----------
    n_clusters : int
    depth_schedule : tuple of int
        Search depths, coarse to fine.
    sigma0 : str or float
        ``"percentile:q"``, ``"theorem1"`` or an explicit bandwidth.
    max_steps : int
        Cap on bandwidths visited per stage.
    restriction : {"full", "movers", "margin"}
    max_iter : int
        Kernel k-means iteration cap per bandwidth.
    random_state : int, Generator or None

    Attributes
    ----------
    labels_, sigma_ : the selected partition and its bandwidth.
    trace_ : :class:`~offgrid.search.SearchTrace` of every visited bandwidth.
    lower_bound_ : bandwidth below which no point can be reassigned.
    """

    def __init__(
        self,
        n_clusters=2,
        depth_schedule=(1, 2),
        sigma0="percentile:1",
        max_steps=100,
        restriction="full",
        max_iter=300,
        random_state=None,
    ):
        self.n_clusters = n_clusters
        self.depth_schedule = depth_schedule
        self.sigma0 = sigma0
        self.max_steps = max_steps
        self.restriction = restriction
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        """Run the search; ``y``, if given, only adds NMI to the trace."""
        X = validate_data(self, X, dtype=np.float64, ensure_min_samples=2)
        D = pairwise_sq_distances(X)
        sigma0 = resolve_sigma0(D, self.sigma0)
        trace = hierarchical_search(
            D,
            self.n_clusters,
            sigma0,
            tuple(self.depth_schedule),
            self.random_state,
            max_steps=self.max_steps,
            labels=None if y is None else np.asarray(y),
            restriction_policy=self.restriction,
            max_iters=self.max_iter,
        )
        best = trace.best_by_cnnc()
        self.X_fit_ = X
        self.trace_ = trace
        self.sigma_ = best.sigma
        self.labels_ = np.asarray(best.assignment, dtype=np.int64)
        self.cnnc_ = best.cnnc
        self.n_iter_ = best.kkm_iterations
        self.lower_bound_ = sigma_lower_bound(D).sigma
        return self
