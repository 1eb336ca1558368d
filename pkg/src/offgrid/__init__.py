"""Kernel k-means with RBF bandwidths found off the grid."""
from .data import DataSet, generate_tight_example, load_csv, pairwise_sq_distances
from .estimator import KernelKMeans, OffGridKernelKMeans
from .kernel import KernelMatrix, rbf_kernel
from .kkm import Partition, kkm_run, random_partition
from .quality import cnnc, nmi
from .search import (
    critical_search,
    hierarchical_search,
    offgrid_driver,
    sigma_lower_bound,
)

__version__ = "0.1.0"

__all__ = [
    "DataSet",
    "KernelKMeans",
    "KernelMatrix",
    "OffGridKernelKMeans",
    "Partition",
    "cnnc",
    "critical_search",
    "generate_tight_example",
    "hierarchical_search",
    "kkm_run",
    "load_csv",
    "nmi",
    "offgrid_driver",
    "pairwise_sq_distances",
    "random_partition",
    "rbf_kernel",
    "sigma_lower_bound",
]
