"""Graph-based two-sample tests for sparse categorical data."""

from .catgraph import (
    CapExceeded,
    CategoryGraph,
    count_embeddings,
    count_msts,
    enumerate_msts,
    hypercube_tree_count,
    mst_single,
    umst_edges,
    unng_categories,
)
from .distance import DistanceError, DistanceMatrix, pairwise_distance
from .inference import (
    TestResult,
    bootstrap_moments_r,
    condition_diagnostics,
    mc_perm_pvalue,
    perm_moments_r,
    perm_moments_t,
    run_test,
)
from .stats import chisq, compute, prepare, r_amdp, r_amst, r_c0, r_umst, r_unng_subjects, t_c0
from .table import ContingencyTable, TableError, from_records, from_subjects

__version__ = "0.1.0"

__all__ = [
    "CapExceeded",
    "CategoryGraph",
    "ContingencyTable",
    "DistanceError",
    "DistanceMatrix",
    "TableError",
    "TestResult",
    "bootstrap_moments_r",
    "chisq",
    "compute",
    "condition_diagnostics",
    "count_embeddings",
    "count_msts",
    "enumerate_msts",
    "from_records",
    "from_subjects",
    "hypercube_tree_count",
    "mc_perm_pvalue",
    "mst_single",
    "pairwise_distance",
    "perm_moments_r",
    "perm_moments_t",
    "prepare",
    "r_amdp",
    "r_amst",
    "r_c0",
    "r_umst",
    "r_unng_subjects",
    "run_test",
    "t_c0",
    "umst_edges",
    "unng_categories",
]
