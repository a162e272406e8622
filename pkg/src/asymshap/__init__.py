"""Asymmetric data Shapley: exact oracles, Monte Carlo, and exact KNN values."""

from .core import (
    Dataset,
    OrderedPartition,
    Relation,
    WeightSystem,
    compare,
    is_ordered_permutation,
    make_ordered_partition,
    make_rng,
    max_set,
    num_ordered_permutations,
    permutation_weight,
    sample_ordered_permutation,
    sample_ordered_permutations,
)
from .errors import ParseError, ValuationError
from .experiments import (
    SyntheticSpec,
    addition_curve,
    allocation_summary,
    duplication_check,
    generate,
    loo_values,
    removal_curve,
)
from .io import __version__, load_dataset, load_partition, load_report, save_dataset, save_partition, save_report
from .knn import hypergeom_ratio, knn_ads
from .montecarlo import McConfig, convergence_check, estimate_mc_ads
from .oracle import (
    class_increments,
    exact_ads_general,
    exact_ads_icuws,
    exact_data_shapley,
    exact_value_difference,
)
from .report import ValueReport
from .utilities import CentroidUtility, KNNUtility, TableUtility, knn_utility, utility_table

__all__ = [name for name in dir() if not name.startswith("_")]
