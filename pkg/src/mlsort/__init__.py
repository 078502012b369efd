"""Learned-CDF bucket sorting with a monotone single-hidden-layer network."""
from .analysis import deviation_stats, expected_occupancy, occupancy_fit, occupancy_histogram, verify_sorted
from .distributions import DistributionSpec, exact_cdf, generate, mixture, preset, truncated_normal, uniform
from .exceptions import DistributionDriftWarning, NonFiniteKeyError, TrainingError, VerificationError
from .models import GVMRegressor, GvmParams, PiecewiseLinearCDF, TrainConfig, check_monotone, gvm_forward, train_gvm
from .rank_index import RankIndex, build_index, query
from .sorter import MLSorter, SortConfig, estimate_rank, ml_sort, run_ml_sort

__version__ = "0.1.0"

__all__ = [
    "DistributionDriftWarning",
    "DistributionSpec",
    "GVMRegressor",
    "GvmParams",
    "MLSorter",
    "NonFiniteKeyError",
    "PiecewiseLinearCDF",
    "RankIndex",
    "SortConfig",
    "TrainConfig",
    "TrainingError",
    "VerificationError",
    "build_index",
    "check_monotone",
    "deviation_stats",
    "estimate_rank",
    "exact_cdf",
    "expected_occupancy",
    "generate",
    "gvm_forward",
    "mixture",
    "ml_sort",
    "occupancy_fit",
    "occupancy_histogram",
    "preset",
    "query",
    "run_ml_sort",
    "train_gvm",
    "truncated_normal",
    "uniform",
    "verify_sorted",
]
