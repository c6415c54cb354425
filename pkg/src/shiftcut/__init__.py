"""Shifted Min Cut clustering toolkit."""
from .costs import (
    ClusteringSolution,
    adaptive_ratio_cut_cost,
    adaptive_regularizer_value,
    correlation_clustering_cost,
    min_cut_cost,
    normalized_cut_cost,
    ratio_assoc_cost,
    ratio_cut_cost,
    regularizer_decomposition,
    shifted_min_cut_cost,
)
from .errors import ConsistencyError, DegeneratePartitionError, DegenerateStateError, ValidationError
from .matrix import (
    ShiftSpec,
    adaptive_shift,
    constant_shift,
    distances_to_similarities,
    squared_euclidean_distances,
    validate,
)
from .optimizer import SearchConfig, SearchReport, brute_force_optimum, local_search, move_delta

__version__ = "0.1.0"
