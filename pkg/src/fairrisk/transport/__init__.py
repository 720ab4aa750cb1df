from .coupling import (
    DEFAULT_MEMORY_BUDGET,
    BudgetExceeded,
    DiscreteCoupling,
    barycentric_project,
    solve_coupling,
    squared_distances,
)
from .diagnostics import HistogramTable, diagnose_marginals, overlap_coefficient, shared_histogram
from .maps import (
    AveragedTransportMap,
    ForestSettings,
    TransportMap,
    apply_map,
    batched_fit_map,
    fit_smoothed_map,
    transport_points,
)

__all__ = [
    "DEFAULT_MEMORY_BUDGET",
    "BudgetExceeded",
    "DiscreteCoupling",
    "barycentric_project",
    "solve_coupling",
    "squared_distances",
    "HistogramTable",
    "diagnose_marginals",
    "overlap_coefficient",
    "shared_histogram",
    "AveragedTransportMap",
    "ForestSettings",
    "TransportMap",
    "apply_map",
    "batched_fit_map",
    "fit_smoothed_map",
    "transport_points",
]
