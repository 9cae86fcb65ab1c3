"""Multi-user traffic equilibrium for mixed gasoline/electric fleets.

Fixed-class user equilibrium on road networks where gasoline and
electric vehicles share links but face different monetary distance
costs, plus congestion metrics and electric-penetration sweep analysis.
"""

from .analysis import (
    AnalysisError,
    Classification,
    LevelRecord,
    PLATEAU_EPSILON,
    SweepError,
    SweepResult,
    classify_city,
    critical_thresholds,
    detect_plateaus,
    detect_transitions,
    path_overlap_ratio,
    run_sweep,
    sweep_from_records,
)
from .cost import (
    ClassCost,
    CostConfig,
    CostConfigError,
    EV_CLASS,
    GV_CLASS,
    bpr_integral,
    bpr_time,
    bpr_time_derivative,
    bundled_cities,
    bundled_config,
    cost_config_from_dict,
    dump_cost_config,
    generalized_link_cost,
    load_cost_config,
    vehicle_costs,
)
from .demand import (
    ClassDemand,
    CommuteStats,
    DemandError,
    ODMatrix,
    commute_distance_stats,
    load_od_csv,
    split_demand,
)
from .equilibrium import (
    EquilibriumSolution,
    InfeasibleProblemError,
    LinkFlows,
    SolverError,
    SolverOptions,
    UnsupportedOperationError,
    beckmann_objective,
    project_simplex,
    solve,
    solve_extra_gradient,
    solve_fw,
    solve_primal_dual,
    wardrop_residual,
)
from .metrics import (
    ComparisonReport,
    MetricsError,
    MetricsReport,
    ProfileBin,
    avg_travel_time,
    compare,
    compare_reports,
    compute_report,
    delay_factor_diff,
    delay_factors,
    link_congested_time_profile,
    link_congested_times,
    potential_savings,
    potential_savings_diff,
    road_utilization,
    voc,
)
from .network import (
    Link,
    Network,
    NetworkValidationError,
    Node,
    Zone,
    bundled_road_attributes,
    centroid_node_id,
    generate_connectors,
    load_network,
    shortest_path,
)

__version__ = "1.0.0"

__all__ = [
    "AnalysisError",
    "Classification",
    "ClassCost",
    "ClassDemand",
    "CommuteStats",
    "ComparisonReport",
    "CostConfig",
    "CostConfigError",
    "DemandError",
    "EquilibriumSolution",
    "EV_CLASS",
    "GV_CLASS",
    "InfeasibleProblemError",
    "LevelRecord",
    "Link",
    "LinkFlows",
    "MetricsError",
    "MetricsReport",
    "Network",
    "NetworkValidationError",
    "Node",
    "ODMatrix",
    "PLATEAU_EPSILON",
    "ProfileBin",
    "SolverError",
    "SolverOptions",
    "SweepError",
    "SweepResult",
    "UnsupportedOperationError",
    "Zone",
    "avg_travel_time",
    "beckmann_objective",
    "bpr_integral",
    "bpr_time",
    "bpr_time_derivative",
    "bundled_cities",
    "bundled_config",
    "bundled_road_attributes",
    "centroid_node_id",
    "classify_city",
    "commute_distance_stats",
    "compare",
    "compare_reports",
    "compute_report",
    "cost_config_from_dict",
    "critical_thresholds",
    "delay_factor_diff",
    "delay_factors",
    "detect_plateaus",
    "detect_transitions",
    "dump_cost_config",
    "generalized_link_cost",
    "generate_connectors",
    "link_congested_time_profile",
    "link_congested_times",
    "load_cost_config",
    "load_network",
    "load_od_csv",
    "path_overlap_ratio",
    "potential_savings",
    "potential_savings_diff",
    "project_simplex",
    "road_utilization",
    "run_sweep",
    "shortest_path",
    "solve",
    "solve_extra_gradient",
    "solve_fw",
    "solve_primal_dual",
    "split_demand",
    "sweep_from_records",
    "vehicle_costs",
    "voc",
    "wardrop_residual",
]
