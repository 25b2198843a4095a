"""Graph-spanning-ratio change-point detection for multivariate streams.

A window of recent observations is represented as a weighted graph over its
points; ratios of the window's spanning distance to those of its halves are
dimensionless statistics sensitive to location and dispersion changes.
Thresholds are calibrated by permutation, including a family-wise level for
monitoring several window lengths at once.
"""

__version__ = "0.1.0"

from .calibrate import (
    CalibrationMode,
    CalibrationTable,
    calibrate,
    calibrate_alpha_star,
    online_null,
    permute,
    quantile_threshold,
    static_null,
)
from .core import (
    CalibrationMismatchError,
    ConfigError,
    DegenerateTrainingError,
    DegenerateWindowError,
    DetectionEvent,
    DetectorStateError,
    GraphKind,
    GsrError,
    Multiplicity,
    ObservationError,
    SplitStatistics,
    Statistic,
    WindowConfig,
    seeded_rng,
)
from .detect import (
    DetectorStatus,
    OnlineDetector,
    Outcome,
    StaticDecision,
    static_detect,
)
from .graph import (
    WindowGraph,
    build_graph,
    build_window_graphs,
    complete_spanning_distance,
    complete_spanning_distance_naive,
    mst_spanning_distance,
    squared_distance,
)
from .ratios import mean_ratio, scan_ratios, variance_ratio
from .simulate import (
    ChangeKind,
    Method,
    PowerCell,
    PowerReport,
    Scenario,
    generate,
    ibgec_null,
    ibgec_statistic,
    run_online_power,
    run_static_power,
)
from .validate import check_dg_moments, check_null_rates, check_spanning_identity, self_check

__all__ = [
    "__version__",
    "CalibrationMismatchError",
    "CalibrationMode",
    "CalibrationTable",
    "ChangeKind",
    "ConfigError",
    "DegenerateTrainingError",
    "DegenerateWindowError",
    "DetectionEvent",
    "DetectorStateError",
    "DetectorStatus",
    "GraphKind",
    "GsrError",
    "Method",
    "Multiplicity",
    "ObservationError",
    "OnlineDetector",
    "Outcome",
    "PowerCell",
    "PowerReport",
    "Scenario",
    "SplitStatistics",
    "StaticDecision",
    "Statistic",
    "WindowConfig",
    "WindowGraph",
    "build_graph",
    "build_window_graphs",
    "calibrate",
    "calibrate_alpha_star",
    "check_dg_moments",
    "check_null_rates",
    "check_spanning_identity",
    "complete_spanning_distance",
    "complete_spanning_distance_naive",
    "generate",
    "ibgec_null",
    "ibgec_statistic",
    "mean_ratio",
    "mst_spanning_distance",
    "online_null",
    "permute",
    "quantile_threshold",
    "run_online_power",
    "run_static_power",
    "scan_ratios",
    "seeded_rng",
    "self_check",
    "squared_distance",
    "static_detect",
    "static_null",
    "variance_ratio",
]
