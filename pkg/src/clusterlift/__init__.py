"""clusterlift: off-policy uplift modeling under clustered interference.

Simulates promotion experiments where treating one item cannibalizes its
cluster-mates, trains per-unit uplift scorers against cluster-aware or
unit-naive transformed targets, and evaluates policies with an additive
inverse-propensity-weighted value estimator plus Qini/AUC summaries.
"""

from .domain import (
    AlignmentError,
    Cluster,
    Dataset,
    DatasetColumns,
    Level,
    PositivityError,
    Target,
    TargetSpec,
    UnitRecord,
    ValidationError,
    build_columns,
    cluster_target_value,
    cluster_target_values,
    load_dataset,
    save_dataset,
    validate_dataset,
)
from .estimator import (
    addipw_objective,
    addipw_value,
    as_policy,
    as_scores,
    naive_objective,
    unit_weight,
    unit_weights,
)
from .evaluation import (
    DEFAULT_PHI_GRID,
    METHOD_REGISTRY,
    EstimatorKind,
    Metric,
    QiniCurve,
    ReplicationResult,
    ReplicationSummary,
    auc,
    policy_at_fraction,
    qini_curve,
    read_results_csv,
    run_replications,
    summarize,
    write_results_csv,
    write_summary_csv,
)
from .learner import (
    PolicyParams,
    TrainConfig,
    TrainingDivergenceError,
    load_model,
    objective_and_gradient,
    save_model,
    score,
    train,
    train_transformed,
)
from .simulator import (
    AdditiveTruth,
    Coefficients,
    OracleTarget,
    SimConfig,
    resolve_coefficients,
    simulate,
    simulate_additive,
    true_mean_outcome,
)
from .transforms import (
    TransformedDataset,
    objective_from_z,
    write_transformed_csv,
    z_transform,
)

__version__ = "0.1.0"

__all__ = [
    "AdditiveTruth",
    "AlignmentError",
    "Cluster",
    "Coefficients",
    "DEFAULT_PHI_GRID",
    "Dataset",
    "DatasetColumns",
    "EstimatorKind",
    "Level",
    "METHOD_REGISTRY",
    "Metric",
    "OracleTarget",
    "PolicyParams",
    "PositivityError",
    "QiniCurve",
    "ReplicationResult",
    "ReplicationSummary",
    "SimConfig",
    "Target",
    "TargetSpec",
    "TrainConfig",
    "TrainingDivergenceError",
    "TransformedDataset",
    "UnitRecord",
    "ValidationError",
    "addipw_objective",
    "addipw_value",
    "as_policy",
    "as_scores",
    "auc",
    "build_columns",
    "cluster_target_value",
    "cluster_target_values",
    "load_dataset",
    "load_model",
    "naive_objective",
    "objective_and_gradient",
    "objective_from_z",
    "policy_at_fraction",
    "qini_curve",
    "read_results_csv",
    "resolve_coefficients",
    "run_replications",
    "save_dataset",
    "save_model",
    "score",
    "simulate",
    "simulate_additive",
    "summarize",
    "train",
    "train_transformed",
    "true_mean_outcome",
    "unit_weight",
    "unit_weights",
    "validate_dataset",
    "write_results_csv",
    "write_summary_csv",
    "write_transformed_csv",
    "z_transform",
]
