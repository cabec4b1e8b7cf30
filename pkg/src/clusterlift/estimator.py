"""Off-policy value estimation for cluster-level targets.

The value estimator credits each cluster's observed target value to the
units whose logged treatment agrees with the candidate policy, inverse
weighted by the logging propensity:

    V(policy) = (1/n) * sum_i T_i * [ sum_j ( 1{A_ij = pi_ij} / e_j(pi_ij)
                                              - 1 ) + 1 ]

which is unbiased under unit-level randomized logging even when units
interfere within a cluster.  Replacing the hard indicator with a soft
score yields a differentiable surrogate whose per-unit coefficient is
the signed inverse-propensity weight ``w = A/e1 - (1-A)/(1-e1)``.

Policies and scores are plain numpy arrays aligned with the dataset's
unit order; validators below enforce shape and range.
"""

from __future__ import annotations

import numpy as np

from .domain import (
    AlignmentError,
    Dataset,
    DatasetColumns,
    Level,
    PositivityError,
    Target,
    TargetSpec,
    UnitRecord,
    ValidationError,
    cluster_target_values,
)

__all__ = [
    "PROPENSITY_MARGIN",
    "addipw_objective",
    "addipw_value",
    "as_policy",
    "as_scores",
    "naive_objective",
    "unit_weight",
    "unit_weights",
]

# Propensities this close to 0 or 1 are rejected, not clipped: silent
# clipping would hide badly logged data behind a biased estimate.
PROPENSITY_MARGIN = 1e-6


def _check_propensities(e1: np.ndarray) -> None:
    bad = (e1 < PROPENSITY_MARGIN) | (e1 > 1.0 - PROPENSITY_MARGIN)
    if bad.any():
        worst = float(e1[bad][0])
        raise PositivityError(
            f"propensity {worst!r} outside [{PROPENSITY_MARGIN}, "
            f"{1.0 - PROPENSITY_MARGIN}]; refusing to inverse-weight it"
        )


def unit_weight(unit: UnitRecord) -> float:
    """Signed inverse-propensity weight of one logged unit.

    ``+1/e1`` for treated units, ``-1/(1-e1)`` for control units.
    """
    e1 = unit.propensity_treated
    _check_propensities(np.asarray([e1]))
    if unit.treatment == 1:
        return 1.0 / e1
    return -1.0 / (1.0 - e1)


def unit_weights(cols: DatasetColumns) -> np.ndarray:
    """Vectorized signed inverse-propensity weights for every unit."""
    e1 = cols.propensity_treated
    _check_propensities(e1)
    a = cols.treatment.astype(np.float64)
    return a / e1 - (1.0 - a) / (1.0 - e1)


def as_policy(values, n_units: int) -> np.ndarray:
    """Validate a per-unit hard treatment assignment (0/1 per unit)."""
    arr = np.asarray(values)
    if arr.shape != (n_units,):
        raise AlignmentError(
            f"policy has shape {arr.shape}, expected ({n_units},) to match the dataset"
        )
    arr = arr.astype(np.float64)
    if not np.isin(arr, (0.0, 1.0)).all():
        raise ValidationError("policy decisions must be 0 or 1")
    return arr.astype(np.int64)


def as_scores(values, n_units: int) -> np.ndarray:
    """Validate per-unit soft treatment scores (each in [0, 1])."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (n_units,):
        raise AlignmentError(
            f"scores have shape {arr.shape}, expected ({n_units},) to match the dataset"
        )
    if not np.isfinite(arr).all():
        raise ValidationError("scores must be finite")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValidationError("scores must lie in [0, 1]")
    return arr


def _require_cluster_level(spec: TargetSpec, op: str) -> None:
    if spec.level is not Level.CLUSTER_AWARE:
        raise ValidationError(
            f"{op} estimates cluster-level value; spec.level must be CLUSTER_AWARE"
        )


def addipw_value(dataset: Dataset, policy, spec: TargetSpec) -> float:
    """Estimated mean cluster target value under a hard policy.

    Clusters whose target is absent (IPC_PROFIT without a conversion)
    contribute zero but still count toward ``n``.
    """
    _require_cluster_level(spec, "addipw_value")
    cols = dataset.columns
    pi = as_policy(policy, cols.n_units)
    e1 = cols.propensity_treated
    _check_propensities(e1)
    match = (cols.treatment == pi).astype(np.float64)
    e_pi = np.where(pi == 1, e1, 1.0 - e1)
    bracket = cols.cluster_sum(match / e_pi - 1.0) + 1.0
    t_vals, present = cluster_target_values(cols, spec)
    contrib = np.where(present, t_vals * bracket, 0.0)
    return float(contrib.sum() / cols.n_clusters)


def addipw_objective(dataset: Dataset, scores, spec: TargetSpec) -> float:
    """Differentiable cluster-aware surrogate objective.

    ``(1/n) * sum_i T_i * sum_j w_ij * f_ij`` where ``f`` is the soft
    score.  Maximizing it over hard 0/1 scores recovers the policy
    ranking of :func:`addipw_value` (the two differ by a
    policy-independent constant).
    """
    _require_cluster_level(spec, "addipw_objective")
    cols = dataset.columns
    f = as_scores(scores, cols.n_units)
    w = unit_weights(cols)
    inner = cols.cluster_sum(w * f)
    t_vals, present = cluster_target_values(cols, spec)
    contrib = np.where(present, t_vals * inner, 0.0)
    return float(contrib.sum() / cols.n_clusters)


def _unit_level_targets(cols: DatasetColumns, spec: TargetSpec) -> np.ndarray:
    if spec.target is Target.CONVERSION:
        return cols.converted
    if spec.target is Target.NAIVE_PROFIT:
        return cols.revenue - cols.cost
    if spec.target is Target.CRVTW_REVENUE:
        return cols.revenue
    # IPC_PROFIT: per-unit profit had the unit been treated, restricted
    # to converted units; unconverted units carry no signal.
    return np.where(
        cols.converted != 0.0,
        cols.revenue - spec.discount_rate * cols.price * cols.converted,
        0.0,
    )


def naive_objective(dataset: Dataset, scores, spec: TargetSpec) -> float:
    """Interference-unaware surrogate: each unit weighted by its own outcome.

    ``(1/n) * sum_ij t_ij * w_ij * f_ij`` with the per-unit target
    ``t_ij`` given by ``spec.target``.  Requires ``spec.level`` to be
    UNIT_NAIVE.
    """
    if spec.level is not Level.UNIT_NAIVE:
        raise ValidationError(
            "naive_objective is the unit-level surrogate; spec.level must be UNIT_NAIVE"
        )
    cols = dataset.columns
    f = as_scores(scores, cols.n_units)
    w = unit_weights(cols)
    t = _unit_level_targets(cols, spec)
    return float(np.sum(t * w * f) / cols.n_clusters)
