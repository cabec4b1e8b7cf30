"""Outcome-to-regression-target transforms.

Policy training never touches the estimator directly: each unit's
contribution to the surrogate objective is linear in its score, so the
whole dataset collapses to one signed regression target per unit,

    z_ij = T * w_ij

where ``w`` is the signed inverse-propensity weight and ``T`` is either
the unit's cluster target value (cluster-aware) or its own outcome
(unit-naive).  Maximizing ``(1/n) sum z_ij * f(x_ij)`` is then exactly
the corresponding surrogate objective.

Units without a defined target (IPC without a conversion) are kept with
``z = 0`` and marked ``filtered`` so downstream consumers can tell
"no signal" apart from "signal that happens to be zero".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import estimator
from ._util import fmt, freeze
from .domain import (
    Dataset,
    Level,
    Target,
    TargetSpec,
    cluster_target_values,
)

__all__ = [
    "TransformedDataset",
    "objective_from_z",
    "write_transformed_csv",
    "z_transform",
]


@dataclass(frozen=True)
class TransformedDataset:
    """Per-unit regression view of a dataset for a given target spec.

    Arrays are aligned with the source dataset's unit order and are
    read-only.  ``n_clusters`` preserves the original normalization
    constant of the surrogate objective.
    """

    covariates: np.ndarray   # (N, d) float64
    z_values: np.ndarray     # (N,)  float64
    filtered: np.ndarray     # (N,)  bool
    cluster_id: np.ndarray   # (N,)  int64, owning cluster of each unit
    unit_index: np.ndarray   # (N,)  int64
    n_clusters: int
    spec: TargetSpec
    provenance: str = ""

    @property
    def n_units(self) -> int:
        return self.z_values.shape[0]

    @property
    def covariate_dim(self) -> int:
        return self.covariates.shape[1]


def z_transform(dataset: Dataset, spec: TargetSpec) -> TransformedDataset:
    """Collapse outcomes, propensities and target choice into per-unit z.

    For CLUSTER_AWARE specs every unit inherits its cluster's target
    value; for UNIT_NAIVE specs it carries its own outcome.  In both
    cases the value is multiplied by the unit's signed inverse
    propensity weight.
    """
    cols = dataset.columns
    w = estimator.unit_weights(cols)
    if spec.level is Level.CLUSTER_AWARE:
        t_cluster, present = cluster_target_values(cols, spec)
        t_unit = t_cluster[cols.cluster_ord]
        filtered = ~present[cols.cluster_ord]
    else:
        t_unit = estimator._unit_level_targets(cols, spec)
        if spec.target is Target.IPC_PROFIT:
            filtered = cols.converted == 0.0
        else:
            filtered = np.zeros(cols.n_units, dtype=bool)
    z = np.where(filtered, 0.0, t_unit * w)
    return TransformedDataset(
        covariates=cols.covariates,
        z_values=freeze(z),
        filtered=freeze(filtered),
        cluster_id=freeze(cols.cluster_id[cols.cluster_ord]),
        unit_index=cols.unit_index,
        n_clusters=cols.n_clusters,
        spec=spec,
        provenance=dataset.provenance,
    )


def objective_from_z(transformed: TransformedDataset, scores) -> float:
    """Surrogate objective evaluated from the collapsed targets.

    Equals :func:`~clusterlift.estimator.addipw_objective` (cluster-
    aware) or :func:`~clusterlift.estimator.naive_objective` (unit-
    naive) on the source dataset, up to floating-point roundoff.
    """
    f = estimator.as_scores(scores, transformed.n_units)
    return float(np.sum(transformed.z_values * f) / transformed.n_clusters)


def write_transformed_csv(transformed: TransformedDataset, path) -> None:
    """Write ``cluster_id,unit_index,x0..x{d-1},z,filtered`` rows.

    Floats use shortest round-trip formatting; ``filtered`` is 0/1.
    """
    d = transformed.covariate_dim
    header = ["cluster_id", "unit_index"] + [f"x{k}" for k in range(d)] + ["z", "filtered"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in range(transformed.n_units):
            row = [
                str(int(transformed.cluster_id[r])),
                str(int(transformed.unit_index[r])),
                *(fmt(v) for v in transformed.covariates[r]),
                fmt(transformed.z_values[r]),
                str(int(transformed.filtered[r])),
            ]
            fh.write(",".join(row) + "\n")
