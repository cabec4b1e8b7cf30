"""Core data model for clustered uplift datasets.

Units (e.g. items in a recommendation slate) live inside clusters.
Outcomes are logged per unit, but treating one unit can shift its
siblings' outcomes, so value is defined -- and estimated -- at the
cluster level.  This module owns the record types, the economic target
definitions, and the JSON-lines persistence format.

Datasets are immutable after construction.  Every dataset exposes a
columnar view (:class:`DatasetColumns`) holding read-only numpy arrays
in a fixed unit order (clusters in stored order, units in stored order
within each cluster); all vectorized math in the package runs off that
view, which keeps summation order deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from ._util import freeze

__all__ = [
    "AlignmentError",
    "Cluster",
    "Dataset",
    "DatasetColumns",
    "Level",
    "PositivityError",
    "Target",
    "TargetSpec",
    "UnitRecord",
    "ValidationError",
    "cluster_target_value",
    "cluster_target_values",
    "load_dataset",
    "save_dataset",
]


class ValidationError(ValueError):
    """A record, cluster, dataset or file violates a structural invariant."""


class PositivityError(ValidationError):
    """A stored propensity is too extreme for inverse weighting."""


class AlignmentError(ValidationError):
    """A per-unit vector does not line up with the dataset's units."""


class Target(str, Enum):
    """What a policy is optimized for.

    CONVERSION       cluster mean conversion rate.
    NAIVE_PROFIT     mean revenue minus mean realized discount cost.
    CRVTW_REVENUE    mean revenue (treats revenue as the value of a
                     conversion, ignoring discount cost).
    IPC_PROFIT       mean revenue minus the counterfactual discount cost
                     had every converted unit been treated; clusters
                     without a conversion carry no signal (absent).
    """

    CONVERSION = "conversion"
    NAIVE_PROFIT = "naive-profit"
    CRVTW_REVENUE = "crvtw-revenue"
    IPC_PROFIT = "ipc-profit"


class Level(str, Enum):
    """Whether the target is credited to the whole cluster or per unit.

    CLUSTER_AWARE    every unit in cluster i shares the cluster-level
                     value (interference-aware).
    UNIT_NAIVE       each unit carries only its own outcome.
    """

    CLUSTER_AWARE = "cluster-aware"
    UNIT_NAIVE = "unit-naive"


@dataclass(frozen=True)
class TargetSpec:
    """A (target, level) pair plus the discount rate used by IPC_PROFIT.

    ``discount_rate`` parameterizes the counterfactual cost term of
    IPC_PROFIT (the discount that *would* have been paid on each
    converted unit); other targets ignore it.  Every (target, level)
    combination is legal.
    """

    target: Target
    level: Level
    discount_rate: float = 0.08

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "target", Target(self.target))
            object.__setattr__(self, "level", Level(self.level))
        except ValueError as e:
            raise ValidationError(str(e)) from None
        if not (0.0 < self.discount_rate < 1.0) or not math.isfinite(self.discount_rate):
            raise ValidationError(
                f"discount_rate must lie in (0, 1), got {self.discount_rate!r}"
            )


@dataclass(frozen=True)
class UnitRecord:
    """One logged unit.

    ``converted`` is 0/1 in observational data; the additive validation
    generator stores continuous pseudo-outcomes in the same field so
    that cluster means reproduce its closed-form outcome model.  The
    binary requirement is enforced by the file loader and saver, not
    here.
    """

    unit_index: int
    covariates: tuple[float, ...]
    treatment: int
    propensity_treated: float
    converted: float
    revenue: float
    cost: float
    price: float

    def __post_init__(self) -> None:
        if self.treatment not in (0, 1):
            raise ValidationError(
                f"unit {self.unit_index}: treatment must be 0 or 1, got {self.treatment!r}"
            )
        if not (0.0 < self.propensity_treated < 1.0):
            raise ValidationError(
                f"unit {self.unit_index}: propensity_treated must lie strictly "
                f"inside (0, 1), got {self.propensity_treated!r}"
            )
        if not all(math.isfinite(x) for x in self.covariates):
            raise ValidationError(f"unit {self.unit_index}: non-finite covariate")
        for name in ("converted", "revenue", "cost", "price"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"unit {self.unit_index}: non-finite {name}")
        if self.revenue < 0 or self.cost < 0:
            raise ValidationError(
                f"unit {self.unit_index}: revenue and cost must be non-negative"
            )
        if self.price <= 0:
            raise ValidationError(
                f"unit {self.unit_index}: price must be positive, got {self.price!r}"
            )
        if self.revenue > self.price * (1.0 + 1e-12):
            raise ValidationError(
                f"unit {self.unit_index}: revenue {self.revenue!r} exceeds "
                f"price {self.price!r}"
            )
        if self.converted == 0.0 and (self.revenue != 0.0 or self.cost != 0.0):
            raise ValidationError(
                f"unit {self.unit_index}: unconverted unit carries revenue or cost"
            )
        if self.cost > 0.0 and (self.treatment != 1 or self.converted != 1.0):
            raise ValidationError(
                f"unit {self.unit_index}: cost requires treatment == 1 and converted == 1"
            )


@dataclass(frozen=True)
class Cluster:
    """An ordered group of units with cached outcome means."""

    cluster_id: int
    units: tuple[UnitRecord, ...]
    mean_conversion: float
    mean_revenue: float
    mean_cost: float

    @classmethod
    def from_units(cls, cluster_id: int, units: Iterable[UnitRecord]) -> "Cluster":
        units = tuple(units)
        if not units:
            raise ValidationError(f"cluster {cluster_id}: has no units")
        seen = {u.unit_index for u in units}
        if len(seen) != len(units):
            raise ValidationError(f"cluster {cluster_id}: duplicate unit_index")
        m = float(len(units))
        return cls(
            cluster_id=int(cluster_id),
            units=units,
            mean_conversion=sum(u.converted for u in units) / m,
            mean_revenue=sum(u.revenue for u in units) / m,
            mean_cost=sum(u.cost for u in units) / m,
        )

    @property
    def size(self) -> int:
        return len(self.units)

    @property
    def mean_profit(self) -> float:
        return self.mean_revenue - self.mean_cost


@dataclass(frozen=True)
class DatasetColumns:
    """Columnar, read-only view of a dataset's units and clusters.

    Unit arrays have one row per unit in dataset order; cluster arrays
    have one entry per cluster in dataset order.  ``cluster_ord`` maps
    each unit to the ordinal position (0..n-1) of its owning cluster.
    """

    covariates: np.ndarray          # (N, d) float64
    treatment: np.ndarray           # (N,)  int64, values in {0, 1}
    propensity_treated: np.ndarray  # (N,)  float64
    converted: np.ndarray           # (N,)  float64
    revenue: np.ndarray             # (N,)  float64
    cost: np.ndarray                # (N,)  float64
    price: np.ndarray               # (N,)  float64
    unit_index: np.ndarray          # (N,)  int64
    cluster_ord: np.ndarray         # (N,)  int64
    cluster_id: np.ndarray          # (n,)  int64
    cluster_size: np.ndarray        # (n,)  int64
    mean_conversion: np.ndarray     # (n,)  float64
    mean_revenue: np.ndarray        # (n,)  float64
    mean_cost: np.ndarray           # (n,)  float64

    @property
    def n_units(self) -> int:
        return self.covariates.shape[0]

    @property
    def n_clusters(self) -> int:
        return self.cluster_id.shape[0]

    @property
    def covariate_dim(self) -> int:
        return self.covariates.shape[1]

    def cluster_sum(self, per_unit: np.ndarray) -> np.ndarray:
        """Sum a per-unit vector within each cluster (deterministic order)."""
        return np.bincount(self.cluster_ord, weights=per_unit, minlength=self.n_clusters)


def _columns_from_clusters(clusters: Sequence[Cluster], covariate_dim: int) -> DatasetColumns:
    n_units = sum(c.size for c in clusters)
    x = np.empty((n_units, covariate_dim))
    a = np.empty(n_units, dtype=np.int64)
    e1 = np.empty(n_units)
    y = np.empty(n_units)
    rev = np.empty(n_units)
    cost = np.empty(n_units)
    price = np.empty(n_units)
    j_idx = np.empty(n_units, dtype=np.int64)
    ord_ = np.empty(n_units, dtype=np.int64)
    row = 0
    for pos, cluster in enumerate(clusters):
        for u in cluster.units:
            if len(u.covariates) != covariate_dim:
                raise ValidationError(
                    f"cluster {cluster.cluster_id} unit {u.unit_index}: expected "
                    f"{covariate_dim} covariates, got {len(u.covariates)}"
                )
            x[row] = u.covariates
            a[row] = u.treatment
            e1[row] = u.propensity_treated
            y[row] = u.converted
            rev[row] = u.revenue
            cost[row] = u.cost
            price[row] = u.price
            j_idx[row] = u.unit_index
            ord_[row] = pos
            row += 1
    return build_columns(
        covariates=x, treatment=a, propensity_treated=e1, converted=y,
        revenue=rev, cost=cost, price=price, unit_index=j_idx, cluster_ord=ord_,
        cluster_id=np.array([c.cluster_id for c in clusters], dtype=np.int64),
    )


def build_columns(
    *,
    covariates: np.ndarray,
    treatment: np.ndarray,
    propensity_treated: np.ndarray,
    converted: np.ndarray,
    revenue: np.ndarray,
    cost: np.ndarray,
    price: np.ndarray,
    unit_index: np.ndarray,
    cluster_ord: np.ndarray,
    cluster_id: np.ndarray,
) -> DatasetColumns:
    """Assemble a :class:`DatasetColumns`, deriving the per-cluster means."""
    n = len(cluster_id)
    sizes = np.bincount(cluster_ord, minlength=n)
    if np.any(sizes == 0):
        empty = int(cluster_id[np.argmax(sizes == 0)])
        raise ValidationError(f"cluster {empty}: has no units")
    sizes_f = sizes.astype(np.float64)
    sum_in = lambda v: np.bincount(cluster_ord, weights=v, minlength=n)
    return DatasetColumns(
        covariates=freeze(np.asarray(covariates, dtype=np.float64)),
        treatment=freeze(np.asarray(treatment, dtype=np.int64)),
        propensity_treated=freeze(np.asarray(propensity_treated, dtype=np.float64)),
        converted=freeze(np.asarray(converted, dtype=np.float64)),
        revenue=freeze(np.asarray(revenue, dtype=np.float64)),
        cost=freeze(np.asarray(cost, dtype=np.float64)),
        price=freeze(np.asarray(price, dtype=np.float64)),
        unit_index=freeze(np.asarray(unit_index, dtype=np.int64)),
        cluster_ord=freeze(np.asarray(cluster_ord, dtype=np.int64)),
        cluster_id=freeze(np.asarray(cluster_id, dtype=np.int64)),
        cluster_size=freeze(sizes),
        mean_conversion=freeze(sum_in(converted) / sizes_f),
        mean_revenue=freeze(sum_in(revenue) / sizes_f),
        mean_cost=freeze(sum_in(cost) / sizes_f),
    )


class Dataset:
    """Immutable collection of clusters.

    Construct either from :class:`Cluster` objects or, on vectorized
    paths, directly from a :class:`DatasetColumns` via
    :meth:`from_columns`; the other representation is materialized
    lazily on first access.
    """

    def __init__(
        self,
        clusters: Iterable[Cluster],
        covariate_dim: int | None = None,
        provenance: str = "",
    ) -> None:
        clusters = tuple(clusters)
        if not clusters:
            raise ValidationError("dataset has no clusters")
        ids = [c.cluster_id for c in clusters]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate cluster_id in dataset")
        if covariate_dim is None:
            covariate_dim = len(clusters[0].units[0].covariates)
        for c in clusters:
            for u in c.units:
                if len(u.covariates) != covariate_dim:
                    raise ValidationError(
                        f"cluster {c.cluster_id} unit {u.unit_index}: expected "
                        f"{covariate_dim} covariates, got {len(u.covariates)}"
                    )
        self._clusters: tuple[Cluster, ...] | None = clusters
        self._columns: DatasetColumns | None = None
        self._covariate_dim = int(covariate_dim)
        self._provenance = str(provenance)

    @classmethod
    def from_columns(cls, columns: DatasetColumns, provenance: str = "") -> "Dataset":
        if len(set(columns.cluster_id.tolist())) != columns.n_clusters:
            raise ValidationError("duplicate cluster_id in dataset")
        ds = cls.__new__(cls)
        ds._clusters = None
        ds._columns = columns
        ds._covariate_dim = columns.covariate_dim
        ds._provenance = str(provenance)
        return ds

    @property
    def covariate_dim(self) -> int:
        return self._covariate_dim

    @property
    def provenance(self) -> str:
        return self._provenance

    @property
    def columns(self) -> DatasetColumns:
        if self._columns is None:
            self._columns = _columns_from_clusters(self._clusters, self._covariate_dim)
        return self._columns

    @property
    def clusters(self) -> tuple[Cluster, ...]:
        if self._clusters is None:
            cols = self._columns
            out = []
            row = 0
            for pos in range(cols.n_clusters):
                m = int(cols.cluster_size[pos])
                units = tuple(
                    UnitRecord(
                        unit_index=int(cols.unit_index[r]),
                        covariates=tuple(cols.covariates[r].tolist()),
                        treatment=int(cols.treatment[r]),
                        propensity_treated=float(cols.propensity_treated[r]),
                        converted=float(cols.converted[r]),
                        revenue=float(cols.revenue[r]),
                        cost=float(cols.cost[r]),
                        price=float(cols.price[r]),
                    )
                    for r in range(row, row + m)
                )
                out.append(
                    Cluster(
                        cluster_id=int(cols.cluster_id[pos]),
                        units=units,
                        mean_conversion=float(cols.mean_conversion[pos]),
                        mean_revenue=float(cols.mean_revenue[pos]),
                        mean_cost=float(cols.mean_cost[pos]),
                    )
                )
                row += m
            self._clusters = tuple(out)
        return self._clusters

    @property
    def n_clusters(self) -> int:
        if self._columns is not None:
            return self._columns.n_clusters
        return len(self._clusters)

    @property
    def n_units(self) -> int:
        if self._columns is not None:
            return self._columns.n_units
        return sum(c.size for c in self._clusters)

    def subset(self, positions: Sequence[int]) -> "Dataset":
        """New dataset keeping the clusters at the given ordinal positions."""
        positions = np.asarray(positions, dtype=np.int64)
        if positions.size == 0:
            raise ValidationError("dataset has no clusters")
        cols = self.columns
        if positions.min() < 0 or positions.max() >= cols.n_clusters:
            raise ValidationError("subset positions must be unique and in range")
        keep = np.zeros(cols.n_clusters, dtype=bool)
        keep[positions] = True
        if not np.array_equal(np.flatnonzero(keep), np.sort(positions)):
            raise ValidationError("subset positions must be unique and in range")
        new_ord = np.cumsum(keep) - 1           # old ordinal -> new ordinal
        unit_keep = keep[cols.cluster_ord]
        sub = build_columns(
            covariates=cols.covariates[unit_keep],
            treatment=cols.treatment[unit_keep],
            propensity_treated=cols.propensity_treated[unit_keep],
            converted=cols.converted[unit_keep],
            revenue=cols.revenue[unit_keep],
            cost=cols.cost[unit_keep],
            price=cols.price[unit_keep],
            unit_index=cols.unit_index[unit_keep],
            cluster_ord=new_ord[cols.cluster_ord[unit_keep]],
            cluster_id=cols.cluster_id[keep],
        )
        return Dataset.from_columns(sub, provenance=self._provenance)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        if self._covariate_dim != other._covariate_dim:
            return False
        if self._provenance != other._provenance:
            return False
        a, b = self.columns, other.columns
        return all(
            np.array_equal(getattr(a, f), getattr(b, f))
            for f in (
                "covariates", "treatment", "propensity_treated", "converted",
                "revenue", "cost", "price", "unit_index", "cluster_ord",
                "cluster_id",
            )
        )

    def __repr__(self) -> str:
        return (
            f"Dataset(n_clusters={self.n_clusters}, n_units={self.n_units}, "
            f"covariate_dim={self._covariate_dim})"
        )


def cluster_target_value(cluster: Cluster, spec: TargetSpec) -> float | None:
    """Cluster-level value of the requested economic target.

    Returns ``None`` when the target is undefined for this cluster
    (IPC_PROFIT on a cluster without any conversion); estimators treat
    such clusters as contributing zero while still counting them.
    """
    if spec.level is not Level.CLUSTER_AWARE:
        raise ValidationError("cluster_target_value requires a cluster-aware spec")
    if spec.target is Target.CONVERSION:
        return cluster.mean_conversion
    if spec.target is Target.NAIVE_PROFIT:
        return cluster.mean_revenue - cluster.mean_cost
    if spec.target is Target.CRVTW_REVENUE:
        return cluster.mean_revenue
    # IPC_PROFIT: revenue minus the discount cost that would have been
    # paid had every converted unit been treated.
    total_conv = sum(u.converted for u in cluster.units)
    if total_conv == 0.0:
        return None
    counterfactual_cost = sum(
        spec.discount_rate * u.price * u.converted for u in cluster.units
    ) / cluster.size
    return cluster.mean_revenue - counterfactual_cost


def cluster_target_values(
    cols: DatasetColumns, spec: TargetSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized per-cluster target values.

    Returns ``(values, present)`` where ``values`` is (n,) float64 with
    zeros at absent clusters and ``present`` is (n,) bool.
    """
    n = cols.n_clusters
    if spec.target is Target.CONVERSION:
        return cols.mean_conversion.copy(), np.ones(n, dtype=bool)
    if spec.target is Target.NAIVE_PROFIT:
        return cols.mean_revenue - cols.mean_cost, np.ones(n, dtype=bool)
    if spec.target is Target.CRVTW_REVENUE:
        return cols.mean_revenue.copy(), np.ones(n, dtype=bool)
    conv_sum = cols.cluster_sum(cols.converted)
    present = conv_sum != 0.0
    counterfactual = (
        spec.discount_rate
        * cols.cluster_sum(cols.price * cols.converted)
        / cols.cluster_size.astype(np.float64)
    )
    values = np.where(present, cols.mean_revenue - counterfactual, 0.0)
    return values, present


# ---------------------------------------------------------------------------
# JSON-lines persistence
# ---------------------------------------------------------------------------

_UNIT_KEYS = ("j", "x", "a", "e1", "y", "rev", "cost", "price")


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset as JSON lines (header line, then one cluster per line).

    Only observational datasets with strictly binary conversions are
    persistable; continuous pseudo-outcomes from the additive validation
    generator are an in-memory construct and are rejected here.
    """
    cols = dataset.columns
    bad = np.flatnonzero((cols.converted != 0.0) & (cols.converted != 1.0))
    if bad.size:
        r = int(bad[0])
        raise ValidationError(
            f"cluster {int(cols.cluster_id[cols.cluster_ord[r]])} unit "
            f"{int(cols.unit_index[r])}: converted must be 0 or 1 to save, "
            f"got {float(cols.converted[r])!r}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(
            {"covariate_dim": dataset.covariate_dim, "provenance": dataset.provenance}
        ))
        fh.write("\n")
        row = 0
        for pos in range(cols.n_clusters):
            m = int(cols.cluster_size[pos])
            units = []
            for r in range(row, row + m):
                units.append({
                    "j": int(cols.unit_index[r]),
                    "x": cols.covariates[r].tolist(),
                    "a": int(cols.treatment[r]),
                    "e1": float(cols.propensity_treated[r]),
                    "y": int(cols.converted[r]),
                    "rev": float(cols.revenue[r]),
                    "cost": float(cols.cost[r]),
                    "price": float(cols.price[r]),
                })
            row += m
            fh.write(json.dumps(
                {"cluster_id": int(cols.cluster_id[pos]), "units": units}
            ))
            fh.write("\n")


def _require_key(obj: dict, key: str, lineno: int, ctx: str):
    if key not in obj:
        raise ValidationError(f"line {lineno}: {ctx} is missing key {key!r}")
    return obj[key]


def load_dataset(path) -> Dataset:
    """Load a JSON-lines dataset, validating every structural invariant.

    Raises :class:`ValidationError` with the offending line number and,
    where possible, the cluster/unit identity.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not any(line.strip() for line in lines):
        raise ValidationError("dataset has no clusters")
    if not lines[0].strip():
        raise ValidationError("line 1: missing header")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise ValidationError(f"line 1: malformed JSON header: {e}") from None
    if not isinstance(header, dict) or "covariate_dim" not in header:
        raise ValidationError("line 1: header must carry covariate_dim and provenance")
    d = header["covariate_dim"]
    if not isinstance(d, int) or d < 1:
        raise ValidationError(f"line 1: covariate_dim must be a positive int, got {d!r}")
    provenance = str(header.get("provenance", ""))

    xs, a_, e1_, y_, rev_, cost_, price_, jidx_, ord_, cids = (
        [], [], [], [], [], [], [], [], [], []
    )
    pos = 0
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValidationError(f"line {lineno}: malformed JSON: {e}") from None
        if not isinstance(rec, dict):
            raise ValidationError(f"line {lineno}: cluster record must be an object")
        cid = _require_key(rec, "cluster_id", lineno, "cluster record")
        units = _require_key(rec, "units", lineno, "cluster record")
        if not isinstance(units, list) or not units:
            raise ValidationError(f"line {lineno}: cluster {cid}: has no units")
        seen_j = set()
        for u in units:
            if not isinstance(u, dict):
                raise ValidationError(f"line {lineno}: cluster {cid}: unit must be an object")
            extra = set(u) - set(_UNIT_KEYS)
            if extra:
                raise ValidationError(
                    f"line {lineno}: cluster {cid}: unknown unit key(s) {sorted(extra)}"
                )
            vals = {k: _require_key(u, k, lineno, f"cluster {cid} unit") for k in _UNIT_KEYS}
            j = vals["j"]
            if j in seen_j:
                raise ValidationError(
                    f"line {lineno}: cluster {cid}: duplicate unit_index {j}"
                )
            seen_j.add(j)
            x = vals["x"]
            if not isinstance(x, list) or len(x) != d:
                raise ValidationError(
                    f"line {lineno}: cluster {cid} unit {j}: expected {d} covariates"
                )
            xs.append(x)
            a_.append(vals["a"])
            e1_.append(vals["e1"])
            y_.append(vals["y"])
            rev_.append(vals["rev"])
            cost_.append(vals["cost"])
            price_.append(vals["price"])
            jidx_.append(j)
            ord_.append(pos)
        cids.append(cid)
        pos += 1
    if pos == 0:
        raise ValidationError("dataset has no clusters")
    if len(set(cids)) != len(cids):
        raise ValidationError("duplicate cluster_id in dataset")

    try:
        cols = build_columns(
            covariates=np.asarray(xs, dtype=np.float64),
            treatment=np.asarray(a_),
            propensity_treated=np.asarray(e1_, dtype=np.float64),
            converted=np.asarray(y_, dtype=np.float64),
            revenue=np.asarray(rev_, dtype=np.float64),
            cost=np.asarray(cost_, dtype=np.float64),
            price=np.asarray(price_, dtype=np.float64),
            unit_index=np.asarray(jidx_),
            cluster_ord=np.asarray(ord_),
            cluster_id=np.asarray(cids),
        )
    except (TypeError, ValueError) as e:
        raise ValidationError(f"could not assemble dataset arrays: {e}") from None
    _validate_columns(cols, strict_binary=True)
    return Dataset.from_columns(cols, provenance=provenance)


def _offender(cols: DatasetColumns, mask: np.ndarray) -> str:
    r = int(np.flatnonzero(mask)[0])
    return (
        f"cluster {int(cols.cluster_id[cols.cluster_ord[r]])} "
        f"unit {int(cols.unit_index[r])}"
    )


def _validate_columns(cols: DatasetColumns, strict_binary: bool) -> None:
    a, e1, y = cols.treatment, cols.propensity_treated, cols.converted
    rev, cost, price = cols.revenue, cols.cost, cols.price
    for name, arr in (
        ("covariates", cols.covariates), ("e1", e1), ("y", y),
        ("rev", rev), ("cost", cost), ("price", price),
    ):
        bad = ~np.isfinite(arr)
        if bad.any():
            where = bad.any(axis=1) if arr.ndim == 2 else bad
            raise ValidationError(f"{_offender(cols, where)}: non-finite {name}")
    bad = (a != 0) & (a != 1)
    if bad.any():
        raise ValidationError(f"{_offender(cols, bad)}: treatment must be 0 or 1")
    bad = (e1 <= 0.0) | (e1 >= 1.0)
    if bad.any():
        raise ValidationError(
            f"{_offender(cols, bad)}: propensity must lie strictly inside (0, 1)"
        )
    if strict_binary:
        bad = (y != 0.0) & (y != 1.0)
        if bad.any():
            raise ValidationError(f"{_offender(cols, bad)}: converted must be 0 or 1")
    bad = (rev < 0.0) | (cost < 0.0)
    if bad.any():
        raise ValidationError(f"{_offender(cols, bad)}: negative revenue or cost")
    bad = price <= 0.0
    if bad.any():
        raise ValidationError(f"{_offender(cols, bad)}: price must be positive")
    bad = rev > price * (1.0 + 1e-12)
    if bad.any():
        raise ValidationError(f"{_offender(cols, bad)}: revenue exceeds price")
    bad = (y == 0.0) & ((rev != 0.0) | (cost != 0.0))
    if bad.any():
        raise ValidationError(
            f"{_offender(cols, bad)}: unconverted unit carries revenue or cost"
        )
    bad = (cost > 0.0) & ((a != 1) | (y != 1.0))
    if bad.any():
        raise ValidationError(
            f"{_offender(cols, bad)}: cost requires treatment == 1 and converted == 1"
        )


def validate_dataset(dataset: Dataset, strict_binary: bool = True) -> None:
    """Re-check every structural invariant of an in-memory dataset."""
    _validate_columns(dataset.columns, strict_binary=strict_binary)
    # stored cluster means must match recomputed means
    cols = dataset.columns
    sizes = cols.cluster_size.astype(np.float64)
    for name, per_unit in (
        ("mean_conversion", cols.converted),
        ("mean_revenue", cols.revenue),
        ("mean_cost", cols.cost),
    ):
        stored = getattr(cols, name)
        recomputed = cols.cluster_sum(per_unit) / sizes
        err = np.abs(stored - recomputed)
        if err.size and err.max() > 1e-12:
            pos = int(np.argmax(err))
            raise ValidationError(
                f"cluster {int(cols.cluster_id[pos])}: stored {name} deviates "
                f"from recomputed value by {err.max():.3e}"
            )
