"""Qini curves, AUC summaries and multi-seed replication sweeps.

A Qini curve plots the estimated *incremental* cluster value of
treating the top-``phi`` fraction of units (ranked by score) against
``phi``.  Points are estimated either with the off-policy estimator on
held-out logged data (AddIPW kind) or with the simulator's closed-form
oracle on fresh covariates (Oracle kind).

``run_replications`` is the experiment harness: for every (method,
cluster size, seed) it simulates a dataset, splits clusters 50/50 into
train/eval, trains the method's scorer, and evaluates Qini curves for
both the conversion and the profit metric.  Datasets, splits and random
baselines depend only on (cluster size, seed) -- never on the method --
so per-seed comparisons between methods are paired.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import learner
from ._util import fmt
from .domain import (
    AlignmentError,
    Dataset,
    Level,
    Target,
    TargetSpec,
    ValidationError,
)
from .estimator import addipw_value, as_scores
from .learner import PolicyParams, TrainConfig
from .simulator import OracleTarget, SimConfig, simulate, true_mean_outcome

__all__ = [
    "DEFAULT_PHI_GRID",
    "EstimatorKind",
    "METHOD_REGISTRY",
    "Metric",
    "QiniCurve",
    "ReplicationResult",
    "ReplicationSummary",
    "auc",
    "policy_at_fraction",
    "qini_curve",
    "read_results_csv",
    "run_replications",
    "summarize",
    "write_results_csv",
    "write_summary_csv",
]

DEFAULT_PHI_GRID: tuple[float, ...] = tuple(k / 20 for k in range(21))

# seed-sequence namespaces under the sweep's base seed
_KEY_DATA = 11    # per-replication dataset seed
_KEY_SPLIT = 12   # train/eval cluster split
_KEY_RANDOM = 13  # random-policy scores


class Metric(str, Enum):
    CONVERSION = "conversion"
    PROFIT = "profit"


class EstimatorKind(str, Enum):
    ADDIPW = "addipw"
    ORACLE = "oracle"


# What each named method optimizes during training.  ``None`` marks the
# untrained random baseline.  addipw-* methods credit whole-cluster
# value to each unit; vanilla-* methods use only the unit's own outcome.
METHOD_REGISTRY: Mapping[str, TargetSpec | None] = {
    "addipw-conversion": TargetSpec(Target.CONVERSION, Level.CLUSTER_AWARE),
    "addipw-naive-profit": TargetSpec(Target.NAIVE_PROFIT, Level.CLUSTER_AWARE),
    "addipw-crvtw": TargetSpec(Target.CRVTW_REVENUE, Level.CLUSTER_AWARE),
    "addipw-ipc": TargetSpec(Target.IPC_PROFIT, Level.CLUSTER_AWARE),
    "vanilla-conversion": TargetSpec(Target.CONVERSION, Level.UNIT_NAIVE),
    "vanilla-crvtw": TargetSpec(Target.CRVTW_REVENUE, Level.UNIT_NAIVE),
    "vanilla-ipc": TargetSpec(Target.IPC_PROFIT, Level.UNIT_NAIVE),
    "random": None,
}

_EVAL_SPECS = {
    Metric.CONVERSION: TargetSpec(Target.CONVERSION, Level.CLUSTER_AWARE),
    Metric.PROFIT: TargetSpec(Target.NAIVE_PROFIT, Level.CLUSTER_AWARE),
}


@dataclass(frozen=True)
class QiniCurve:
    """Incremental value at each treated fraction."""

    phi_grid: tuple[float, ...]
    incremental_values: tuple[float, ...]
    metric: Metric
    estimator_kind: EstimatorKind

    def __post_init__(self) -> None:
        grid = self.phi_grid
        if len(grid) < 2 or grid[0] != 0.0 or grid[-1] != 1.0:
            raise ValidationError("phi grid must start at 0.0 and end at 1.0")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValidationError("phi grid must be strictly increasing")
        if len(self.incremental_values) != len(grid):
            raise ValidationError("curve values must align with the phi grid")
        if self.incremental_values[0] != 0.0:
            raise ValidationError("incremental value at phi=0 must be exactly 0")


@dataclass(frozen=True)
class ReplicationResult:
    """Curves for one (method, cluster_size, seed) replication."""

    method: str
    cluster_size: int
    seed: int
    curves: Mapping[Metric, QiniCurve]
    weight_norm: float | None = None


@dataclass(frozen=True)
class ReplicationSummary:
    """Across-seed aggregate for one (method, cluster_size, metric)."""

    method: str
    cluster_size: int
    metric: Metric
    phi_grid: tuple[float, ...]
    mean_values: tuple[float, ...]
    std_values: tuple[float, ...]
    auc_mean: float
    auc_std: float
    auc70_mean: float
    auc70_std: float
    n_seeds: int


def _check_phi(phi: float) -> float:
    if not (0.0 <= phi <= 1.0) or not math.isfinite(phi):
        raise ValidationError(f"phi must lie in [0, 1], got {phi!r}")
    return float(phi)


def policy_at_fraction(scores, phi: float) -> np.ndarray:
    """Hard policy treating the ceil(phi*N) highest-scored units.

    ``scores`` must be in dataset unit order (clusters in stored order,
    units in stored order), so positional tie-breaking realizes the
    ascending (cluster_id, unit_index) rule.
    """
    phi = _check_phi(phi)
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    # small epsilon guards against 0.15 * 20 == 3.0000000000000004
    k = math.ceil(phi * n - 1e-9)
    out = np.zeros(n, dtype=np.int64)
    if k > 0:
        order = np.argsort(-scores, kind="stable")
        out[order[:k]] = 1
    return out


def _threshold_at_fraction(scores: np.ndarray, phi: float) -> float:
    """Score of the ceil(phi*N)-th highest unit; +inf at phi=0."""
    n = scores.shape[0]
    k = math.ceil(_check_phi(phi) * n - 1e-9)
    if k == 0:
        return math.inf
    return float(np.sort(scores)[n - k])


def qini_curve(
    eval_data: Dataset,
    scores,
    metric: Metric,
    estimator_kind: EstimatorKind = EstimatorKind.ADDIPW,
    sim_config: SimConfig | None = None,
    model: PolicyParams | None = None,
    *,
    phi_grid: Sequence[float] = DEFAULT_PHI_GRID,
    oracle_n_mc: int = 10_000,
    discount_rate: float | None = None,
) -> QiniCurve:
    """Incremental-value curve over the treated-fraction grid.

    AddIPW kind estimates each point off-policy on ``eval_data``.
    Oracle kind converts each fraction to a score threshold, applies the
    thresholded model to fresh simulated covariates, and differences the
    closed-form outcome means; it requires ``sim_config`` and ``model``.
    ``discount_rate`` is accepted for symmetry with training specs but
    the evaluation targets (conversion, naive profit) do not use it.
    """
    metric = Metric(metric)
    estimator_kind = EstimatorKind(estimator_kind)
    cols = eval_data.columns
    f = as_scores(scores, cols.n_units)
    grid = tuple(float(p) for p in phi_grid)

    if estimator_kind is EstimatorKind.ADDIPW:
        spec = _EVAL_SPECS[metric]
        baseline = addipw_value(eval_data, np.zeros(cols.n_units, dtype=np.int64), spec)
        values = []
        for phi in grid:
            if phi == 0.0:
                values.append(0.0)
                continue
            pi = policy_at_fraction(f, phi)
            values.append(addipw_value(eval_data, pi, spec) - baseline)
        return QiniCurve(grid, tuple(values), metric, estimator_kind)

    if sim_config is None or model is None:
        raise ValidationError("oracle curves require sim_config and model")
    target = (
        OracleTarget.CONVERSION if metric is Metric.CONVERSION else OracleTarget.PROFIT
    )
    never = _threshold_policy(model, math.inf)
    base, _ = true_mean_outcome(sim_config, never, target, n_mc=oracle_n_mc)
    values = []
    for phi in grid:
        if phi == 0.0:
            values.append(0.0)
            continue
        t = _threshold_at_fraction(f, phi)
        val, _ = true_mean_outcome(
            sim_config, _threshold_policy(model, t), target, n_mc=oracle_n_mc
        )
        values.append(val - base)
    return QiniCurve(grid, tuple(values), metric, estimator_kind)


def _threshold_policy(model: PolicyParams, threshold: float):
    def policy(x: np.ndarray) -> np.ndarray:
        return (np.asarray(learner.score(model, x)) >= threshold).astype(np.int64)

    return policy


def auc(curve: QiniCurve, upper: float = 1.0) -> float:
    """Trapezoid area under the curve over grid points with phi <= upper."""
    if not (0.0 < upper <= 1.0):
        raise ValidationError(f"upper must lie in (0, 1], got {upper!r}")
    grid = curve.phi_grid
    stop = None
    for i, p in enumerate(grid):
        if abs(p - upper) <= 1e-12:
            stop = i
            break
    if stop is None:
        raise ValidationError(f"upper={upper!r} is not a grid point")
    vals = curve.incremental_values
    area = 0.0
    for i in range(1, stop + 1):
        area += 0.5 * (vals[i - 1] + vals[i]) * (grid[i] - grid[i - 1])
    return area


# ---------------------------------------------------------------------------
# replication harness
# ---------------------------------------------------------------------------


def _replication_seed(base_seed: int, seed_index: int) -> int:
    """Dataset seed for one replication; method- and size-independent."""
    ss = np.random.SeedSequence(base_seed, spawn_key=(_KEY_DATA, seed_index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _split_positions(
    base_seed: int, seed_index: int, n_clusters: int
) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(
        np.random.SeedSequence(base_seed, spawn_key=(_KEY_SPLIT, seed_index))
    )
    perm = rng.permutation(n_clusters)
    half = n_clusters // 2
    return np.sort(perm[:half]), np.sort(perm[half:])


def _random_scores(
    base_seed: int, seed_index: int, cluster_size: int, n_units: int
) -> np.ndarray:
    rng = np.random.default_rng(
        np.random.SeedSequence(base_seed, spawn_key=(_KEY_RANDOM, seed_index, cluster_size))
    )
    return rng.random(n_units)


def _resolve_method(name: str, discount_rate: float) -> TargetSpec | None:
    if name not in METHOD_REGISTRY:
        raise ValidationError(
            f"unknown method {name!r}; valid methods: {', '.join(sorted(METHOD_REGISTRY))}"
        )
    spec = METHOD_REGISTRY[name]
    if spec is None:
        return None
    return replace(spec, discount_rate=discount_rate)


def _annotate(e: Exception, method: str, size: int, seed: int) -> Exception:
    msg = f"method={method} cluster_size={size} seed={seed}: {e}"
    try:
        return type(e)(msg)
    except TypeError:
        return RuntimeError(msg)


def _run_replication_task(args) -> list[ReplicationResult]:
    (base, size, seed_idx, methods, train_config, grid) = args
    data_seed = _replication_seed(base.seed, seed_idx)
    cfg = replace(base, n_items=size, seed=data_seed)
    ds = simulate(cfg)
    train_pos, eval_pos = _split_positions(base.seed, seed_idx, ds.n_clusters)
    train_ds = ds.subset(train_pos)
    eval_ds = ds.subset(eval_pos)
    eval_cols = eval_ds.columns

    out = []
    for method in methods:
        try:
            spec = _resolve_method(method, base.discount_rate)
            if spec is None:
                scores = _random_scores(base.seed, seed_idx, size, eval_cols.n_units)
                norm = None
            else:
                params = learner.train(train_ds, spec, train_config)
                scores = np.asarray(learner.score(params, eval_cols.covariates))
                norm = float(np.linalg.norm(params.weights))
            curves = {
                metric: qini_curve(eval_ds, scores, metric, EstimatorKind.ADDIPW,
                                   phi_grid=grid)
                for metric in Metric
            }
        except Exception as e:  # annotate with replication coordinates
            raise _annotate(e, method, size, seed_idx) from e
        out.append(ReplicationResult(method, size, seed_idx, curves, norm))
    return out


def run_replications(
    sim_config: SimConfig,
    methods: Sequence[str],
    cluster_sizes: Sequence[int],
    n_seeds: int,
    *,
    train_config: TrainConfig = TrainConfig(),
    phi_grid: Sequence[float] = DEFAULT_PHI_GRID,
    jobs: int = 1,
    skip: Iterable[tuple[str, int, int]] = (),
) -> list[ReplicationResult]:
    """Run the (method x cluster_size x seed) sweep.

    ``sim_config`` supplies everything but ``n_items`` (swept) and
    ``seed`` (the base seed from which per-replication seeds derive).
    Duplicate method names are collapsed.  ``skip`` lists (method,
    cluster_size, seed) triples already computed elsewhere, e.g. when
    resuming; a dataset is still simulated if any method needs it.
    Results are deterministic and identical for any ``jobs`` value.
    """
    if n_seeds < 2:
        raise ValidationError("n_seeds must be at least 2 (std undefined otherwise)")
    methods = list(dict.fromkeys(methods))
    for m in methods:
        _resolve_method(m, sim_config.discount_rate)
    sizes = list(cluster_sizes)
    if not sizes or any((not isinstance(s, int)) or s < 1 for s in sizes):
        raise ValidationError("cluster_sizes must be positive integers")
    skip = frozenset(skip)
    grid = tuple(float(p) for p in phi_grid)

    tasks = []
    for size in sizes:
        for seed_idx in range(n_seeds):
            todo = tuple(m for m in methods if (m, size, seed_idx) not in skip)
            if todo:
                tasks.append((sim_config, size, seed_idx, todo, train_config, grid))

    if jobs <= 1 or len(tasks) <= 1:
        chunks = [_run_replication_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_replication_task, tasks))
    results = [r for chunk in chunks for r in chunk]
    results.sort(key=lambda r: (r.method, r.cluster_size, r.seed))
    return results


def summarize(results: Sequence[ReplicationResult]) -> list[ReplicationSummary]:
    """Aggregate replication curves per (method, cluster_size, metric).

    Uses population std (divisor = number of seeds).  Requires at least
    two seeds per group.
    """
    groups: dict[tuple[str, int, Metric], list[tuple[int, QiniCurve]]] = {}
    for r in results:
        for metric, curve in r.curves.items():
            groups.setdefault((r.method, r.cluster_size, metric), []).append(
                (r.seed, curve)
            )
    out = []
    for (method, size, metric), entries in sorted(
        groups.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2].value)
    ):
        entries.sort(key=lambda sc: sc[0])
        seeds = [s for s, _ in entries]
        if len(set(seeds)) != len(seeds):
            raise ValidationError(
                f"duplicate seed in group method={method} cluster_size={size}"
            )
        if len(seeds) < 2:
            raise ValidationError(
                "replication std needs at least 2 seeds, got "
                f"{len(seeds)} for method={method} cluster_size={size}"
            )
        curves = [c for _, c in entries]
        grid = curves[0].phi_grid
        if any(c.phi_grid != grid for c in curves):
            raise ValidationError("curves in one group must share the phi grid")
        values = np.array([c.incremental_values for c in curves])
        aucs = np.array([auc(c) for c in curves])
        auc70s = np.array([auc(c, 0.7) for c in curves])
        out.append(
            ReplicationSummary(
                method=method,
                cluster_size=size,
                metric=metric,
                phi_grid=grid,
                mean_values=tuple(values.mean(axis=0).tolist()),
                std_values=tuple(values.std(axis=0).tolist()),
                auc_mean=float(aucs.mean()),
                auc_std=float(aucs.std()),
                auc70_mean=float(auc70s.mean()),
                auc70_std=float(auc70s.std()),
                n_seeds=len(seeds),
            )
        )
    return out


# ---------------------------------------------------------------------------
# CSV formats
# ---------------------------------------------------------------------------

_RESULT_COLS = (
    "method", "cluster_size", "seed", "phi", "metric", "estimator_kind",
    "incremental_value",
)
_SUMMARY_COLS = (
    "method", "cluster_size", "metric", "auc_mean", "auc_std",
    "auc70_mean", "auc70_std", "n_seeds",
)


def write_results_csv(results: Sequence[ReplicationResult], path) -> None:
    """One row per curve point, sorted for byte-stable output."""
    rows = []
    for r in results:
        for metric in sorted(r.curves, key=lambda m: m.value):
            curve = r.curves[metric]
            for phi, val in zip(curve.phi_grid, curve.incremental_values):
                rows.append((
                    r.method, r.cluster_size, r.seed, phi, metric.value,
                    curve.estimator_kind.value, val,
                ))
    rows.sort(key=lambda t: (t[0], t[1], t[2], t[4], t[3]))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(_RESULT_COLS) + "\n")
        for method, size, seed, phi, metric, kind, val in rows:
            fh.write(
                f"{method},{size},{seed},{fmt(phi)},{metric},{kind},{fmt(val)}\n"
            )


def read_results_csv(path) -> list[ReplicationResult]:
    """Rebuild replication results from a results CSV."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != _RESULT_COLS:
            raise ValidationError(f"unexpected results CSV header in {path}")
        acc: dict[tuple[str, int, int], dict[Metric, list]] = {}
        kinds: dict[tuple[str, int, int, Metric], str] = {}
        try:
            for row in reader:
                key = (row["method"], int(row["cluster_size"]), int(row["seed"]))
                metric = Metric(row["metric"])
                acc.setdefault(key, {}).setdefault(metric, []).append(
                    (float(row["phi"]), float(row["incremental_value"]))
                )
                kinds[key + (metric,)] = row["estimator_kind"]
        except (KeyError, ValueError) as e:
            raise ValidationError(f"malformed results CSV row in {path}: {e}") from None
    out = []
    for key in sorted(acc):
        method, size, seed = key
        curves = {}
        for metric, pts in acc[key].items():
            pts.sort(key=lambda pv: pv[0])
            curves[metric] = QiniCurve(
                phi_grid=tuple(p for p, _ in pts),
                incremental_values=tuple(v for _, v in pts),
                metric=metric,
                estimator_kind=EstimatorKind(kinds[key + (metric,)]),
            )
        out.append(ReplicationResult(method, size, seed, curves))
    return out


def write_summary_csv(summaries: Sequence[ReplicationSummary], path) -> None:
    rows = sorted(summaries, key=lambda s: (s.method, s.cluster_size, s.metric.value))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(_SUMMARY_COLS) + "\n")
        for s in rows:
            fh.write(
                f"{s.method},{s.cluster_size},{s.metric.value},{fmt(s.auc_mean)},"
                f"{fmt(s.auc_std)},{fmt(s.auc70_mean)},{fmt(s.auc70_std)},{s.n_seeds}\n"
            )
