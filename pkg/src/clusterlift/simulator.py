"""Synthetic marketplace generator with intra-cluster interference.

Each cluster is a slate of items shown to one user.  Item utilities
feed a softmax choice model; total slate intensity feeds an
exponential-decay purchase model, so one item's added appeal both
grows the pie (more purchases) and steals share from its siblings
(cannibalization).  At most one unit converts per cluster.

Randomness is split into one deterministically derived stream per
cluster, so generating any subset of clusters -- in any order, on any
worker -- yields bit-identical records.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Literal

import numpy as np

from . import domain
from ._util import sigmoid

__all__ = [
    "AdditiveTruth",
    "Coefficients",
    "OracleTarget",
    "SimConfig",
    "choice_intensities",
    "config_fingerprint",
    "resolve_coefficients",
    "simulate",
    "simulate_additive",
    "true_mean_outcome",
]

# spawn-key namespaces under the config seed
_KEY_COEFS = 0      # coefficient vector derivation
_KEY_CLUSTER = 1    # observational clusters
_KEY_ORACLE = 2     # fresh clusters for Monte-Carlo oracle values
_KEY_ADDITIVE = 3   # additive validation clusters

# Policies are vectorized callables: (m, d) covariate rows -> (m,) 0/1.
PolicyFn = Callable[[np.ndarray], np.ndarray]


class OracleTarget(str, Enum):
    CONVERSION = "conversion"
    REVENUE = "revenue"
    COST = "cost"
    PROFIT = "profit"


@dataclass(frozen=True)
class SimConfig:
    """Generator parameters.

    Coefficient vectors left as ``None`` are drawn once per seed as
    unit-norm gaussian directions, giving reproducibility per seed and
    variety across seeds.  ``saturation`` is calibrated so that a slate
    of 10 items with zero utilities converts 30-50% of the time.
    """

    n_clusters: int
    n_items: int
    covariate_dim: int = 6
    temperature: float = 5.0
    saturation: float = 0.05
    discount_rate: float = 0.08
    price_min: float = 10.0
    price_max: float = 100.0
    base_intercept: float = 0.0
    effect_intercept: float = 1.0
    base_utility_coefs: tuple[float, ...] | None = None
    effect_coefs: tuple[float, ...] | None = None
    price_coefs: tuple[float, ...] | None = None
    propensity_mode: Literal["rct", "covariate"] = "rct"
    rct_propensity: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        def bad(name: str, why: str):
            return domain.ValidationError(f"sim config: {name} {why}")

        for name in ("n_clusters", "n_items", "covariate_dim"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise bad(name, f"must be a positive integer, got {v!r}")
        for name in ("temperature", "saturation"):
            v = getattr(self, name)
            if not (v > 0) or not np.isfinite(v):
                raise bad(name, f"must be positive, got {v!r}")
        if not (0.0 < self.discount_rate < 1.0):
            raise bad("discount_rate", f"must lie in (0, 1), got {self.discount_rate!r}")
        if not (0.0 < self.price_min <= self.price_max):
            raise bad("price_min/price_max",
                      f"need 0 < price_min <= price_max, got "
                      f"({self.price_min!r}, {self.price_max!r})")
        for name in ("base_intercept", "effect_intercept"):
            if not np.isfinite(getattr(self, name)):
                raise bad(name, "must be finite")
        for name in ("base_utility_coefs", "effect_coefs", "price_coefs"):
            v = getattr(self, name)
            if v is None:
                continue
            if len(v) != self.covariate_dim or not all(np.isfinite(c) for c in v):
                raise bad(name, f"must be {self.covariate_dim} finite numbers")
        if self.propensity_mode not in ("rct", "covariate"):
            raise bad("propensity_mode", f"must be 'rct' or 'covariate', got "
                                         f"{self.propensity_mode!r}")
        if not (0.0 < self.rct_propensity < 1.0):
            raise bad("rct_propensity",
                      f"must lie strictly inside (0, 1), got {self.rct_propensity!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise bad("seed", f"must be a non-negative integer, got {self.seed!r}")


@dataclass(frozen=True)
class Coefficients:
    """Resolved covariate loadings (all unit-norm when seeded)."""

    base_utility: np.ndarray
    effect: np.ndarray
    price: np.ndarray
    propensity: np.ndarray


def _unit_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def resolve_coefficients(config: SimConfig) -> Coefficients:
    """Materialize coefficient vectors, drawing seeded defaults where unset.

    Draw order is fixed (base utility, effect, price, propensity) so a
    given seed always produces the same environment regardless of which
    vectors the caller overrides.
    """
    rng = np.random.default_rng(
        np.random.SeedSequence(config.seed, spawn_key=(_KEY_COEFS,))
    )
    d = config.covariate_dim
    drawn = [_unit_vector(rng, d) for _ in range(4)]
    pick = lambda given, fallback: (
        np.asarray(given, dtype=np.float64) if given is not None else fallback
    )
    return Coefficients(
        base_utility=pick(config.base_utility_coefs, drawn[0]),
        effect=pick(config.effect_coefs, drawn[1]),
        price=pick(config.price_coefs, drawn[2]),
        propensity=drawn[3],
    )


def config_fingerprint(config: SimConfig) -> str:
    """Compact deterministic description of a config, for provenance."""
    parts = []
    for name in sorted(SimConfig.__dataclass_fields__):
        v = getattr(config, name)
        if isinstance(v, tuple):
            v = "(" + ",".join(repr(float(c)) for c in v) + ")"
        parts.append(f"{name}={v}")
    return "sim{" + ",".join(parts) + "}"


def _cluster_rng(seed: int, namespace: int, index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(namespace, index))
    )


def choice_intensities(
    config: SimConfig,
    coefs: Coefficients,
    covariates: np.ndarray,
    treatments: np.ndarray,
) -> tuple[np.ndarray, float]:
    """Softmax weights ``s`` and total intensity ``S`` for one cluster.

    Utility is linear in covariates with an additive treatment shift:
    ``u = x . beta_u + b0 + a * (effect_intercept + x . beta_effect)``;
    the softmax weight is ``exp(u / temperature)``.
    """
    x = np.asarray(covariates, dtype=np.float64)
    a = np.asarray(treatments, dtype=np.float64)
    u = x @ coefs.base_utility + config.base_intercept
    u = u + a * (config.effect_intercept + x @ coefs.effect)
    s = np.exp(np.minimum(u / config.temperature, 500.0))
    return s, float(s.sum())


def _propensities(config: SimConfig, coefs: Coefficients, x: np.ndarray) -> np.ndarray:
    if config.propensity_mode == "rct":
        return np.full(x.shape[0], config.rct_propensity)
    return np.clip(sigmoid(x @ coefs.propensity), 0.1, 0.9)


def _prices(config: SimConfig, coefs: Coefficients, x: np.ndarray) -> np.ndarray:
    span = config.price_max - config.price_min
    return config.price_min + span * sigmoid(x @ coefs.price)


def simulate(config: SimConfig) -> domain.Dataset:
    """Generate an observational dataset under a randomized logging policy.

    Per cluster: draw covariates, assign treatments by the configured
    propensities, then sample at most one conversion from the
    softmax/exponential-decay purchase model.  Converted units record
    ``revenue = price * (1 - discount * a)`` and
    ``cost = price * discount * a``.
    """
    coefs = resolve_coefficients(config)
    n, m, d = config.n_clusters, config.n_items, config.covariate_dim
    kappa, disc = config.saturation, config.discount_rate

    x_all = np.empty((n * m, d))
    a_all = np.empty(n * m, dtype=np.int64)
    e1_all = np.empty(n * m)
    y_all = np.zeros(n * m)
    rev_all = np.zeros(n * m)
    cost_all = np.zeros(n * m)
    price_all = np.empty(n * m)

    for i in range(n):
        rng = _cluster_rng(config.seed, _KEY_CLUSTER, i)
        x = rng.standard_normal((m, d))
        u_treat = rng.random(m)
        u_buy = rng.random()
        u_pick = rng.random()

        e1 = _propensities(config, coefs, x)
        a = (u_treat < e1).astype(np.int64)
        price = _prices(config, coefs, x)
        s, total = choice_intensities(config, coefs, x, a)

        lo = i * m
        x_all[lo:lo + m] = x
        a_all[lo:lo + m] = a
        e1_all[lo:lo + m] = e1
        price_all[lo:lo + m] = price

        p_buy = -np.expm1(-kappa * total)
        if u_buy < p_buy:
            cdf = np.cumsum(s)
            j = int(np.searchsorted(cdf, u_pick * total, side="right"))
            j = min(j, m - 1)
            y_all[lo + j] = 1.0
            rev_all[lo + j] = price[j] * (1.0 - disc * a[j])
            cost_all[lo + j] = price[j] * disc * a[j]

    cols = domain.build_columns(
        covariates=x_all,
        treatment=a_all,
        propensity_treated=e1_all,
        converted=y_all,
        revenue=rev_all,
        cost=cost_all,
        price=price_all,
        unit_index=np.tile(np.arange(m, dtype=np.int64), n),
        cluster_ord=np.repeat(np.arange(n, dtype=np.int64), m),
        cluster_id=np.arange(n, dtype=np.int64),
    )
    return domain.Dataset.from_columns(cols, provenance=config_fingerprint(config))


def _oracle_covariates(config: SimConfig, n_mc: int) -> np.ndarray:
    m, d = config.n_items, config.covariate_dim
    x = np.empty((n_mc, m, d))
    for k in range(n_mc):
        rng = _cluster_rng(config.seed, _KEY_ORACLE, k)
        x[k] = rng.standard_normal((m, d))
    return x


def true_mean_outcome(
    config: SimConfig,
    policy: PolicyFn,
    target: OracleTarget = OracleTarget.CONVERSION,
    n_mc: int = 10_000,
) -> tuple[float, float]:
    """Monte-Carlo ground-truth cluster-mean outcome under a policy.

    Draws ``n_mc`` fresh clusters (deterministic given ``config.seed``,
    shared across calls, so values for different policies are paired),
    applies the deterministic policy to every unit, and averages the
    *closed-form* conditional expectation of the requested per-cluster
    mean -- no outcome sampling noise.

    Returns ``(mean, standard_error)``.
    """
    if not isinstance(target, OracleTarget):
        raise domain.ValidationError(f"unknown oracle target: {target!r}")
    if n_mc < 2:
        raise domain.ValidationError("n_mc must be at least 2")
    coefs = resolve_coefficients(config)
    m, d = config.n_items, config.covariate_dim
    x = _oracle_covariates(config, n_mc)
    flat = x.reshape(n_mc * m, d)
    a = np.asarray(policy(flat), dtype=np.float64).reshape(n_mc, m)
    if not np.isin(a, (0.0, 1.0)).all():
        raise domain.ValidationError("policy must return 0/1 decisions")

    u = flat @ coefs.base_utility + config.base_intercept
    u = u.reshape(n_mc, m) + a * (
        config.effect_intercept + (flat @ coefs.effect).reshape(n_mc, m)
    )
    s = np.exp(np.minimum(u / config.temperature, 500.0))
    total = s.sum(axis=1)
    p_buy = -np.expm1(-config.saturation * total)
    price = _prices(config, coefs, flat).reshape(n_mc, m)

    with np.errstate(invalid="ignore", divide="ignore"):
        share = np.where(total[:, None] > 0.0, s / total[:, None], 0.0)
    disc = config.discount_rate
    if target is OracleTarget.CONVERSION:
        per_cluster = p_buy / m
    else:
        rev = p_buy * (share * price * (1.0 - disc * a)).sum(axis=1) / m
        cost = p_buy * (share * price * disc * a).sum(axis=1) / m
        if target is OracleTarget.REVENUE:
            per_cluster = rev
        elif target is OracleTarget.COST:
            per_cluster = cost
        else:
            per_cluster = rev - cost
    mean = float(per_cluster.mean())
    se = float(per_cluster.std(ddof=1) / np.sqrt(n_mc))
    return mean, se


@dataclass(frozen=True)
class AdditiveTruth:
    """Exact policy-value function for an additive validation dataset.

    The generated cluster-mean outcome is
    ``mean_j(alpha * x[0] + effect * a) + noise`` with zero-mean noise,
    so for any deterministic policy the exact value, conditional on the
    realized covariates, is the average of the noiseless term.
    """

    covariates: np.ndarray
    cluster_ord: np.ndarray
    n_clusters: int
    alpha: float
    effect: float

    def __call__(self, policy: PolicyFn) -> float:
        a = np.asarray(policy(self.covariates), dtype=np.float64)
        if a.shape != (self.covariates.shape[0],) or not np.isin(a, (0.0, 1.0)).all():
            raise domain.ValidationError("policy must return one 0/1 decision per unit")
        g = self.alpha * self.covariates[:, 0] + self.effect * a
        sums = np.bincount(self.cluster_ord, weights=g, minlength=self.n_clusters)
        sizes = np.bincount(self.cluster_ord, minlength=self.n_clusters)
        return float((sums / sizes).mean())


def simulate_additive(
    config: SimConfig,
    alpha: float = 0.3,
    effect: float = 0.5,
    noise_sd: float = 0.1,
) -> tuple[domain.Dataset, AdditiveTruth]:
    """Generate an interference-free dataset with a known value function.

    Cluster mean outcome is ``(1/M) sum_j (alpha * x[0] + effect * a) +
    eps`` with ``eps ~ N(0, noise_sd^2)`` shared within the cluster.
    The per-unit stored outcome is ``alpha * x[0] + effect * a + eps``
    (continuous), so cluster means match the model exactly.  Useful for
    validating estimator unbiasedness: returns the dataset together
    with an :class:`AdditiveTruth` computing exact policy values on the
    realized covariates.
    """
    if noise_sd < 0 or not np.isfinite(noise_sd):
        raise domain.ValidationError(f"sim config: noise_sd must be >= 0, got {noise_sd!r}")
    coefs = resolve_coefficients(config)
    n, m, d = config.n_clusters, config.n_items, config.covariate_dim

    x_all = np.empty((n * m, d))
    a_all = np.empty(n * m, dtype=np.int64)
    e1_all = np.empty(n * m)
    y_all = np.empty(n * m)

    for i in range(n):
        rng = _cluster_rng(config.seed, _KEY_ADDITIVE, i)
        x = rng.standard_normal((m, d))
        u_treat = rng.random(m)
        eps = rng.standard_normal() * noise_sd
        e1 = _propensities(config, coefs, x)
        a = (u_treat < e1).astype(np.int64)
        lo = i * m
        x_all[lo:lo + m] = x
        a_all[lo:lo + m] = a
        e1_all[lo:lo + m] = e1
        y_all[lo:lo + m] = alpha * x[:, 0] + effect * a + eps

    cluster_ord = np.repeat(np.arange(n, dtype=np.int64), m)
    cols = domain.build_columns(
        covariates=x_all,
        treatment=a_all,
        propensity_treated=e1_all,
        converted=y_all,
        revenue=np.zeros(n * m),
        cost=np.zeros(n * m),
        price=np.ones(n * m),
        unit_index=np.tile(np.arange(m, dtype=np.int64), n),
        cluster_ord=cluster_ord,
        cluster_id=np.arange(n, dtype=np.int64),
    )
    ds = domain.Dataset.from_columns(
        cols,
        provenance=config_fingerprint(config)
        + f"+additive{{alpha={alpha!r},effect={effect!r},noise_sd={noise_sd!r}}}",
    )
    truth = AdditiveTruth(
        covariates=cols.covariates,
        cluster_ord=cols.cluster_ord,
        n_clusters=n,
        alpha=float(alpha),
        effect=float(effect),
    )
    return ds, truth
