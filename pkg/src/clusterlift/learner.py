"""Logistic policy scorer trained by full-batch gradient ascent.

The model is deliberately small: ``score(x) = sigmoid(w . x + b)``.
Training maximizes the transformed surrogate objective

    J(w, b) = (1/n) * sum_ij z_ij * score(x_ij) - (lambda/2) * ||w||^2

with an L2 penalty on the weights only (the bias is free).  Everything
is deterministic: parameters start at zero, every epoch uses the full
batch, and the gradient has a closed form, so two runs on the same
transformed dataset produce bit-identical parameters.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from ._util import sigmoid
from .domain import Dataset, Level, Target, TargetSpec, ValidationError
from .transforms import TransformedDataset, z_transform

__all__ = [
    "PolicyParams",
    "TrainConfig",
    "TrainingDivergenceError",
    "load_model",
    "objective_and_gradient",
    "save_model",
    "score",
    "train",
    "train_transformed",
]


class TrainingDivergenceError(RuntimeError):
    """Objective or gradient became non-finite during training."""


@dataclass(frozen=True)
class PolicyParams:
    """Weights and bias of the logistic scorer."""

    weights: np.ndarray
    bias: float

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise ValidationError(f"weights must be a vector, got shape {w.shape}")
        object.__setattr__(self, "weights", w)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolicyParams):
            return NotImplemented
        return self.bias == other.bias and np.array_equal(self.weights, other.weights)


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-ascent settings.

    ``seed`` is carried for config plumbing and forward compatibility;
    the full-batch trainer itself is deterministic and never draws from
    it.
    """

    learning_rate: float = 0.1
    max_epochs: int = 500
    l2_lambda: float = 1e-3
    grad_tolerance: float = 1e-6
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.learning_rate > 0) or not math.isfinite(self.learning_rate):
            raise ValidationError(
                f"train config: learning_rate must be positive, got {self.learning_rate!r}"
            )
        if not isinstance(self.max_epochs, int) or self.max_epochs < 1:
            raise ValidationError(
                f"train config: max_epochs must be a positive integer, got {self.max_epochs!r}"
            )
        if self.l2_lambda < 0 or not math.isfinite(self.l2_lambda):
            raise ValidationError(
                f"train config: l2_lambda must be >= 0, got {self.l2_lambda!r}"
            )
        if self.grad_tolerance < 0 or not math.isfinite(self.grad_tolerance):
            raise ValidationError(
                f"train config: grad_tolerance must be >= 0, got {self.grad_tolerance!r}"
            )
        if not isinstance(self.seed, int):
            raise ValidationError(f"train config: seed must be an integer, got {self.seed!r}")


def score(params: PolicyParams, covariates) -> float | np.ndarray:
    """Soft treatment score(s) in (0, 1) for one row or a batch of rows."""
    x = np.asarray(covariates, dtype=np.float64)
    if x.shape[-1] != params.weights.shape[0]:
        raise ValidationError(
            f"covariates have dimension {x.shape[-1]}, "
            f"model expects {params.weights.shape[0]}"
        )
    return sigmoid(x @ params.weights + params.bias)


def objective_and_gradient(
    params: PolicyParams,
    transformed: TransformedDataset,
    config: TrainConfig,
) -> tuple[float, np.ndarray]:
    """Penalized objective and its exact gradient in (weights..., bias).

    grad_w = (1/n) * sum z * s * (1 - s) * x  -  lambda * w
    grad_b = (1/n) * sum z * s * (1 - s)
    """
    x = transformed.covariates
    z = transformed.z_values
    n = float(transformed.n_clusters)
    s = sigmoid(x @ params.weights + params.bias)
    value = float(np.dot(z, s) / n - 0.5 * config.l2_lambda * np.dot(params.weights, params.weights))
    common = z * s * (1.0 - s)
    grad_w = x.T @ common / n - config.l2_lambda * params.weights
    grad_b = common.sum() / n
    return value, np.concatenate([grad_w, [grad_b]])


def train_transformed(
    transformed: TransformedDataset,
    config: TrainConfig = TrainConfig(),
    on_epoch: Callable[[int, float], None] | None = None,
) -> PolicyParams:
    """Run full-batch gradient ascent from zero-initialized parameters.

    Stops when the gradient's infinity norm drops to ``grad_tolerance``
    or after ``max_epochs`` epochs, whichever comes first.  Raises
    :class:`TrainingDivergenceError` the first epoch the objective or
    gradient stops being finite.  ``on_epoch(epoch, objective)``, when
    given, observes the pre-update objective each epoch.
    """
    d = transformed.covariate_dim
    theta = np.zeros(d + 1)
    for epoch in range(config.max_epochs):
        params = PolicyParams(weights=theta[:d], bias=float(theta[d]))
        value, grad = objective_and_gradient(params, transformed, config)
        if not math.isfinite(value) or not np.isfinite(grad).all():
            raise TrainingDivergenceError(
                f"training diverged at epoch {epoch}: non-finite objective or gradient"
            )
        if on_epoch is not None:
            on_epoch(epoch, value)
        if float(np.abs(grad).max()) <= config.grad_tolerance:
            break
        theta = theta + config.learning_rate * grad
    return PolicyParams(weights=theta[:d].copy(), bias=float(theta[d]))


def train(
    dataset: Dataset,
    spec: TargetSpec,
    config: TrainConfig = TrainConfig(),
    on_epoch: Callable[[int, float], None] | None = None,
) -> PolicyParams:
    """Transform the dataset for ``spec`` and fit the scorer."""
    return train_transformed(z_transform(dataset, spec), config, on_epoch)


def save_model(
    params: PolicyParams,
    spec: TargetSpec,
    config: TrainConfig,
    path,
    provenance: str = "",
) -> None:
    """Persist a trained scorer with its target spec and train settings."""
    payload = {
        "weights": [float(v) for v in params.weights],
        "bias": float(params.bias),
        "spec": {
            "target": spec.target.value,
            "level": spec.level.value,
            "discount_rate": spec.discount_rate,
        },
        "train_config": asdict(config),
        "provenance": provenance,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_model(path) -> tuple[PolicyParams, TargetSpec, TrainConfig, str]:
    """Load a model written by :func:`save_model`."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValidationError(f"malformed model file: {e}") from None
    try:
        params = PolicyParams(
            weights=np.asarray(payload["weights"], dtype=np.float64),
            bias=float(payload["bias"]),
        )
        spec = TargetSpec(
            target=Target(payload["spec"]["target"]),
            level=Level(payload["spec"]["level"]),
            discount_rate=float(payload["spec"]["discount_rate"]),
        )
        config = TrainConfig(**payload["train_config"])
        provenance = str(payload.get("provenance", ""))
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"model file is missing or corrupts a field: {e}") from None
    return params, spec, config, provenance
