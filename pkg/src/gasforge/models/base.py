"""Shared training plumbing: config, activations, metrics, and the SGD loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict, replace
from typing import Callable

import numpy as np


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 200
    seed: int = 0
    penalty_weight: float = 10.0
    grid_points: int = 101
    step: float = 0.01
    batch_size: int = 64
    widths: tuple[int, ...] = (32, 32)
    activation: str = "tanh"
    audit_contexts: int = 64
    margin: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.penalty_weight < 0:
            raise ValueError("penalty_weight must be non-negative")
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if any(w < 1 for w in self.widths):
            raise ValueError("layer widths must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.margin < 0:
            raise ValueError("margin must be non-negative")

    def with_overrides(self, **kw) -> "TrainConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["widths"] = list(self.widths)
        return d


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


ACTIVATIONS: dict[str, tuple[Callable, Callable]] = {
    # (f, f' expressed via the pre-activation z)
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "softplus": (_softplus, _sigmoid),
    "sigmoid": (_sigmoid, lambda z: _sigmoid(z) * (1.0 - _sigmoid(z))),
}


def mse(y_hat, y) -> float:
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(y) == 0:
        raise ValueError("mse of empty input")
    if y_hat.shape != y.shape:
        raise ShapeError(f"length mismatch: {y_hat.shape} vs {y.shape}")
    return float(np.mean((y_hat - y) ** 2))


def variance(values) -> float:
    """Population variance of per-trial losses."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if len(v) == 0:
        raise ValueError("variance of empty input")
    return float(np.mean((v - v.mean()) ** 2))


def check_xy(X, y=None) -> tuple[np.ndarray, np.ndarray | None]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"feature matrix must be 2-D, got shape {X.shape}")
    if y is not None:
        y = np.asarray(y, dtype=np.float64).ravel()
        if len(y) != len(X):
            raise ShapeError(f"{len(X)} rows but {len(y)} targets")
    return X, y


Penalty = Callable[[object], tuple[float, list[np.ndarray]]]


def sgd(model, X: np.ndarray, y: np.ndarray, config: TrainConfig, rng: np.random.Generator,
        epochs: int, penalty: Penalty | None = None,
        stop: Callable[[object, int], bool] | None = None) -> list[dict]:
    """Plain mini-batch gradient descent with a fixed step, updating ``model`` in place.

    ``penalty(model)`` adds a loss term and its gradients at every step.
    ``stop(model, epoch)`` is consulted after each epoch. Returns one record
    per epoch with the mean batch MSE and the mean total loss.
    """
    n = len(X)
    history = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        mse_sum = total_sum = 0.0
        batches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = model.loss_and_grad(X[idx], y[idx])
            total = loss
            if penalty is not None:
                p_loss, p_grads = penalty(model)
                total = loss + p_loss
                grads = [g + pg for g, pg in zip(grads, p_grads)]
            if not math.isfinite(total):
                raise DivergenceError(epoch, total)
            for p, g in zip(model.params, grads):
                p -= config.learning_rate * g
            mse_sum += loss
            total_sum += total
            batches += 1
        rec = {"epoch": epoch, "mse": mse_sum / batches, "loss": total_sum / batches}
        if not all(math.isfinite(v) for v in (rec["mse"], rec["loss"])) or not all(
                np.isfinite(p).all() for p in model.params):
            raise DivergenceError(epoch, rec["loss"])
        history.append(rec)
        if stop is not None and stop(model, epoch):
            break
    return history
