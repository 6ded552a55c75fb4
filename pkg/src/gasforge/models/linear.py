from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import ShapeError, check_xy

RIDGE_JITTER = 1e-10
MAX_CONDITION = 1e14


class ConditioningError(np.linalg.LinAlgError):
    pass


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: np.ndarray = field(default_factory=lambda: np.zeros(1))
    history: list = field(default_factory=list)

    kind = "linear"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).ravel()
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(1)

    @property
    def n_features(self) -> int:
        return len(self.weights)

    @property
    def params(self) -> list[np.ndarray]:
        return [self.weights, self.bias]

    def predict(self, X) -> np.ndarray:
        X, _ = check_xy(X)
        if X.shape[1] != self.n_features:
            raise ShapeError(f"model expects {self.n_features} features, got {X.shape[1]}")
        return X @ self.weights + self.bias[0]

    def loss_and_grad(self, X, y):
        r = self.predict(X) - y
        d = 2.0 * r / len(y)
        return float(np.mean(r ** 2)), [X.T @ d, np.array([d.sum()])]


def fit_linear(X, y) -> LinearModel:
    """Ordinary least squares with an unpenalized intercept.

    Solves the centered normal equations with a ``1e-10`` ridge on the
    weight block only, so constant targets give exactly zero weights.
    """
    X, y = check_xy(X, y)
    n, d = X.shape
    if n < d + 1:
        raise ShapeError(f"need at least {d + 1} rows for {d} features, got {n}")
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    gram = Xc.T @ Xc + RIDGE_JITTER * np.eye(d)
    if d and np.linalg.cond(gram) > MAX_CONDITION:
        raise ConditioningError(f"normal equations too ill-conditioned (cond={np.linalg.cond(gram):.3g})")
    w = np.linalg.solve(gram, Xc.T @ (y - y_mean)) if d else np.zeros(0)
    return LinearModel(w, np.array([y_mean - x_mean @ w]))
