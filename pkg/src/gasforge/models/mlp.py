from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import ACTIVATIONS, ShapeError, TrainConfig, check_xy, sgd


@dataclass
class MlpModel:
    """Fully connected regressor; ``weights[i]`` has shape (fan_in, fan_out)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "tanh"
    history: list = field(default_factory=list)

    kind = "mlp"

    @classmethod
    def init(cls, n_features: int, widths, activation: str = "tanh", seed: int = 0,
             rng: np.random.Generator | None = None) -> "MlpModel":
        rng = rng if rng is not None else np.random.default_rng(seed)
        dims = [n_features, *widths, 1]
        weights = [rng.normal(0.0, 1.0 / np.sqrt(a), (a, b)) for a, b in zip(dims[:-1], dims[1:])]
        biases = [np.zeros(b) for b in dims[1:]]
        return cls(weights, biases, activation)

    @property
    def n_features(self) -> int:
        return self.weights[0].shape[0]

    @property
    def widths(self) -> list[int]:
        return [w.shape[1] for w in self.weights[:-1]]

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def _forward(self, X):
        act = ACTIVATIONS[self.activation][0]
        h, cache = X, []
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            z = h @ W + b
            cache.append((h, z))
            h = act(z)
        out = (h @ self.weights[-1] + self.biases[-1])[:, 0]
        return out, cache, h

    def predict(self, X) -> np.ndarray:
        X, _ = check_xy(X)
        if X.shape[1] != self.n_features:
            raise ShapeError(f"model expects {self.n_features} features, got {X.shape[1]}")
        return self._forward(X)[0]

    def loss_and_grad(self, X, y):
        out, cache, h = self._forward(X)
        r = out - y
        dout = (2.0 * r / len(y))[:, None]
        dact = ACTIVATIONS[self.activation][1]
        gW = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        gW[-1] = h.T @ dout
        gb[-1] = dout.sum(axis=0)
        dh = dout @ self.weights[-1].T
        for i in range(len(cache) - 1, -1, -1):
            h_in, z = cache[i]
            dz = dh * dact(z)
            gW[i] = h_in.T @ dz
            gb[i] = dz.sum(axis=0)
            dh = dz @ self.weights[i].T
        grads = []
        for a, b in zip(gW, gb):
            grads += [a, b]
        return float(np.mean(r ** 2)), grads


def fit_mlp(X, y, config: TrainConfig = TrainConfig()) -> MlpModel:
    X, y = check_xy(X, y)
    if len(X) == 0:
        raise ShapeError("no training rows")
    rng = np.random.default_rng(config.seed)
    model = MlpModel.init(X.shape[1], config.widths, config.activation, rng=rng)
    model.history = sgd(model, X, y, config, rng, config.epochs)
    return model
