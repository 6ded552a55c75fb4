"""Neural additive model: one scalar-input subnetwork per feature, summed."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import ACTIVATIONS, ShapeError, TrainConfig, check_xy, sgd


@dataclass
class NamModel:
    """Subnetwork parameters are stacked on a leading feature axis.

    ``weights[l]`` has shape (n_features, fan_in, fan_out) and ``biases[l]``
    shape (n_features, fan_out) for every hidden layer; the last weight
    block maps to a scalar without a bias, and ``bias`` is the single
    global intercept.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    bias: np.ndarray
    activation: str = "tanh"
    history: list = field(default_factory=list)

    kind = "nam"

    @classmethod
    def init(cls, n_features: int, widths, activation: str = "tanh", seed: int = 0,
             rng: np.random.Generator | None = None) -> "NamModel":
        rng = rng if rng is not None else np.random.default_rng(seed)
        dims = [1, *widths, 1]
        weights = [rng.normal(0.0, 1.0 / np.sqrt(a), (n_features, a, b))
                   for a, b in zip(dims[:-1], dims[1:])]
        biases = [np.zeros((n_features, b)) for b in dims[1:-1]]
        if biases:
            biases[0] = rng.normal(0.0, 1.0, biases[0].shape)
        return cls(weights, biases, np.zeros(1), activation)

    @property
    def n_features(self) -> int:
        return self.weights[0].shape[0]

    @property
    def widths(self) -> list[int]:
        return [w.shape[2] for w in self.weights[:-1]]

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights[:-1], self.biases):
            out += [W, b]
        return out + [self.weights[-1], self.bias]

    # -- one subnetwork ----------------------------------------------------

    def _subnet_forward(self, j: int, x: np.ndarray):
        act = ACTIVATIONS[self.activation][0]
        h = x.reshape(-1, 1)
        cache = []
        for W, b in zip(self.weights[:-1], self.biases):
            z = h @ W[j] + b[j]
            cache.append((h, z))
            h = act(z)
        return (h @ self.weights[-1][j])[:, 0], (cache, h)

    def _subnet_backward(self, j: int, state, dout: np.ndarray, grads: list[np.ndarray]) -> None:
        """Accumulate d(sum dout * g_j)/d(params) into the stacked ``grads`` slices."""
        cache, h = state
        dact = ACTIVATIONS[self.activation][1]
        d = dout[:, None]
        grads[-2][j] += h.T @ d
        dh = d @ self.weights[-1][j].T
        for layer in range(len(cache) - 1, -1, -1):
            h_in, z = cache[layer]
            dz = dh * dact(z)
            grads[2 * layer][j] += h_in.T @ dz
            grads[2 * layer + 1][j] += dz.sum(axis=0)
            dh = dz @ self.weights[layer][j].T

    def contribution(self, j: int, values) -> np.ndarray:
        """Output of feature ``j``'s subnetwork at the given scalar inputs."""
        if not 0 <= j < self.n_features:
            raise IndexError(f"feature {j} out of range")
        return self._subnet_forward(j, np.asarray(values, dtype=np.float64))[0]

    # -- whole model -------------------------------------------------------

    def contributions(self, X) -> np.ndarray:
        X, _ = check_xy(X)
        if X.shape[1] != self.n_features:
            raise ShapeError(f"model expects {self.n_features} features, got {X.shape[1]}")
        return np.column_stack([self.contribution(j, X[:, j]) for j in range(self.n_features)]) \
            if len(X) else np.zeros((0, self.n_features))

    def predict(self, X) -> np.ndarray:
        return self.contributions(X).sum(axis=1) + self.bias[0]

    def zero_grads(self) -> list[np.ndarray]:
        return [np.zeros_like(p) for p in self.params]

    def loss_and_grad(self, X, y):
        states, outs = [], []
        for j in range(self.n_features):
            o, s = self._subnet_forward(j, X[:, j])
            outs.append(o)
            states.append(s)
        r = np.column_stack(outs).sum(axis=1) + self.bias[0] - y
        dout = 2.0 * r / len(y)
        grads = self.zero_grads()
        for j in range(self.n_features):
            self._subnet_backward(j, states[j], dout, grads)
        grads[-1][0] = dout.sum()
        return float(np.mean(r ** 2)), grads


def fit_nam(X, y, config: TrainConfig = TrainConfig()) -> NamModel:
    X, y = check_xy(X, y)
    if len(X) == 0:
        raise ShapeError("no training rows")
    rng = np.random.default_rng(config.seed)
    model = NamModel.init(X.shape[1], config.widths, config.activation, rng=rng)
    model.history = sgd(model, X, y, config, rng, config.epochs)
    return model
