from __future__ import annotations

import numpy as np

from .base import check_xy
from .linear import LinearModel
from .mlp import MlpModel
from .nam import NamModel

H = 1e-5


def build(kind: str, n_features: int, seed: int = 0, widths=(4,), activation: str = "tanh"):
    rng = np.random.default_rng(seed)
    if kind == "linear":
        return LinearModel(rng.normal(size=n_features), rng.normal(size=1))
    if kind == "mlp":
        m = MlpModel.init(n_features, widths, activation, rng=rng)
    elif kind == "nam":
        m = NamModel.init(n_features, widths, activation, rng=rng)
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    for p in m.params:  # zero-initialized biases would hide bias-gradient bugs
        p += rng.normal(0.0, 0.3, p.shape)
    return m


def max_relative_error(loss_fn, params, analytic, h: float = H) -> float:
    worst = 0.0
    for p, g in zip(params, analytic):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            num = (up - down) / (2 * h)
            worst = max(worst, abs(gflat[i] - num) / (abs(gflat[i]) + 1e-8))
    return worst


def finite_diff_gradcheck(kind: str, X, y, seed: int = 0, widths=(4,), activation: str = "tanh",
                          model=None) -> float:
    """Largest relative gap between backprop and central-difference MSE gradients."""
    X, y = check_xy(X, y)
    model = model if model is not None else build(kind, X.shape[1], seed, widths, activation)
    _, analytic = model.loss_and_grad(X, y)
    return max_relative_error(lambda: model.loss_and_grad(X, y)[0], model.params, analytic)
