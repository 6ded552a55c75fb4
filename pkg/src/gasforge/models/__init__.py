"""Forecasters sharing a ``predict(X)`` contract, plus the monotonic NAM trainer.

``MODEL_REGISTRY`` maps a kind name to ``fit(X, y, config, k) -> model``;
other model families plug in through ``register_model``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .base import DivergenceError, ShapeError, TrainConfig, mse, variance
from .gradcheck import finite_diff_gradcheck
from .linear import ConditioningError, LinearModel, fit_linear
from .mlp import MlpModel, fit_mlp
from .monotonic import (
    AuditReport,
    MonotonicFit,
    MonotonicityConstraint,
    audit,
    chain_constraints,
    fit_nam_monotonic,
    monotonic_violation,
    sample_contexts,
    total_violation,
)
from .nam import NamModel, fit_nam
from .serialize import load_model, save_model


def predict(model, X) -> np.ndarray:
    out = model.predict(X)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("model produced non-finite predictions")
    return out


def _fit_nam_mono(X, y, config, k):
    return fit_nam_monotonic(X, y, config, chain_constraints(k), k=k).model


MODEL_REGISTRY: dict[str, Callable] = {
    "linear": lambda X, y, config, k: fit_linear(X, y),
    "mlp": lambda X, y, config, k: fit_mlp(X, y, config),
    "nam": lambda X, y, config, k: fit_nam(X, y, config),
    "nam-monotonic": _fit_nam_mono,
}


def register_model(kind: str, fit: Callable) -> None:
    if kind in MODEL_REGISTRY:
        raise ValueError(f"model kind {kind!r} already registered")
    MODEL_REGISTRY[kind] = fit


def fit_model(kind: str, X, y, config: TrainConfig, k: int):
    try:
        fit = MODEL_REGISTRY[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; known: {sorted(MODEL_REGISTRY)}") from None
    return fit(X, y, config, k)


__all__ = [
    "AuditReport", "ConditioningError", "DivergenceError", "LinearModel", "MlpModel",
    "MonotonicFit", "MonotonicityConstraint", "NamModel", "ShapeError", "TrainConfig",
    "MODEL_REGISTRY", "audit", "chain_constraints", "finite_diff_gradcheck", "fit_linear",
    "fit_mlp", "fit_model", "fit_nam", "fit_nam_monotonic", "load_model", "monotonic_violation",
    "mse", "predict", "register_model", "sample_contexts", "save_model", "total_violation",
    "variance",
]
