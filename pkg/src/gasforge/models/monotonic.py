"""Weak pairwise monotonicity between alpha lags: audit and two-step training.

A model is weakly monotonic in an important feature over a lesser one when,
with both set to the same value ``a``, nudging the lesser feature by ``c``
moves the output by no more (in magnitude) than nudging the important one.
"""

from __future__ import annotations

import copy
import csv
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .base import ShapeError, TrainConfig, check_xy, sgd
from .nam import NamModel, fit_nam


@dataclass(frozen=True)
class MonotonicityConstraint:
    important_index: int
    lesser_index: int

    def __post_init__(self):
        if self.important_index == self.lesser_index:
            raise ValueError("constraint indices must differ")
        if min(self.important_index, self.lesser_index) < 0:
            raise ValueError("constraint indices must be non-negative")

    def check(self, n_features: int, k: int | None = None) -> None:
        hi = n_features if k is None else k
        for idx in (self.important_index, self.lesser_index):
            if idx >= hi:
                raise IndexError(f"constraint column {idx} outside the {hi} alpha columns")


def chain_constraints(k: int) -> list[MonotonicityConstraint]:
    """Every (newer over older) pair of alpha columns, newest pairs first.

    Alpha columns are ordered oldest first, so for k = 3 this is
    (3 over 2), (3 over 1), (2 over 1) in 1-based lag names.
    """
    pairs = [(j, i) for j in range(k - 1, 0, -1) for i in range(j - 1, -1, -1)]
    return [MonotonicityConstraint(j, i) for j, i in pairs]


def sample_contexts(X, n: int = 64, seed: int = 0) -> np.ndarray:
    """Rows of ``X`` (uniform, without replacement when possible) supplying the other coordinates."""
    X, _ = check_xy(X)
    if len(X) == 0:
        raise ShapeError("cannot sample contexts from an empty matrix")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(X), size=n, replace=n > len(X))
    return X[idx].copy()


AUDIT_COLUMNS = ("grid_point", "context_id", "delta_beta", "delta_gamma", "violation")


@dataclass
class AuditReport:
    constraint: MonotonicityConstraint
    grid: np.ndarray
    delta_important: np.ndarray  # shape (m, n_contexts)
    delta_lesser: np.ndarray

    @property
    def violations(self) -> np.ndarray:
        return np.maximum(0.0, np.abs(self.delta_lesser) - np.abs(self.delta_important))

    @property
    def total(self) -> float:
        return float(self.violations.sum())

    def export_csv(self, path: str | Path) -> None:
        v = self.violations
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(AUDIT_COLUMNS)
            for gi, ci in itertools.product(range(len(self.grid)), range(v.shape[1])):
                w.writerow([repr(float(self.grid[gi])), ci, repr(float(self.delta_important[gi, ci])),
                            repr(float(self.delta_lesser[gi, ci])), repr(float(v[gi, ci]))])


def audit(model, constraint: MonotonicityConstraint, grid_points: int = 101, step: float = 0.01,
          contexts=None) -> AuditReport:
    """Evaluate the weak-monotonicity inequality on a grid times a context sample.

    Works for any model with ``predict``; the constrained pair is set to the
    grid value and every other coordinate comes from the context row.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    if not step > 0:
        raise ValueError("step must be positive")
    contexts, _ = check_xy(contexts)
    constraint.check(contexts.shape[1])
    grid = np.linspace(0.0, 1.0, grid_points)
    n_ctx = len(contexts)
    base = np.repeat(contexts[None, :, :], grid_points, axis=0)  # (m, C, F)
    base[:, :, constraint.important_index] = grid[:, None]
    base[:, :, constraint.lesser_index] = grid[:, None]
    bump_imp = base.copy()
    bump_imp[:, :, constraint.important_index] += step
    bump_less = base.copy()
    bump_less[:, :, constraint.lesser_index] += step
    flat = lambda a: a.reshape(-1, contexts.shape[1])
    f0 = model.predict(flat(base)).reshape(grid_points, n_ctx)
    fi = model.predict(flat(bump_imp)).reshape(grid_points, n_ctx)
    fl = model.predict(flat(bump_less)).reshape(grid_points, n_ctx)
    return AuditReport(constraint, grid, fi - f0, fl - f0)


def monotonic_violation(model, constraint: MonotonicityConstraint, grid_points: int = 101,
                        step: float = 0.01, contexts=None) -> float:
    return audit(model, constraint, grid_points, step, contexts).total


def total_violation(model, constraints: Sequence[MonotonicityConstraint], grid_points: int = 101,
                    step: float = 0.01, contexts=None) -> float:
    return sum(monotonic_violation(model, c, grid_points, step, contexts) for c in constraints)


# --------------------------------------------------------------------------
# Penalty for additive models
# --------------------------------------------------------------------------

def nam_penalty(model: NamModel, constraints: Sequence[MonotonicityConstraint], grid: np.ndarray,
                step: float, weight: float, margin: float = 0.0):
    """Hinge penalty ``weight * sum_a max(0, |dg_lesser| - |dg_important| + margin)`` and its gradient.

    For an additive model the output difference from nudging one feature is
    that feature's subnetwork difference, whatever the other coordinates are,
    so the penalty needs only the two constrained subnetworks.
    """
    m = len(grid)
    xs = np.concatenate([grid, grid + step])
    grads = model.zero_grads()
    total = 0.0
    cache = {}

    def forward(j):
        if j not in cache:
            cache[j] = model._subnet_forward(j, xs)
        return cache[j]

    for con in constraints:
        out_i, st_i = forward(con.important_index)
        out_l, st_l = forward(con.lesser_index)
        d_imp = out_i[m:] - out_i[:m]
        d_less = out_l[m:] - out_l[:m]
        gap = np.abs(d_less) - np.abs(d_imp) + margin
        active = gap > 0
        if not active.any():
            continue
        total += weight * float(gap[active].sum()) / m
        g_less = weight / m * np.sign(d_less) * active
        g_imp = -weight / m * np.sign(d_imp) * active
        model._subnet_backward(con.lesser_index, st_l, np.concatenate([-g_less, g_less]), grads)
        model._subnet_backward(con.important_index, st_i, np.concatenate([-g_imp, g_imp]), grads)
    return total, grads


# --------------------------------------------------------------------------
# Two-step training
# --------------------------------------------------------------------------

@dataclass
class MonotonicFit:
    model: NamModel
    unconstrained: NamModel
    achieved_zero: bool
    violation: float
    initial_violation: float
    step2_epochs: int
    history: list = field(default_factory=list)


def fit_nam_monotonic(
    X, y,
    config: TrainConfig = TrainConfig(),
    constraints: Sequence[MonotonicityConstraint] = (),
    k: int | None = None,
    max_k: int | None = None,
    contexts=None,
) -> MonotonicFit:
    """Standard NAM training, then MSE plus violation penalty until the audit is clean.

    Step 2 runs for at most ``config.epochs`` epochs and stops at the first
    epoch whose audited violation (grid x contexts, no margin) is exactly
    zero. The training hinge uses ``config.margin`` so the audit's strict
    zero is reachable despite rounding. Running out of epochs is reported
    through ``achieved_zero``, never raised. With ``penalty_weight == 0`` the
    penalty is disabled and the step-1 model is returned unchanged.
    """
    X, y = check_xy(X, y)
    if k is not None and max_k is not None and k > max_k:
        raise ValueError(f"k={k} exceeds the configured limit {max_k}")
    for con in constraints:
        con.check(X.shape[1], k)
        if con.important_index < con.lesser_index:
            raise ValueError(f"{con}: the important column must be the more recent lag")

    unconstrained = fit_nam(X, y, config)
    if contexts is None:
        contexts = sample_contexts(X, config.audit_contexts, config.seed)
    audit_total = lambda mdl: total_violation(mdl, constraints, config.grid_points, config.step, contexts)
    history = [dict(h, phase=1) for h in unconstrained.history]
    v0 = audit_total(unconstrained) if constraints else 0.0

    if config.penalty_weight == 0 or not constraints or v0 == 0.0:
        return MonotonicFit(unconstrained, unconstrained, v0 == 0.0, v0, v0, 0, history)

    model = copy.deepcopy(unconstrained)
    grid = np.linspace(0.0, 1.0, config.grid_points)
    rng = np.random.default_rng([config.seed, 2])

    def penalty(mdl):
        return nam_penalty(mdl, constraints, grid, config.step, config.penalty_weight, config.margin)

    def clean(mdl, epoch):
        # cheap additive check first, the full context audit only when it passes
        if nam_penalty(mdl, constraints, grid, config.step, 1.0, 0.0)[0] > 0:
            return False
        return audit_total(mdl) == 0.0

    step2 = sgd(model, X, y, config, rng, config.epochs, penalty=penalty, stop=clean)
    history += [dict(h, phase=2) for h in step2]
    model.history = history
    v = audit_total(model)
    return MonotonicFit(model, unconstrained, v == 0.0, v, v0, len(step2), history)
