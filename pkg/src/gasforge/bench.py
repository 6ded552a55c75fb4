"""Experiment harness: the four-setting x k x period matrix and mechanism comparisons."""

from __future__ import annotations

import csv
import functools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .chain_ingest import import_blocks
from .fee_mechanism import (
    ConstantPredictor, DemandModel, FeeTrajectory, MechanismParams, PerfectForesight,
    gen_synthetic_demand, shifted_equal, simulate_proactive, simulate_reactive,
)
from .features import (
    AlignedDataset, BetaScaler, align_sentiment, build_windows, chronological_split,
    sentiment_mask, to_matrix,
)
from .models import ShapeError, TrainConfig, fit_model, mse, variance
from .sentiment import import_series

log = logging.getLogger(__name__)

# (use_day_sentiment, use_hour_sentiment) in report column order
SETTINGS = ((True, True), (True, False), (False, True), (False, False))
DEFAULT_TRIALS = 5
DEFAULT_TRAIN_FRACTION = 0.8


def setting_label(use_day: bool, use_hour: bool) -> str:
    return f"+OC,{'+' if use_day else '-'}DS,{'+' if use_hour else '-'}HS"


SETTING_LABELS = tuple(setting_label(d, h) for d, h in SETTINGS)


@dataclass
class ExperimentSpec:
    blocks_path: str
    k: int
    period: str = "period"
    use_day_sentiment: bool = False
    use_hour_sentiment: bool = False
    model_kind: str = "nam"
    trials: int = DEFAULT_TRIALS
    base_seed: int = 0
    train_fraction: float = DEFAULT_TRAIN_FRACTION
    hourly_path: str | None = None
    daily_path: str | None = None
    overrides: dict = field(default_factory=dict)
    use_onchain: bool = True

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.use_onchain:
            raise ValueError("on-chain variables are always used")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    @property
    def settings(self) -> str:
        return setting_label(self.use_day_sentiment, self.use_hour_sentiment)

    def config(self, seed: int) -> TrainConfig:
        return TrainConfig(**{**self.overrides, "seed": seed})

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        return cls(**d)


@dataclass
class ReportRow:
    period: str
    k: int
    settings: str
    model_kind: str
    mse: float | None
    variance: float | None
    trials: int
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@functools.lru_cache(maxsize=16)
def _load_blocks(path: str):
    return import_blocks(path)


@functools.lru_cache(maxsize=32)
def _load_series(path: str):
    return import_series(path)


def prepare_dataset(spec: ExperimentSpec) -> AlignedDataset:
    """Windows for one cell.

    When sentiment files are supplied, every setting is restricted to the
    windows that have both preceding chunks, so all four columns of a row
    are scored on the same test windows.
    """
    ds = build_windows(_load_blocks(spec.blocks_path), spec.k)
    hourly = _load_series(spec.hourly_path) if spec.hourly_path else None
    daily = _load_series(spec.daily_path) if spec.daily_path else None
    if spec.use_hour_sentiment and hourly is None:
        raise ValueError("hour sentiment requested but no hourly series given")
    if spec.use_day_sentiment and daily is None:
        raise ValueError("day sentiment requested but no daily series given")
    if hourly is not None or daily is not None:
        ds = ds.take(sentiment_mask(ds, hourly, daily))
    if spec.use_hour_sentiment or spec.use_day_sentiment:
        ds = align_sentiment(ds, hourly, daily, spec.use_hour_sentiment, spec.use_day_sentiment)
    return ds


def run_experiment(spec: ExperimentSpec) -> ReportRow:
    ds = prepare_dataset(spec)
    train, test = chronological_split(ds, spec.train_fraction)
    scaler = BetaScaler.fit(train)
    Xtr, ytr = to_matrix(train, scaler)
    Xte, yte = to_matrix(test, scaler)
    losses = []
    for t in range(spec.trials):
        try:
            model = fit_model(spec.model_kind, Xtr, ytr, spec.config(spec.base_seed + t), spec.k)
        except Exception as e:
            raise RuntimeError(f"trial {t}: {e}") from e
        losses.append(mse(model.predict(Xte), yte))
    return ReportRow(spec.period, spec.k, spec.settings, spec.model_kind,
                     float(np.mean(losses)), variance(losses), spec.trials)


def _row_order(periods: list[str]):
    def key(row: ReportRow):
        setting = SETTING_LABELS.index(row.settings) if row.settings in SETTING_LABELS else len(SETTING_LABELS)
        return (periods.index(row.period), -row.k, row.model_kind, setting)
    return key


def run_matrix(specs: Sequence[ExperimentSpec], workers: int = 1) -> list[ReportRow]:
    """Run every cell; a failing cell becomes an annotated row instead of aborting.

    Rows come back grouped by period (first-seen order), then k descending,
    then the four settings in report column order.
    """
    if not specs:
        raise ValueError("no experiment specs given")

    def cell(spec):
        try:
            return run_experiment(spec)
        except Exception as e:
            log.error("cell %s k=%d %s failed: %s", spec.period, spec.k, spec.settings, e)
            return ReportRow(spec.period, spec.k, spec.settings, spec.model_kind, None, None,
                             spec.trials, error=f"{type(e).__name__}: {e}")

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(cell, specs))
    periods = list(dict.fromkeys(s.period for s in specs))
    return sorted(rows, key=_row_order(periods))


def study_grid(periods: dict[str, dict], ks: Sequence[int] = (3, 2, 1), **common) -> list[ExperimentSpec]:
    """Specs for the full grid: each period x k x the four sentiment settings.

    ``periods`` maps a period label to ``{"blocks_path", "hourly_path", "daily_path"}``.
    """
    specs = []
    for label, paths in periods.items():
        for k in ks:
            for use_day, use_hour in SETTINGS:
                specs.append(ExperimentSpec(period=label, k=k, use_day_sentiment=use_day,
                                            use_hour_sentiment=use_hour, **paths, **common))
    return specs


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------

REPORT_COLUMNS = ("period", "k", "settings", "model_kind", "mse", "variance", "trials", "error")


def _cell_text(row: ReportRow | None) -> str:
    if row is None:
        return ""
    if row.error is not None:
        return "ERR"
    return f"{row.mse:.5f}"


def render_markdown(rows: Sequence[ReportRow]) -> str:
    periods = list(dict.fromkeys(r.period for r in rows))
    kinds = list(dict.fromkeys(r.model_kind for r in rows))
    lines = ["| | " + " | ".join(SETTING_LABELS) + " |", "|---|" + "---|" * len(SETTING_LABELS)]
    for period in periods:
        lines.append(f"| **{period}** |" + " |" * len(SETTING_LABELS))
        for kind in kinds:
            ks = sorted({r.k for r in rows if r.period == period and r.model_kind == kind}, reverse=True)
            for k in ks:
                cells = {r.settings: r for r in rows
                         if r.period == period and r.k == k and r.model_kind == kind}
                name = f"{k} Timestep" + ("s" if k != 1 else "")
                if len(kinds) > 1:
                    name += f" ({kind})"
                lines.append(f"| {name} | " + " | ".join(_cell_text(cells.get(s)) for s in SETTING_LABELS) + " |")
    return "\n".join(lines) + "\n"


def emit_report(rows: Sequence[ReportRow], path: str | Path, format: str = "csv") -> None:
    if not rows:
        raise ValueError("no report rows to emit")
    path = Path(path)
    if format == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(REPORT_COLUMNS)
            for r in rows:
                w.writerow([r.period, r.k, r.settings, r.model_kind,
                            "" if r.mse is None else repr(float(r.mse)),
                            "" if r.variance is None else repr(float(r.variance)),
                            r.trials, "" if r.error is None else r.error])
    elif format == "json":
        path.write_text(json.dumps([asdict(r) for r in rows], indent=2))
    elif format in ("markdown", "md"):
        path.write_text(render_markdown(rows))
    else:
        raise ValueError(f"unknown report format {format!r}")


def load_report(path: str | Path) -> list[ReportRow]:
    path = Path(path)
    if path.suffix == ".json":
        return [ReportRow(**d) for d in json.loads(path.read_text())]
    rows = []
    with path.open(newline="") as fh:
        for d in csv.DictReader(fh):
            rows.append(ReportRow(
                d["period"], int(d["k"]), d["settings"], d["model_kind"],
                float(d["mse"]) if d["mse"] else None,
                float(d["variance"]) if d["variance"] else None,
                int(d["trials"]), d["error"] or None))
    return rows


# --------------------------------------------------------------------------
# Mechanism comparison
# --------------------------------------------------------------------------

@dataclass
class ModelPredictor:
    """Feeds the last k simulated blocks through a trained forecaster.

    Until k blocks exist the prediction is 0 (hold the fee).
    """

    model: object
    k: int
    scaler: BetaScaler = field(default_factory=BetaScaler)

    def __post_init__(self):
        if self.model.n_features != 2 * self.k:
            raise ShapeError(f"predictor expects {self.model.n_features} features but a "
                             f"{self.k}-lag on-chain window has {2 * self.k}")

    def predict_next(self, history, demand, t, current_fee):
        if len(history) < self.k:
            return 0.0
        recent = history[-self.k:]
        alphas = [b.gas_used / b.gas_limit for b in recent]
        betas = self.scaler.transform([b.base_fee for b in recent])
        return float(self.model.predict(np.array([alphas + list(betas)]))[0])


@dataclass
class DemandSpec:
    kind: str = "autoregressive"
    seed: int = 0
    elasticity: float = 0.0
    spike_window: tuple[int, int] | None = None

    def build(self, horizon: int, reference_fee: int) -> DemandModel:
        return gen_synthetic_demand(self.kind, self.seed, horizon, self.elasticity,
                                    reference_fee=reference_fee,
                                    spike_window=tuple(self.spike_window) if self.spike_window else None)


def make_predictor(spec, params: MechanismParams = MechanismParams()):
    """``"perfect"``, ``"zero"``, a number (constant), or an object with ``predict_next``."""
    if hasattr(spec, "predict_next"):
        return spec
    if spec == "perfect":
        return PerfectForesight(params)
    if spec == "zero":
        return ConstantPredictor(0.0)
    if isinstance(spec, (int, float)):
        return ConstantPredictor(float(spec))
    raise ValueError(f"unknown predictor spec {spec!r}")


def _summary(traj: FeeTrajectory) -> dict:
    loads = np.abs(np.asarray(traj.loads))
    fees = np.asarray(traj.base_fees, dtype=np.float64)
    return {"mean_abs_load": float(loads.mean()), "max_abs_load": float(loads.max()),
            "fee_min": int(min(traj.base_fees)), "fee_max": int(max(traj.base_fees)),
            "fee_mean": float(fees.mean()), "fee_final": int(traj.base_fees[-1])}


@dataclass
class ComparisonReport:
    reactive: dict
    proactive: dict
    shift_by_one: bool
    reactive_trajectory: FeeTrajectory = field(repr=False, default=None)
    proactive_trajectory: FeeTrajectory = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {"reactive": self.reactive, "proactive": self.proactive, "shift_by_one": self.shift_by_one}


def compare_mechanisms(demand: DemandSpec, predictor="perfect",
                       params: MechanismParams = MechanismParams(), horizon: int = 200,
                       initial_fee: int = 10**9) -> ComparisonReport:
    """Reactive vs proactive on the same demand seed.

    ``shift_by_one`` checks the perfect-foresight sanity property on the
    fee-inelastic twin of the demand path, where it must hold exactly.
    """
    model = demand.build(horizon + 1, initial_fee)
    reactive = simulate_reactive(model, params, initial_fee, horizon=horizon)
    proactive = simulate_proactive(model, make_predictor(predictor, params), params, horizon, initial_fee)

    twin = model.inelastic()
    shift = shifted_equal(
        simulate_proactive(twin, PerfectForesight(params), params, horizon, initial_fee),
        simulate_reactive(twin, params, initial_fee, horizon=horizon + 1))
    return ComparisonReport(_summary(reactive), _summary(proactive), shift, reactive, proactive)


# --------------------------------------------------------------------------
# Plot data
# --------------------------------------------------------------------------

def write_loss_curve(history: Sequence[dict], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "epoch", "phase", "mse", "loss"])
        for i, h in enumerate(history):
            w.writerow([i, h["epoch"], h.get("phase", 1), repr(float(h["mse"])), repr(float(h["loss"]))])


def write_predictions(target_blocks, actual, predicted, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["target_block", "actual", "predicted"])
        for b, a, p in zip(target_blocks, actual, predicted):
            w.writerow([int(b), repr(float(a)), repr(float(p))])
