"""Leak-free supervised windows from block sequences and sentiment series.

Window ``i`` of a k-lag dataset carries the fullness ratio (alpha) and base
fee (beta) of blocks ``i .. i+k-1``, oldest first, and the normalized load of
block ``i+k`` as its target. Sentiment is attached from the most recent fully
completed UTC hour/day strictly before the newest feature block.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .chain_ingest import BlockRecord
from .fee_mechanism import MechanismParams, block_load
from .sentiment import SentimentScore, SentimentSeries, INTERVAL_SECONDS


def alpha(block: BlockRecord) -> float:
    if block.gas_limit <= 0:
        raise ValueError("gas_limit must be positive")
    return block.gas_used / block.gas_limit


def beta(block: BlockRecord) -> int:
    return block.base_fee


def ema(series: Sequence[float], C: float) -> list[float]:
    """Exponential moving average ``s_t = C * (x_t - s_{t-1}) + s_{t-1}``, ``s_0 = x_0``."""
    if not 0 < C <= 1:
        raise ValueError(f"smoothing coefficient must be in (0, 1], got {C}")
    if len(series) == 0:
        raise ValueError("cannot smooth an empty series")
    out = [float(series[0])]
    for x in series[1:]:
        prev = out[-1]
        out.append(C * (float(x) - prev) + prev)
    return out


@dataclass(frozen=True)
class FeatureWindow:
    alphas: tuple[float, ...]
    betas: tuple[int, ...]
    target_y: float
    gamma_hour: SentimentScore | None = None
    gamma_day: SentimentScore | None = None
    timestamp: int = 0


@dataclass
class AlignedDataset:
    """Column-oriented window store.

    ``timestamps`` holds the newest feature block's timestamp per window and
    ``target_blocks`` the block number each target refers to.
    """

    k: int
    alphas: np.ndarray
    betas: np.ndarray
    targets: np.ndarray
    timestamps: np.ndarray
    target_blocks: np.ndarray
    gamma_hour: np.ndarray | None = None
    gamma_day: np.ndarray | None = None
    dropped: int = 0

    @property
    def use_hour_sentiment(self) -> bool:
        return self.gamma_hour is not None

    @property
    def use_day_sentiment(self) -> bool:
        return self.gamma_day is not None

    def __len__(self) -> int:
        return len(self.targets)

    def __getitem__(self, i: int) -> FeatureWindow:
        return FeatureWindow(
            alphas=tuple(float(a) for a in self.alphas[i]),
            betas=tuple(int(b) for b in self.betas[i]),
            target_y=float(self.targets[i]),
            gamma_hour=None if self.gamma_hour is None else SentimentScore(*map(float, self.gamma_hour[i])),
            gamma_day=None if self.gamma_day is None else SentimentScore(*map(float, self.gamma_day[i])),
            timestamp=int(self.timestamps[i]),
        )

    def __iter__(self) -> Iterator[FeatureWindow]:
        return (self[i] for i in range(len(self)))

    @property
    def windows(self) -> list[FeatureWindow]:
        return list(self)

    def take(self, idx) -> "AlignedDataset":
        pick = lambda a: None if a is None else a[idx]
        return replace(self, alphas=self.alphas[idx], betas=self.betas[idx],
                       targets=self.targets[idx], timestamps=self.timestamps[idx],
                       target_blocks=self.target_blocks[idx],
                       gamma_hour=pick(self.gamma_hour), gamma_day=pick(self.gamma_day))

    def column_names(self) -> list[str]:
        cols = [f"alpha_{j + 1}" for j in range(self.k)] + [f"beta_{j + 1}" for j in range(self.k)]
        if self.gamma_hour is not None:
            cols += ["gh_pos", "gh_neg", "gh_neu"]
        if self.gamma_day is not None:
            cols += ["gd_pos", "gd_neg", "gd_neu"]
        return cols

    def alpha_columns(self) -> list[int]:
        return list(range(self.k))


def build_windows(
    seq: Sequence[BlockRecord],
    k: int,
    params: MechanismParams = MechanismParams(),
    ema_coefficient: float | None = None,
) -> AlignedDataset:
    """Slide a k-block window over ``seq``; ``len(seq) - k`` windows result.

    ``ema_coefficient`` optionally smooths the alpha series first. The EMA
    is causal, so window features still only see their own and older blocks.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = len(seq)
    if n < k + 1:
        raise ValueError(f"need at least k+1={k + 1} blocks, got {n}")
    a = np.array([alpha(b) for b in seq], dtype=np.float64)
    if ema_coefficient is not None:
        a = np.array(ema(a, ema_coefficient))
    fees = np.array([beta(b) for b in seq], dtype=np.int64)
    loads = np.array([float(block_load(b, params)) for b in seq], dtype=np.float64)
    ts = np.array([b.timestamp for b in seq], dtype=np.int64)
    nums = np.array([b.block_number for b in seq], dtype=np.int64)

    m = n - k
    win = np.lib.stride_tricks.sliding_window_view
    return AlignedDataset(
        k=k,
        alphas=np.ascontiguousarray(win(a, k)[:m]),
        betas=np.ascontiguousarray(win(fees, k)[:m]),
        targets=loads[k:].copy(),
        timestamps=ts[k - 1:n - 1].copy(),
        target_blocks=nums[k:].copy(),
    )


def preceding_chunk_start(timestamp: int, interval: str) -> int:
    """Start of the last full chunk that ends at or before ``timestamp``."""
    width = INTERVAL_SECONDS[interval]
    return (timestamp // width - 1) * width


def _lookup(series: SentimentSeries, timestamps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    table = {b.chunk_start: b.mean_score.as_tuple() for b in series.buckets}
    out = np.zeros((len(timestamps), 3))
    found = np.zeros(len(timestamps), dtype=bool)
    for i, t in enumerate(timestamps):
        hit = table.get(preceding_chunk_start(int(t), series.interval))
        if hit is not None:
            out[i] = hit
            found[i] = True
    return out, found


def sentiment_mask(dataset: AlignedDataset, hourly: SentimentSeries | None,
                   daily: SentimentSeries | None) -> np.ndarray:
    """Windows for which every supplied series has a preceding chunk."""
    mask = np.ones(len(dataset), dtype=bool)
    for series in (hourly, daily):
        if series is not None:
            mask &= _lookup(series, dataset.timestamps)[1]
    return mask


def align_sentiment(
    dataset: AlignedDataset,
    hourly: SentimentSeries | None = None,
    daily: SentimentSeries | None = None,
    use_hour_sentiment: bool = True,
    use_day_sentiment: bool = True,
) -> AlignedDataset:
    """Attach gamma_hour/gamma_day; windows lacking a preceding chunk are dropped.

    The returned dataset's ``dropped`` counts windows removed here.
    """
    if use_hour_sentiment and (hourly is None or not hourly.buckets):
        raise ValueError("hourly sentiment requested but the series is empty")
    if use_day_sentiment and (daily is None or not daily.buckets):
        raise ValueError("daily sentiment requested but the series is empty")
    if use_hour_sentiment and hourly.interval != "hour":
        raise ValueError("hourly series has interval " + hourly.interval)
    if use_day_sentiment and daily.interval != "day":
        raise ValueError("daily series has interval " + daily.interval)

    keep = np.ones(len(dataset), dtype=bool)
    gh = gd = None
    if use_hour_sentiment:
        gh, found = _lookup(hourly, dataset.timestamps)
        keep &= found
    if use_day_sentiment:
        gd, found = _lookup(daily, dataset.timestamps)
        keep &= found
    out = replace(dataset, gamma_hour=gh, gamma_day=gd).take(keep)
    out.dropped = dataset.dropped + int((~keep).sum())
    return out


def chronological_split(dataset: AlignedDataset, train_fraction: float) -> tuple[AlignedDataset, AlignedDataset]:
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    n = len(dataset)
    cut = math.floor(n * train_fraction)
    if cut == 0 or cut == n:
        raise ValueError(f"split of {n} windows at {train_fraction} leaves an empty side")
    return dataset.take(slice(0, cut)), dataset.take(slice(cut, n))


@dataclass(frozen=True)
class BetaScaler:
    """Standardizes base-fee columns with statistics from the training split only."""

    mean: float = 0.0
    std: float = 1.0

    @classmethod
    def fit(cls, train: AlignedDataset) -> "BetaScaler":
        vals = train.betas.astype(np.float64).ravel()
        std = float(vals.std())
        return cls(float(vals.mean()), std if std > 0 else 1.0)

    def transform(self, betas: np.ndarray) -> np.ndarray:
        return (np.asarray(betas, dtype=np.float64) - self.mean) / self.std


def to_matrix(dataset: AlignedDataset, scaler: BetaScaler | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix in ``column_names()`` order and the target vector."""
    scaler = scaler or BetaScaler()
    parts = [dataset.alphas, scaler.transform(dataset.betas)]
    if dataset.gamma_hour is not None:
        parts.append(dataset.gamma_hour)
    if dataset.gamma_day is not None:
        parts.append(dataset.gamma_day)
    return np.hstack(parts), dataset.targets.astype(np.float64)


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------

def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def export_dataset(dataset: AlignedDataset, path: str | Path) -> None:
    """CSV of features and target, plus a ``<name>.meta.json`` sidecar with flags."""
    path = Path(path)
    cols = dataset.column_names() + ["target_y"]
    with path.open("w") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(len(dataset)):
            vals = [repr(float(x)) for x in dataset.alphas[i]] + [str(int(b)) for b in dataset.betas[i]]
            for g in (dataset.gamma_hour, dataset.gamma_day):
                if g is not None:
                    vals += [repr(float(x)) for x in g[i]]
            vals.append(repr(float(dataset.targets[i])))
            fh.write(",".join(vals) + "\n")
    meta = {
        "k": dataset.k,
        "use_hour_sentiment": dataset.use_hour_sentiment,
        "use_day_sentiment": dataset.use_day_sentiment,
        "dropped": dataset.dropped,
        "timestamps": dataset.timestamps.tolist(),
        "target_blocks": dataset.target_blocks.tolist(),
    }
    _meta_path(path).write_text(json.dumps(meta))


def import_dataset(path: str | Path) -> AlignedDataset:
    path = Path(path)
    meta = json.loads(_meta_path(path).read_text())
    k = meta["k"]
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    n = len(rows)
    col = {name: j for j, name in enumerate(header)}

    def block(names, dtype):
        if n == 0:
            return np.zeros((0, len(names)), dtype=dtype)
        conv = int if dtype is np.int64 else float
        return np.array([[conv(r[col[c]]) for c in names] for r in rows], dtype=dtype)

    ds = AlignedDataset(
        k=k,
        alphas=block([f"alpha_{j + 1}" for j in range(k)], np.float64),
        betas=block([f"beta_{j + 1}" for j in range(k)], np.int64),
        targets=block(["target_y"], np.float64).reshape(-1),
        timestamps=np.array(meta["timestamps"], dtype=np.int64),
        target_blocks=np.array(meta["target_blocks"], dtype=np.int64),
        dropped=meta.get("dropped", 0),
    )
    if meta["use_hour_sentiment"]:
        ds.gamma_hour = block(["gh_pos", "gh_neg", "gh_neu"], np.float64)
    if meta["use_day_sentiment"]:
        ds.gamma_day = block(["gd_pos", "gd_neg", "gd_neu"], np.float64)
    if ds.column_names() + ["target_y"] != header:
        raise ValueError(f"dataset header {header} inconsistent with metadata")
    return ds
