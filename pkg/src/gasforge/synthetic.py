"""Synthetic stand-ins for the two study periods: block headers and chat corpora."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chain_ingest import BlockSequence, export_blocks
from .fee_mechanism import BLOCK_TIME, MechanismParams, gen_synthetic_demand, next_base_fee, block_load
from .sentiment import Message, NEGATIVE_WORDS, POSITIVE_WORDS, aggregate, export_series, score_messages


@dataclass(frozen=True)
class Period:
    label: str
    start_date: str
    end_date: str
    n_blocks: int
    start_timestamp: int
    regime: str


PERIODS = {
    "period1": Period("Period 1: 03/21/2023 - 04/01/2023 (ARB-airdrop)", "2023-03-21", "2023-04-01",
                      78_290, 1_679_356_800, "spike"),
    "period2": Period("Period 2: 06/01/2023 - 07/01/2023 (Normal)", "2023-06-01", "2023-07-01",
                      213_244, 1_685_577_600, "autoregressive"),
}


def synthetic_blocks(
    n_blocks: int,
    seed: int = 0,
    kind: str = "autoregressive",
    elasticity: float = 0.2,
    *,
    start_block: int = 16_870_000,
    start_timestamp: int = 1_679_356_800,
    initial_fee: int = 20 * 10**9,
    params: MechanismParams = MechanismParams(),
    spike_window: tuple[int, int] | None = None,
) -> BlockSequence:
    """Blocks whose demand follows a synthetic path and whose fees follow the reactive rule."""
    demand = gen_synthetic_demand(kind, seed, n_blocks, elasticity, reference_fee=initial_fee,
                                  spike_window=spike_window, start_block=start_block,
                                  start_timestamp=start_timestamp)
    blocks, fee = [], initial_fee
    for t in range(n_blocks):
        blk = demand.block(t, fee)
        blocks.append(blk)
        fee = next_base_fee(fee, block_load(blk, params), params)
    return BlockSequence(blocks)


_FILLER = ("gm", "anyone know the gas today", "bridge question", "new validator docs",
           "wen", "check the forum", "router update", "reading the docs")


def synthetic_messages(seq: BlockSequence, seed: int = 0, per_hour: float = 20.0,
                       channel: str = "synthetic", lead: int = 0) -> list[Message]:
    """Chat messages whose tone drifts with the congestion of the hour they fall in.

    ``lead`` seconds of chatter before the first block are included so the
    earliest windows have a completed preceding chunk.
    """
    if len(seq) == 0:
        return []
    rng = np.random.default_rng(seed)
    pos, neg = sorted(POSITIVE_WORDS), sorted(NEGATIVE_WORDS)
    t0, t1 = seq[0].timestamp - lead, seq[-1].timestamp + BLOCK_TIME
    ts = np.array([b.timestamp for b in seq])
    fullness = np.array([b.gas_used / b.gas_limit for b in seq])
    out = []
    for hour in range(t0 // 3600 * 3600, t1, 3600):
        sel = (ts >= hour) & (ts < hour + 3600)
        congestion = float(fullness[sel].mean()) if sel.any() else 0.5
        for _ in range(rng.poisson(per_hour)):
            stamp = int(hour + rng.integers(0, 3600))
            if stamp < t0 or stamp >= t1:
                continue
            r = rng.random()
            if r < 0.3 * congestion:
                text = f"gas is {rng.choice(neg)} right now"
            elif r < 0.3:
                text = f"feeling {rng.choice(pos)} about eth"
            else:
                text = str(rng.choice(_FILLER))
            out.append(Message(stamp, channel, text))
    out.sort(key=lambda m: m.timestamp)
    return out


def write_period(out_dir: str | Path, name: str, n_blocks: int | None = None, seed: int = 0,
                 per_hour: float = 20.0) -> dict[str, str]:
    """Write blocks, hourly and daily sentiment files for one study period.

    ``n_blocks`` scales the period down (default: its full length). Returns
    the ``blocks_path``/``hourly_path``/``daily_path`` mapping used by the
    experiment specs.
    """
    period = PERIODS[name]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seq = synthetic_blocks(n_blocks or period.n_blocks, seed, period.regime,
                           start_timestamp=period.start_timestamp)
    scored = score_messages(synthetic_messages(seq, seed, per_hour, name, lead=86_400))
    paths = {"blocks_path": str(out / f"{name}_blocks.csv"),
             "hourly_path": str(out / f"{name}_hourly.csv"),
             "daily_path": str(out / f"{name}_daily.csv")}
    export_blocks(seq, paths["blocks_path"], "csv")
    export_series(aggregate(scored, "hour"), paths["hourly_path"])
    export_series(aggregate(scored, "day"), paths["daily_path"])
    return paths
