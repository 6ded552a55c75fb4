"""EIP-1559 base-fee dynamics: reactive replay and prediction-driven updates.

The update rule is the deployed one::

    next = max(min_base_fee, current + sign(y) * floor(current * |y| / denominator))

with ``y = (gas_used - target) / target``. Fee arithmetic is integer wei and
``y`` is carried as an exact rational inside the simulators, so results match
the header-level reference computation to the wei.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .chain_ingest import BlockRecord, BlockSequence

LOAD_TOLERANCE = 1e-9
BLOCK_TIME = 12


@dataclass(frozen=True)
class MechanismParams:
    target_fraction: Fraction = Fraction(1, 2)
    max_change_denominator: int = 8
    min_base_fee: int = 7

    def __post_init__(self):
        object.__setattr__(self, "target_fraction", Fraction(self.target_fraction))
        if not 0 < self.target_fraction < 1:
            raise ValueError("target_fraction must lie in (0, 1)")
        if int(self.max_change_denominator) != self.max_change_denominator or self.max_change_denominator < 1:
            raise ValueError("max_change_denominator must be a positive integer")
        if int(self.min_base_fee) != self.min_base_fee or self.min_base_fee < 1:
            raise ValueError("min_base_fee must be an integer >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "MechanismParams":
        d = dict(d)
        if "target_fraction" in d:
            d["target_fraction"] = Fraction(str(d["target_fraction"]))
        return cls(**d)

    def to_dict(self) -> dict:
        return {"target_fraction": str(self.target_fraction),
                "max_change_denominator": self.max_change_denominator,
                "min_base_fee": self.min_base_fee}


class LoadDomainError(ValueError):
    pass


def gas_target(gas_limit: int, params: MechanismParams = MechanismParams()) -> int:
    if gas_limit <= 0:
        raise ValueError(f"gas_limit must be positive, got {gas_limit}")
    target = math.floor(gas_limit * params.target_fraction)
    if target <= 0:
        raise ValueError(f"gas target for limit {gas_limit} rounds to zero")
    return target


def normalized_load_exact(gas_used: int, gas_target: int) -> Fraction:
    if gas_target <= 0:
        raise LoadDomainError(f"gas_target must be positive, got {gas_target}")
    if not 0 <= gas_used <= 2 * gas_target:
        raise LoadDomainError(f"gas_used {gas_used} outside [0, {2 * gas_target}]")
    return Fraction(gas_used - gas_target, gas_target)


def normalized_load(gas_used: int, gas_target: int) -> float:
    """Signed distance from target, ``(gas_used - target) / target``, in [-1, 1]."""
    return float(normalized_load_exact(gas_used, gas_target))


def block_load(block: BlockRecord, params: MechanismParams = MechanismParams()) -> Fraction:
    """Normalized load of a recorded block.

    An odd gas limit gives ``2 * target == limit - 1``; a completely full block
    then sits one gas unit above the load domain and is clamped to +1.
    """
    target = gas_target(block.gas_limit, params)
    used = block.gas_used
    if 2 * target < used <= block.gas_limit and params.target_fraction == Fraction(1, 2):
        used = 2 * target
    try:
        return normalized_load_exact(used, target)
    except LoadDomainError as e:
        raise LoadDomainError(f"block {block.block_number}: {e}") from None


def _checked_load(y) -> Fraction:
    y = y if isinstance(y, Rational) else Fraction(float(y))
    if abs(y) > 1:
        if abs(y) > 1 + LOAD_TOLERANCE:
            raise LoadDomainError(f"load {float(y)} outside [-1, 1]")
        y = Fraction(1) if y > 0 else Fraction(-1)
    return y


def next_base_fee(current: int, y, params: MechanismParams = MechanismParams()) -> int:
    """One step of the base-fee Markov update.

    ``y`` may be a float or an exact rational. The change magnitude is
    floored before the sign is applied, as in the deployed rule, so a
    decrease is never rounded up.
    """
    if current < params.min_base_fee:
        raise ValueError(f"current fee {current} below floor {params.min_base_fee}")
    y = _checked_load(y)
    step = math.floor(current * abs(y) / params.max_change_denominator)
    nxt = current + step if y >= 0 else current - step
    return max(params.min_base_fee, nxt)


# --------------------------------------------------------------------------
# Trajectories
# --------------------------------------------------------------------------

TRAJECTORY_COLUMNS = ("block_number", "base_fee", "normalized_load", "realized_gas_used")


@dataclass
class FeeTrajectory:
    block_numbers: list[int] = field(default_factory=list)
    base_fees: list[int] = field(default_factory=list)
    loads: list[float] = field(default_factory=list)
    gas_used: list[int] = field(default_factory=list)
    predicted: list[float] | None = None

    def __len__(self) -> int:
        return len(self.base_fees)

    def append(self, number: int, fee: int, load: float, used: int, predicted: float | None = None):
        self.block_numbers.append(number)
        self.base_fees.append(fee)
        self.loads.append(load)
        self.gas_used.append(used)
        if predicted is not None:
            if self.predicted is None:
                self.predicted = []
            self.predicted.append(predicted)

    def export_csv(self, path: str | Path) -> None:
        cols = list(TRAJECTORY_COLUMNS)
        if self.predicted is not None:
            cols.append("predicted_load")
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for i in range(len(self)):
                row = [self.block_numbers[i], self.base_fees[i], repr(float(self.loads[i])), self.gas_used[i]]
                if self.predicted is not None:
                    row.append(repr(float(self.predicted[i])))
                w.writerow(row)

    @classmethod
    def import_csv(cls, path: str | Path) -> "FeeTrajectory":
        out = cls()
        with Path(path).open(newline="") as fh:
            for row in csv.DictReader(fh):
                pred = row.get("predicted_load")
                out.append(int(row["block_number"]), int(row["base_fee"]),
                           float(row["normalized_load"]), int(row["realized_gas_used"]),
                           float(pred) if pred is not None else None)
        return out


# --------------------------------------------------------------------------
# Synthetic demand
# --------------------------------------------------------------------------

DEMAND_KINDS = ("sinusoidal", "autoregressive", "spike")


@dataclass
class DemandModel:
    """Latent per-block fullness path plus an isoelastic fee response.

    ``latent[t]`` is the block fullness (gas_used / gas_limit) that would be
    realized at ``reference_fee``. At posted fee ``f`` the demand is scaled by
    ``(reference_fee / f) ** elasticity`` and clipped to the block.
    """

    kind: str
    seed: int
    latent: np.ndarray
    elasticity: float = 0.0
    gas_limit: int = 30_000_000
    reference_fee: int = 10**9
    spike_window: tuple[int, int] | None = None
    start_block: int = 0
    start_timestamp: int = 1_679_356_800

    @property
    def horizon(self) -> int:
        return len(self.latent)

    def gas_used(self, t: int, fee: int) -> int:
        frac = float(self.latent[t])
        if self.elasticity:
            frac *= (self.reference_fee / fee) ** self.elasticity
        return int(min(max(frac, 0.0), 1.0) * self.gas_limit)

    def load(self, t: int, fee: int, params: MechanismParams = MechanismParams()) -> Fraction:
        return block_load(self.block(t, fee), params)

    def block(self, t: int, fee: int) -> BlockRecord:
        return BlockRecord(
            timestamp=self.start_timestamp + BLOCK_TIME * t,
            block_number=self.start_block + t,
            gas_limit=self.gas_limit,
            gas_used=self.gas_used(t, fee),
            base_fee=fee,
        )

    def inelastic(self) -> "DemandModel":
        return DemandModel(self.kind, self.seed, self.latent, 0.0, self.gas_limit,
                           self.reference_fee, self.spike_window, self.start_block,
                           self.start_timestamp)


def gen_synthetic_demand(
    kind: str,
    seed: int,
    horizon: int,
    elasticity: float = 0.0,
    *,
    gas_limit: int = 30_000_000,
    reference_fee: int = 10**9,
    spike_window: tuple[int, int] | None = None,
    start_block: int = 0,
    start_timestamp: int = 1_679_356_800,
) -> DemandModel:
    """Deterministic synthetic demand path.

    ``sinusoidal`` oscillates around the target with noise, ``autoregressive``
    is an AR(3) around the target with decaying lag weights, and ``spike``
    is the AR path with a saturated window (airdrop-style congestion).
    ``spike_window`` is ``(start, length)`` in block offsets.
    """
    if kind not in DEMAND_KINDS:
        raise ValueError(f"unknown demand kind {kind!r}; expected one of {DEMAND_KINDS}")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if elasticity < 0:
        raise ValueError("elasticity must be non-negative")
    rng = np.random.default_rng(seed)
    t = np.arange(horizon)
    window = None
    if kind == "sinusoidal":
        period = rng.uniform(30.0, 120.0)
        phase = rng.uniform(0.0, 2 * np.pi)
        latent = 0.5 + 0.35 * np.sin(2 * np.pi * t / period + phase) + rng.normal(0.0, 0.05, horizon)
    else:
        latent = _ar3(rng, horizon)
        if kind == "spike":
            if spike_window is None:
                spike_window = (horizon // 3, max(1, horizon // 10))
            start, length = spike_window
            if not (0 <= start < horizon and length >= 1):
                raise ValueError(f"spike window {spike_window} outside horizon {horizon}")
            stop = min(horizon, start + length)
            latent[start:stop] = rng.uniform(0.96, 1.0, stop - start)
            window = (start, stop - start)
    latent = np.clip(latent, 0.0, 1.0)
    return DemandModel(kind, seed, latent, float(elasticity), gas_limit, reference_fee,
                       window, start_block, start_timestamp)


AR_WEIGHTS = (0.55, 0.25, 0.1)


def _ar3(rng: np.random.Generator, n: int, noise: float = 0.08) -> np.ndarray:
    z = np.empty(n + 3)
    z[:3] = 0.5 + rng.normal(0.0, noise, 3)
    eps = rng.normal(0.0, noise, n)
    for i in range(3, n + 3):
        dev = sum(w * (z[i - j - 1] - 0.5) for j, w in enumerate(AR_WEIGHTS))
        z[i] = 0.5 + dev + eps[i - 3]
    return z[3:]


# --------------------------------------------------------------------------
# Simulators
# --------------------------------------------------------------------------

def simulate_reactive(
    source: BlockSequence | DemandModel,
    params: MechanismParams = MechanismParams(),
    initial_fee: int = 10**9,
    horizon: int | None = None,
) -> FeeTrajectory:
    """Run the ex-post rule: the fee for block n+1 reacts to block n's load.

    With a recorded ``BlockSequence`` the realized gas is replayed as-is
    (recorded demand cannot respond to a counterfactual fee). With a
    ``DemandModel`` each block's demand is drawn at the fee actually posted.
    """
    traj = FeeTrajectory()
    fee = initial_fee
    if isinstance(source, DemandModel):
        n = source.horizon if horizon is None else horizon
        if n < 1 or n > source.horizon:
            raise ValueError(f"horizon must be in [1, {source.horizon}]")
        for t in range(n):
            blk = source.block(t, fee)
            y = block_load(blk, params)
            traj.append(blk.block_number, fee, float(y), blk.gas_used)
            fee = next_base_fee(fee, y, params)
        return traj

    if len(source) == 0:
        raise ValueError("cannot simulate an empty block sequence")
    blocks = source if horizon is None else source[:horizon]
    for blk in blocks:
        y = block_load(blk, params)
        traj.append(blk.block_number, fee, float(y), blk.gas_used)
        fee = next_base_fee(fee, y, params)
    return traj


class Predictor(Protocol):
    def predict_next(self, history: Sequence[BlockRecord], demand: DemandModel,
                     t: int, current_fee: int) -> float:
        """Predicted normalized load of block ``t`` given the blocks before it."""


@dataclass
class PerfectForesight:
    """Oracle returning block t's load at the fee currently posted.

    For fee-inelastic demand this is exactly the load block t will realize.
    """

    params: MechanismParams = MechanismParams()

    def predict_next(self, history, demand, t, current_fee):
        return demand.load(t, current_fee, self.params)


@dataclass
class ConstantPredictor:
    value: float = 0.0

    def predict_next(self, history, demand, t, current_fee):
        return self.value


def simulate_proactive(
    demand: DemandModel,
    predictor: Predictor,
    params: MechanismParams = MechanismParams(),
    horizon: int | None = None,
    initial_fee: int = 10**9,
) -> FeeTrajectory:
    """Post each block's fee from the predicted load of that same block.

    Block t's fee is ``next_base_fee(fee[t-1], y_hat[t])`` (with ``fee[-1]``
    the initial fee), after which block t's demand is realized at that fee.
    Predictions outside [-1, 1] are clipped; both predicted and realized
    loads are logged.
    """
    n = demand.horizon if horizon is None else horizon
    if n < 1:
        raise ValueError("horizon must be >= 1")
    if n > demand.horizon:
        raise ValueError(f"horizon {n} exceeds demand path length {demand.horizon}")
    traj = FeeTrajectory(predicted=[])
    history: list[BlockRecord] = []
    fee = initial_fee
    for t in range(n):
        y_hat = predictor.predict_next(history, demand, t, fee)
        if not isinstance(y_hat, Rational):
            y_hat = float(y_hat)
            if not math.isfinite(y_hat):
                raise ValueError(f"predictor returned non-finite load at block {t}")
        y_hat = min(Fraction(1), max(Fraction(-1), y_hat)) if isinstance(y_hat, Rational) \
            else min(1.0, max(-1.0, y_hat))
        fee = next_base_fee(fee, y_hat, params)
        blk = demand.block(t, fee)
        y = block_load(blk, params)
        traj.append(blk.block_number, fee, float(y), blk.gas_used, float(y_hat))
        history.append(blk)
    return traj


def shifted_equal(proactive: FeeTrajectory, reactive: FeeTrajectory) -> bool:
    """True when the proactive fee/load path equals the reactive one advanced a block.

    Compares proactive block t against reactive block t+1 for the fee and
    block t against block t for the realized load, over the overlap.
    """
    n = min(len(proactive), len(reactive) - 1)
    if n < 1:
        return False
    return (proactive.base_fees[:n] == reactive.base_fees[1:n + 1]
            and proactive.gas_used[:n] == reactive.gas_used[:n]
            and proactive.loads[:n] == reactive.loads[:n])
