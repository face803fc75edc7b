"""Per-cell learning state of SMILE.

Each cell keeps, per channel, the number and sum of estimation samples, the
count of exploration epochs, the anchor state used to stitch a contiguous
sample path across epochs, and a registry of neighbors met during allocation
phases.  From these it derives exploration coefficients and decides when a
channel needs another exploration phase.

The agent never touches a channel itself; the engine feeds it observations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import DoubleInit, NotANeighbor, NotInitialized, WrongPhase

NEVER = 2**62


class Phase(IntEnum):
    INIT = 0
    RECOVERY = 1
    ESTIMATION = 2
    AWAIT = 3
    ALLOCATE = 4
    EXPLOIT = 5
    BASELINE = 6  # oracle / random policies


@dataclass(frozen=True)
class AgentParams:
    """Tuning of the exploration function.

    ``kappa`` scales every coefficient (4 * kappa / gap**2).  The threshold
    never drops below ``2 / sampling_constant`` samples per unit of log t.
    ``delta_sq`` floors squared gaps; ``epsilon`` is subtracted from them.
    """

    kappa: float
    sampling_constant: float
    delta_sq: float = 1e-6
    epsilon: float = 0.0

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.sampling_constant <= 0:
            raise ValueError("sampling_constant must be positive")
        if self.delta_sq <= 0:
            raise ValueError("delta_sq must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    @property
    def exploration_floor(self) -> float:
        return 2.0 / self.sampling_constant


@dataclass(frozen=True)
class ExplorationCoefficients:
    row: np.ndarray
    column: np.ndarray
    combined: np.ndarray
    floor: float

    @property
    def slope(self) -> np.ndarray:
        """Per-channel threshold divided by log t."""
        return np.maximum(self.combined, self.floor)

    def threshold(self, t: int) -> np.ndarray:
        return self.slope * math.log(t)


def needs_samples(samples: int, slope: float, t: int) -> bool:
    return samples < slope * math.log(t)


def first_trigger_slot(samples: int, slope: float, start: int = 1) -> int:
    """Smallest slot ``t >= start`` with ``samples < slope * log t``."""
    if needs_samples(samples, slope, start):
        return start
    x = samples / slope
    if x >= math.log(NEVER):
        return NEVER
    hi = max(start + 1, int(math.exp(x)) + 2)
    while not needs_samples(samples, slope, hi):
        hi *= 2
        if hi >= NEVER:
            return NEVER
    lo = start  # predicate false at lo, true at hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if needs_samples(samples, slope, mid):
            hi = mid
        else:
            lo = mid
    return hi


def best_channels(estimates: np.ndarray, size: int) -> np.ndarray:
    """Indices of the ``size`` largest estimates, ties to the lower index."""
    order = np.lexsort((np.arange(len(estimates)), -estimates))
    return order[: min(size, len(estimates))]


class Agent:
    """SMILE state of one cell."""

    def __init__(self, cell_id: int, n_channels: int, neighbors, params: AgentParams):
        self.cell_id = cell_id
        self.n_channels = n_channels
        self.neighbors = frozenset(neighbors)
        if cell_id in self.neighbors:
            raise ValueError("a cell cannot neighbor itself")
        self.degree = len(self.neighbors)
        self.params = params

        self.ee_samples = np.zeros(n_channels, dtype=np.int64)
        self.ee_sum = np.zeros(n_channels)
        self.epoch_count = np.ones(n_channels, dtype=np.int64)
        self.anchor = np.full(n_channels, -1, dtype=np.int64)
        self.estimates = np.zeros(n_channels)
        self.registry: list[dict[int, float]] = [{} for _ in range(n_channels)]
        self.exploit_count = 0

        self.phase = Phase.INIT
        self.channel: int | None = None  # channel being explored
        self.ee_left = 0
        self.recovery_steps = 0
        self.assigned: int | None = None

        self._coefficients: ExplorationCoefficients | None = None
        self._triggers: np.ndarray | None = None

    def __repr__(self):
        return f"Agent(cell={self.cell_id}, phase={self.phase.name}, samples={self.ee_samples.tolist()})"

    @property
    def initialized(self) -> bool:
        return bool(np.all(self.ee_samples > 0))

    def _invalidate(self):
        self._coefficients = None
        self._triggers = None

    # -- initialization -------------------------------------------------
    def init_sample(self, channel: int, state: int, rate: float) -> None:
        if self.phase != Phase.INIT:
            raise WrongPhase(f"cell {self.cell_id} is past initialization")
        if self.ee_samples[channel] > 0:
            raise DoubleInit(f"channel {channel} already initialized for cell {self.cell_id}")
        self.ee_samples[channel] = 1
        self.ee_sum[channel] = rate
        self.epoch_count[channel] += 1
        self.anchor[channel] = state
        self.estimates[channel] = rate
        self._invalidate()
        if self.initialized:
            self.phase = Phase.AWAIT

    # -- exploration coefficients --------------------------------------
    def _require_init(self):
        if not self.initialized:
            raise NotInitialized(f"cell {self.cell_id} has unsampled channels")

    def row_coefficients(self) -> np.ndarray:
        self._require_init()
        p = self.params
        r = self.estimates
        S = self.n_channels
        out = np.zeros(S)
        if S == 1:
            return out
        top = best_channels(r, self.degree + 1)
        in_top = np.zeros(S, dtype=bool)
        in_top[top] = True
        cutoff = r[top].min()
        diff2 = (r[:, None] - r[None, :]) ** 2
        np.fill_diagonal(diff2, np.inf)
        gap2 = np.where(in_top, diff2.min(axis=1), (r - cutoff) ** 2)
        return 4 * p.kappa / np.maximum(p.delta_sq, gap2 - p.epsilon)

    def row_coefficient(self, channel: int) -> float:
        return float(self.row_coefficients()[channel])

    def column_coefficient(self, channel: int) -> float:
        entries = self.registry[channel]
        if not entries:
            return 0.0
        p = self.params
        r = self.estimates[channel]
        gap2 = min((r - v) ** 2 for v in entries.values())
        return 4 * p.kappa / max(p.delta_sq, gap2 - p.epsilon)

    def coefficients(self) -> ExplorationCoefficients:
        if self._coefficients is None:
            row = self.row_coefficients()
            col = np.array([self.column_coefficient(s) for s in range(self.n_channels)])
            self._coefficients = ExplorationCoefficients(
                row, col, np.maximum(row, col), self.params.exploration_floor
            )
        return self._coefficients

    def exploration_needed(self, channel: int, t: int) -> bool:
        if t < 1:
            raise ValueError("slots are numbered from 1")
        slope = float(self.coefficients().slope[channel])
        return needs_samples(int(self.ee_samples[channel]), slope, t)

    def trigger_slots(self) -> np.ndarray:
        """Per channel, the first slot at which exploration becomes necessary."""
        if self._triggers is None:
            slope = self.coefficients().slope
            self._triggers = np.array(
                [first_trigger_slot(int(n), float(c)) for n, c in zip(self.ee_samples, slope)],
                dtype=np.int64,
            )
        return self._triggers

    def next_trigger(self) -> int:
        return int(self.trigger_slots().min())

    def first_needed(self, t: int) -> int | None:
        due = np.flatnonzero(self.trigger_slots() <= t)
        return int(due[0]) if due.size else None

    # -- exploration phase ----------------------------------------------
    def begin_exploration(self, channel: int) -> None:
        if self.phase in (Phase.INIT, Phase.RECOVERY, Phase.ESTIMATION):
            raise WrongPhase(f"cell {self.cell_id} cannot start exploring from {self.phase.name}")
        self.phase = Phase.RECOVERY
        self.channel = channel
        self.recovery_steps = 0
        self.ee_left = 4 ** int(self.epoch_count[channel] - 1)

    def run_recovery_step(self, state: int, rate: float) -> bool:
        """One recovery-epoch slot; True once the anchor state is seen again.

        The slot that recovers the anchor is counted as an estimation sample.
        """
        if self.phase != Phase.RECOVERY:
            raise WrongPhase(f"cell {self.cell_id} is not recovering")
        s = self.channel
        if state != self.anchor[s]:
            self.recovery_steps += 1
            return False
        self.ee_samples[s] += 1
        self.ee_sum[s] += rate
        self.phase = Phase.ESTIMATION
        return True

    def run_estimation_step(self, state: int, rate: float) -> bool:
        """One estimation-epoch slot; True when the epoch (and phase) ends."""
        if self.phase != Phase.ESTIMATION or self.ee_left <= 0:
            raise WrongPhase(f"cell {self.cell_id} is not in an estimation epoch")
        s = self.channel
        self.ee_samples[s] += 1
        self.ee_sum[s] += rate
        self.ee_left -= 1
        if self.ee_left:
            return False
        self.epoch_count[s] += 1
        self.estimates[s] = self.ee_sum[s] / self.ee_samples[s]
        self.anchor[s] = state
        self.channel = None
        self.phase = Phase.AWAIT
        self._invalidate()
        return True

    # -- allocation / exploitation --------------------------------------
    def record_collision(self, channel: int, neighbor: int, estimate: float) -> None:
        if neighbor not in self.neighbors:
            raise NotANeighbor(f"cell {neighbor} is not a neighbor of cell {self.cell_id}")
        self.registry[channel][neighbor] = float(estimate)
        self._invalidate()

    def exploit_length(self) -> int:
        return math.ceil(2 * 4.0 ** (self.exploit_count - 1))
