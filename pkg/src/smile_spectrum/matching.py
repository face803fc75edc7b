"""Centralized generalized Gale-Shapley allocation on an interference graph.

A stable allocation maps every cell to one channel such that

1. neighbors never share a channel, and
2. whenever cell ``a`` prefers channel ``s`` over its own, some neighbor
   already on ``s`` has a strictly larger mean rate there.

:func:`solve_stable` is the greedy max-first solver used as the genie oracle,
:func:`is_stable` checks the definition for one allocation, and
:func:`enumerate_stable` brute-forces every stable allocation of a small
instance.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import Deadlock, InstanceTooLarge, InvalidAllocation
from .topology import InterferenceGraph

ENUMERATION_LIMIT = 10**7


@dataclass(frozen=True)
class Allocation:
    """Total map cell -> channel (0-based on both sides)."""

    channels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))

    def __getitem__(self, cell: int) -> int:
        return self.channels[cell]

    def __len__(self) -> int:
        return len(self.channels)

    def cells_on(self, channel: int) -> list[int]:
        return [c for c, s in enumerate(self.channels) if s == channel]

    def conflicts(self, graph: InterferenceGraph) -> list[tuple[int, int]]:
        return [(a, b) for a, b in graph.edges if self.channels[a] == self.channels[b]]

    def value(self, means) -> float:
        means = np.asarray(means)
        return float(means[np.arange(len(self.channels)), list(self.channels)].sum())

    def as_dict(self, one_based: bool = True) -> dict[int, int]:
        k = 1 if one_based else 0
        return {c + k: s + k for c, s in enumerate(self.channels)}

    @classmethod
    def from_dict(cls, mapping: dict, one_based: bool = True) -> "Allocation":
        k = 1 if one_based else 0
        n = len(mapping)
        return cls(tuple(int(mapping[c + k]) - k for c in range(n)))


class Iteration(NamedTuple):
    """One step of the greedy solver."""

    cell: int
    channel: int
    value: float
    assigned: bool
    blockers: tuple[int, ...]  # assigned neighbors already on the channel


def _check_rates(rates, graph: InterferenceGraph) -> np.ndarray:
    R = np.array(rates, dtype=float)
    if R.ndim != 2 or R.shape[0] != graph.n_cells or R.shape[1] < 1:
        raise ValueError(f"rate matrix shape {R.shape} does not fit {graph.n_cells} cells")
    if not np.all(np.isfinite(R)) or np.any(R < 0):
        raise ValueError("rates must be finite and nonnegative")
    return R


def solve_stable(rates, graph: InterferenceGraph) -> tuple[Allocation, list[Iteration]]:
    """Greedy max-first stable allocation.

    Each iteration takes the largest remaining entry ``(cell, channel)`` over
    unassigned cells (ties: lowest cell, then lowest channel).  The cell gets
    the channel unless an assigned neighbor already holds it; in that case the
    single entry is eliminated and the blocking neighbors are logged.

    Returns the allocation and the ordered iteration log.

    Raises
    ------
    Deadlock
        An unassigned cell has no remaining entries.
    """
    R = _check_rates(rates, graph)
    L, S = R.shape
    work = R.copy()
    assigned = np.full(L, -1)
    log: list[Iteration] = []
    for _ in range(L * S):
        if np.all(assigned >= 0):
            break
        flat = int(np.argmax(work))
        cell, channel = divmod(flat, S)
        if work[cell, channel] == -np.inf:
            stuck = int(np.flatnonzero(assigned < 0)[0])
            raise Deadlock(f"cell {stuck} has no feasible channel left")
        value = float(R[cell, channel])
        blockers = tuple(sorted(q for q in graph.neighbors[cell] if assigned[q] == channel))
        if blockers:
            work[cell, channel] = -np.inf
            log.append(Iteration(cell, channel, value, False, blockers))
        else:
            assigned[cell] = channel
            work[cell, :] = -np.inf
            log.append(Iteration(cell, channel, value, True, ()))
    if np.any(assigned < 0):
        stuck = int(np.flatnonzero(assigned < 0)[0])
        raise Deadlock(f"cell {stuck} has no feasible channel left")
    return Allocation(tuple(assigned)), log


class StabilityReport(NamedTuple):
    stable: bool
    blocking: tuple[int, int] | None = None

    def __bool__(self) -> bool:
        return self.stable


def is_stable(alloc: Allocation | Sequence[int], rates, graph: InterferenceGraph) -> StabilityReport:
    """Check the stability definition; returns the first blocking pair if any.

    Raises
    ------
    InvalidAllocation
        The allocation is not total or puts two neighbors on one channel.
    """
    R = _check_rates(rates, graph)
    L, S = R.shape
    chan = list(alloc.channels if isinstance(alloc, Allocation) else alloc)
    if len(chan) != L or any(not 0 <= s < S for s in chan):
        raise InvalidAllocation("every cell must hold exactly one valid channel")
    for a, b in graph.edges:
        if chan[a] == chan[b]:
            raise InvalidAllocation(f"neighbors {a} and {b} share channel {chan[a]}")
    for cell in range(L):
        own = R[cell, chan[cell]]
        for s in range(S):
            if R[cell, s] <= own:
                continue
            if not any(chan[q] == s and R[q, s] > R[cell, s] for q in graph.neighbors[cell]):
                return StabilityReport(False, (cell, s))
    return StabilityReport(True)


def enumerate_stable(rates, graph: InterferenceGraph) -> list[Allocation]:
    """All stable allocations, by exhaustive search over the S**L maps."""
    R = _check_rates(rates, graph)
    L, S = R.shape
    if S**L > ENUMERATION_LIMIT:
        raise InstanceTooLarge(f"{S}^{L} candidate maps exceed {ENUMERATION_LIMIT}")
    grid = np.indices((S,) * L).reshape(L, -1).T
    ok = np.ones(len(grid), dtype=bool)
    for a, b in graph.edges:
        ok &= grid[:, a] != grid[:, b]
    grid = grid[ok]
    rows = np.arange(L)
    own = R[rows, grid]  # (n, L)
    unstable = np.zeros(len(grid), dtype=bool)
    for cell in range(L):
        nbrs = sorted(graph.neighbors[cell])
        for s in range(S):
            prefers = R[cell, s] > own[:, cell]
            blocked = np.zeros(len(grid), dtype=bool)
            for q in nbrs:
                if R[q, s] > R[cell, s]:
                    blocked |= grid[:, q] == s
            unstable |= prefers & ~blocked
    return [Allocation(tuple(row)) for row in grid[~unstable]]
