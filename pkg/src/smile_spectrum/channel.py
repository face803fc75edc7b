"""Finite-state Markov channel (FSMC) models.

A :class:`ChannelModel` is one cell/channel rate process: an ordered list of
rate values and a row-stochastic transition matrix over them.  Models are
validated at construction (stochastic, irreducible, aperiodic) and cache their
stationary distribution and mean rate.

:class:`ChainBank` advances every chain of an L x S ensemble in lockstep, one
transition per slot, independent of who observes what.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import gcd
from typing import Sequence

import numba
import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    DegenerateChain,
    EmptyStateSpace,
    NoConvergence,
    NotStochastic,
    Periodic,
    Reducible,
    SingularSystem,
    ZeroBaseMean,
)

ROW_SUM_TOL = 1e-12
DIRECT_SOLVE_MAX_STATES = 64

# Six-state Rayleigh FSMC used in the 3-cell / 5-channel experiment.
PAPER_RAYLEIGH6 = np.array(
    [
        [3 / 6, 2 / 6, 1 / 6, 0, 0, 0],
        [2 / 8, 3 / 8, 2 / 8, 1 / 8, 0, 0],
        [1 / 9, 2 / 9, 3 / 9, 2 / 9, 1 / 9, 0],
        [0, 1 / 9, 2 / 9, 3 / 9, 2 / 9, 1 / 9],
        [0, 0, 1 / 8, 2 / 8, 3 / 8, 2 / 8],
        [0, 0, 0, 1 / 6, 2 / 6, 3 / 6],
    ]
)
# Quantization levels are not published; rates grow linearly with the state
# index and get rescaled per pair by build_scaled_fsmc.
PAPER_RAYLEIGH6_RATES = np.arange(1.0, 7.0)


def _period(transition: np.ndarray) -> int:
    """gcd of cycle lengths through state 0, via BFS levels."""
    n = transition.shape[0]
    level = np.full(n, -1)
    level[0] = 0
    frontier = [0]
    g = 0
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(transition[u] > 0):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
                else:
                    g = gcd(g, int(level[u] + 1 - level[v]))
        frontier = nxt
    return g


def stationary_distribution(transition, *, tol: float = 1e-13, max_iter: int = 1_000_000) -> np.ndarray:
    """Stationary distribution of an irreducible aperiodic chain.

    Chains with at most 64 states are solved directly from
    ``(P^T - I) pi = 0`` with the normalization row appended; larger chains
    fall back to power iteration.

    Raises
    ------
    NoConvergence
        Power iteration exceeded ``max_iter`` (input was not ergodic).
    """
    P = np.asarray(transition, dtype=float)
    n = P.shape[0]
    if n == 1:
        return np.ones(1)
    if n <= DIRECT_SOLVE_MAX_STATES:
        A = np.vstack([P.T - np.eye(n), np.ones((1, n))])
        b = np.zeros(n + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(A, b, rcond=None)
        pi = np.clip(pi, 0.0, None)
        pi /= pi.sum()
        # one polishing step keeps the fixed-point residual at rounding level
        pi = pi @ P
        return pi / pi.sum()
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = pi @ P
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt / nxt.sum()
        pi = nxt
    raise NoConvergence(f"power iteration did not converge in {max_iter} steps")


@dataclass(frozen=True, eq=False)
class ChannelModel:
    """One cell/channel FSMC.

    Use :func:`validate_model` (or the builders) rather than calling the
    constructor with unchecked data.
    """

    states: np.ndarray
    transition: np.ndarray
    stationary: np.ndarray
    mean_rate: float

    @property
    def n_states(self) -> int:
        return len(self.states)

    @cached_property
    def cumulative(self) -> np.ndarray:
        cum = np.cumsum(self.transition, axis=1)
        cum[:, -1] = 1.0
        return cum

    @cached_property
    def rate_variance(self) -> float:
        return float(self.stationary @ (self.states - self.mean_rate) ** 2)

    def __repr__(self) -> str:
        return f"ChannelModel(n_states={self.n_states}, mean_rate={self.mean_rate:.6g})"


def validate_model(states: Sequence[float], transition) -> ChannelModel:
    """Check an FSMC description and return the model with cached statistics.

    >>> m = validate_model([0, 10], [[0.5, 0.5], [0.5, 0.5]])
    >>> m.mean_rate
    5.0
    """
    rates = np.asarray(states, dtype=float).reshape(-1)
    if rates.size == 0:
        raise EmptyStateSpace("a channel needs at least one state")
    P = np.atleast_2d(np.asarray(transition, dtype=float))
    n = rates.size
    if P.shape != (n, n):
        raise NotStochastic(f"transition shape {P.shape} does not match {n} states")
    if np.any(rates < 0) or not np.all(np.isfinite(rates)):
        raise ValueError("rates must be finite and nonnegative")
    if np.any(P < 0) or np.any(P > 1) or not np.all(np.isfinite(P)):
        raise NotStochastic("transition entries must lie in [0, 1]")
    row_err = np.max(np.abs(P.sum(axis=1) - 1.0))
    if row_err > ROW_SUM_TOL:
        raise NotStochastic(f"row sums deviate from 1 by {row_err:.3g}")

    n_comp, _ = connected_components(P > 0, directed=True, connection="strong")
    if n_comp != 1:
        raise Reducible(f"support graph has {n_comp} strongly connected components")
    period = _period(P)
    if n > 1 and period != 1:
        raise Periodic(f"chain has period {period}")

    pi = stationary_distribution(P)
    P.setflags(write=False)
    rates.setflags(write=False)
    pi.setflags(write=False)
    return ChannelModel(rates, P, pi, float(rates @ pi))


def mean_hitting_times(model: ChannelModel) -> tuple[np.ndarray, float]:
    """Expected slots to first reach each state from each other state.

    Returns the matrix ``M`` (``M[r, r] == 0``) and its largest off-diagonal
    entry.
    """
    P = model.transition
    n = model.n_states
    M = np.zeros((n, n))
    for target in range(n):
        A = np.eye(n) - P
        A[target, :] = 0.0
        A[target, target] = 1.0
        b = np.ones(n)
        b[target] = 0.0
        try:
            M[:, target] = np.linalg.solve(A, b)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc
    if n == 1:
        return M, 0.0
    off = ~np.eye(n, dtype=bool)
    return M, float(M[off].max())


@dataclass
class ChainState:
    """Current state of one restless chain."""

    model: ChannelModel
    state: int
    slot: int = 0

    def __post_init__(self):
        if not 0 <= self.state < self.model.n_states:
            raise IndexError(f"state {self.state} outside 0..{self.model.n_states - 1}")

    @property
    def rate(self) -> float:
        return float(self.model.states[self.state])


def step_chain(chain: ChainState, rng: np.random.Generator) -> tuple[ChainState, float]:
    """Advance one slot; the emitted rate is that of the state entered."""
    u = rng.random()
    nxt = int(np.searchsorted(chain.model.cumulative[chain.state], u, side="right"))
    nxt = min(nxt, chain.model.n_states - 1)
    new = ChainState(chain.model, nxt, chain.slot + 1)
    return new, new.rate


def build_gilbert_elliott(p_stay_good: float, p_stay_bad: float, good_rate: float) -> ChannelModel:
    """Two-state good/bad channel; the bad state (index 0) carries rate 0."""
    for p in (p_stay_good, p_stay_bad):
        if not 0.0 < p < 1.0:
            raise DegenerateChain(f"stay probability {p} must lie strictly inside (0, 1)")
    if good_rate < 0:
        raise ValueError("good_rate must be nonnegative")
    P = [[p_stay_bad, 1 - p_stay_bad], [1 - p_stay_good, p_stay_good]]
    return validate_model([0.0, good_rate], P)


def build_scaled_fsmc(base_transition, base_rates: Sequence[float], target_mean: float) -> ChannelModel:
    """Rescale a base FSMC's rates so that its mean equals ``target_mean``."""
    base = validate_model(base_rates, base_transition)
    if base.mean_rate <= 0:
        raise ZeroBaseMean("base model has zero mean rate")
    if target_mean <= 0:
        raise ValueError("target_mean must be positive")
    scaled = base.states * (target_mean / base.mean_rate)
    return validate_model(scaled, base.transition)


def paper_rayleigh6(target_mean: float) -> ChannelModel:
    return build_scaled_fsmc(PAPER_RAYLEIGH6, PAPER_RAYLEIGH6_RATES, target_mean)


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """L x S grid of channel models, one per (cell, channel) pair."""

    models: tuple[tuple[ChannelModel, ...], ...]
    means: np.ndarray = field(init=False)

    def __post_init__(self):
        if not self.models or not self.models[0]:
            raise ValueError("channel matrix needs at least one cell and one channel")
        width = len(self.models[0])
        if any(len(row) != width for row in self.models):
            raise ValueError("every cell needs a model for every channel")
        if any(not isinstance(m, ChannelModel) for row in self.models for m in row):
            raise TypeError("entries must be ChannelModel instances")
        means = np.array([[m.mean_rate for m in row] for row in self.models])
        means.setflags(write=False)
        object.__setattr__(self, "means", means)

    @classmethod
    def from_grid(cls, grid) -> "ChannelMatrix":
        return cls(tuple(tuple(row) for row in grid))

    @property
    def shape(self) -> tuple[int, int]:
        return self.means.shape

    def __getitem__(self, idx) -> ChannelModel:
        cell, channel = idx
        return self.models[cell][channel]

    def pairs(self):
        for cell, row in enumerate(self.models):
            for channel, model in enumerate(row):
                yield cell, channel, model


@numba.njit(cache=True)
def _advance_block(cumulative, n_states, states, uniforms, out):
    n_steps, n_pairs = uniforms.shape
    for t in range(n_steps):
        for p in range(n_pairs):
            u = uniforms[t, p]
            s = states[p]
            k = 0
            last = n_states[p] - 1
            while k < last and u >= cumulative[p, s, k]:
                k += 1
            states[p] = k
            out[t, p] = k


class ChainBank:
    """All L x S restless chains of one replication.

    Chains start from their stationary distributions and make exactly one
    transition per slot.  The trajectory depends only on the models and the
    generator handed in, never on which chains anybody reads.
    """

    def __init__(self, channels: ChannelMatrix, rng: np.random.Generator):
        self.channels = channels
        L, S = channels.shape
        self.shape = (L, S)
        models = [m for _, _, m in channels.pairs()]
        width = max(m.n_states for m in models)
        self._n_states = np.array([m.n_states for m in models], dtype=np.int64)
        self._cum = np.ones((len(models), width, width))
        self._rates = np.zeros((len(models), width))
        for p, m in enumerate(models):
            k = m.n_states
            self._cum[p, :k, :k] = m.cumulative
            self._rates[p, :k] = m.states
        self._rng = rng
        u = rng.random(len(models))
        self.states = np.array(
            [min(int(np.searchsorted(np.cumsum(m.stationary), x, side="right")), m.n_states - 1)
             for m, x in zip(models, u)],
            dtype=np.int64,
        )
        self.slot = 0

    def advance(self, n_slots: int) -> tuple[np.ndarray, np.ndarray]:
        """Step every chain ``n_slots`` times.

        Returns ``(states, rates)`` each shaped ``(n_slots, L, S)``; row ``i``
        is what is occupied during slot ``self.slot + i + 1``.
        """
        uniforms = self._rng.random((n_slots, len(self.states)))
        out = np.empty((n_slots, len(self.states)), dtype=np.int64)
        _advance_block(self._cum, self._n_states, self.states, uniforms, out)
        self.slot += n_slots
        pair_idx = np.arange(len(self.states))
        rates = self._rates[pair_idx, out]
        L, S = self.shape
        return out.reshape(n_slots, L, S), rates.reshape(n_slots, L, S)
