"""Regret accounting, system constants and the regret-bound evaluator."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .agent import best_channels
from .channel import ChannelMatrix, mean_hitting_times
from .errors import DegenerateGaps, EigensolverFailure, EpsilonNonpositive, LengthMismatch
from .matching import Allocation
from .topology import InterferenceGraph

EIGEN_CONVENTION = "second-largest eigenvalue modulus of P (no multiplicative symmetrization)"


@dataclass(frozen=True)
class SystemConstants:
    pi_min: float
    pi_hat_max: float
    r_max: float
    rbar_max: float
    q_max: float
    c_max: int
    lambda_max: float
    lambda_bar_min: float
    lambdas: np.ndarray = field(repr=False)
    lambda_bars: np.ndarray = field(repr=False)
    hitting_max: np.ndarray = field(repr=False)
    kappa: float = 0.0
    sampling_constant: float = 0.0
    epsilon: float = 0.0
    kappa_from_formula: bool = True
    sampling_constant_from_formula: bool = True
    eigen_convention: str = EIGEN_CONVENTION

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out


def kappa_formula(c_max: int, rbar_max: float, pi_hat_max: float, lambda_bar_min: float) -> float:
    return 28 * c_max**2 * rbar_max**2 * pi_hat_max**2 / lambda_bar_min


def sampling_constant_formula(epsilon: float, rbar_max: float, kappa: float) -> float:
    return 7 * epsilon**2 / (48 * (rbar_max + 2) ** 2 * kappa)


def second_eigenvalue(transition: np.ndarray) -> float:
    n = transition.shape[0]
    if n == 1:
        return 0.0
    try:
        ev = np.linalg.eigvals(transition)
    except np.linalg.LinAlgError as exc:
        raise EigensolverFailure(str(exc)) from exc
    mod = np.sort(np.abs(ev))[::-1]
    return float(mod[1])


def compute_constants(
    channels: ChannelMatrix,
    epsilon: float,
    *,
    kappa: float | None = None,
    sampling_constant: float | None = None,
) -> SystemConstants:
    """Constants of the model, with optional overrides for kappa and I.

    Without overrides ``kappa = 28 C^2 Rbar^2 pihat^2 / lambdabar_min`` and
    ``I = 7 eps^2 / (48 (Rbar + 2)^2 kappa)``; ``epsilon`` must then be
    positive.
    """
    if sampling_constant is None and not epsilon > 0:
        raise EpsilonNonpositive("epsilon must be positive to derive the sampling constant")
    L, S = channels.shape
    lambdas = np.zeros((L, S))
    hit = np.zeros((L, S))
    pi_min, pi_hat, r_max, rbar, q_max, c_max = np.inf, 0.0, 0.0, 0.0, 0.0, 0
    for l, s, m in channels.pairs():
        pi = m.stationary
        pi_min = min(pi_min, float(pi.min()))
        pi_hat = max(pi_hat, float(np.maximum(pi, 1 - pi).max()))
        r_max = max(r_max, float(m.states.max()))
        total = float(m.states.sum())
        rbar = max(rbar, total)
        q_max = max(q_max, total / float(pi.min()))
        c_max = max(c_max, m.n_states)
        lambdas[l, s] = second_eigenvalue(m.transition)
        hit[l, s] = mean_hitting_times(m)[1]
    lam_max = float(lambdas.max())
    lam_bar_min = 1.0 - lam_max
    if not 0 < lam_bar_min <= 1:
        raise EigensolverFailure(f"spectral gap {lam_bar_min} outside (0, 1]")
    k = kappa_formula(c_max, rbar, pi_hat, lam_bar_min) if kappa is None else float(kappa)
    i_const = sampling_constant_formula(epsilon, rbar, k) if sampling_constant is None else float(sampling_constant)
    return SystemConstants(
        pi_min=pi_min,
        pi_hat_max=pi_hat,
        r_max=r_max,
        rbar_max=rbar,
        q_max=q_max,
        c_max=c_max,
        lambda_max=lam_max,
        lambda_bar_min=lam_bar_min,
        lambdas=lambdas,
        lambda_bars=1.0 - lambdas,
        hitting_max=hit,
        kappa=k,
        sampling_constant=i_const,
        epsilon=float(epsilon),
        kappa_from_formula=kappa is None,
        sampling_constant_from_formula=sampling_constant is None,
    )


# -- regret -----------------------------------------------------------------

@dataclass
class RegretTrace:
    """Cumulative regret of one replication against the stable oracle."""

    cumulative_reward: np.ndarray
    oracle_value: float
    replication: int | None = None

    @property
    def horizon(self) -> int:
        return len(self.cumulative_reward)

    @property
    def regret(self) -> np.ndarray:
        t = np.arange(1, self.horizon + 1)
        return t * self.oracle_value - self.cumulative_reward

    def at(self, t: int) -> float:
        """R(t); R(0) is 0."""
        if t == 0:
            return 0.0
        return float(t * self.oracle_value - self.cumulative_reward[t - 1])


def _sum_rates(outcomes) -> np.ndarray:
    if hasattr(outcomes, "sum_rate"):
        return np.asarray(outcomes.sum_rate, dtype=float)
    if isinstance(outcomes, np.ndarray):
        return outcomes.astype(float)
    return np.array([float(np.sum(o.realized)) for o in outcomes])


def regret_from_outcomes(outcomes, oracle_alloc: Allocation, means, replication: int | None = None) -> RegretTrace:
    """Regret trace from a simulation result, an iterable of slot outcomes, or
    an array of per-slot sum rates."""
    means = np.asarray(means, dtype=float)
    if len(oracle_alloc) != means.shape[0]:
        raise LengthMismatch(f"allocation covers {len(oracle_alloc)} cells, means have {means.shape[0]}")
    sums = _sum_rates(outcomes)
    return RegretTrace(np.cumsum(sums), oracle_alloc.value(means), replication)


@dataclass
class AggregateTrace:
    t: np.ndarray
    mean_regret: np.ndarray
    stderr: np.ndarray
    mean_sum_rate: np.ndarray
    replications: int


def aggregate(traces: Sequence[RegretTrace], stride: int = 1) -> AggregateTrace:
    """Mean and standard error of regret across replications, sampled every
    ``stride`` slots.  ``mean_sum_rate`` averages the sum rate over the
    ``stride`` slots ending at each sample point."""
    if not traces:
        raise ValueError("need at least one trace")
    horizon = traces[0].horizon
    if any(tr.horizon != horizon for tr in traces):
        raise LengthMismatch("traces have different horizons")
    t = np.arange(stride, horizon + 1, stride)
    if t.size == 0 or t[-1] != horizon:
        t = np.append(t, horizon)
    reg = np.array([tr.regret[t - 1] for tr in traces])
    cum = np.array([np.concatenate([[0.0], tr.cumulative_reward]) for tr in traces])
    prev = np.concatenate([[0], t[:-1]])
    window = (cum[:, t] - cum[:, prev]) / (t - prev)
    n = len(traces)
    se = reg.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(len(t))
    return AggregateTrace(t, reg.mean(axis=0), se, window.mean(axis=0), n)


# -- exploration coefficients and the bound ----------------------------------

def _registry_sets(graph: InterferenceGraph, n_channels: int, registries=None) -> list[list[frozenset]]:
    if registries is None:
        return [[graph.neighbors[l]] * n_channels for l in range(graph.n_cells)]
    return [[frozenset(registries[l][s]) for s in range(n_channels)] for l in range(graph.n_cells)]


def delta_min(means, graph: InterferenceGraph, registries=None) -> float:
    """Smallest row gap or registered column gap of the true means.

    Returns ``inf`` when there is nothing to compare (one channel, no
    registered neighbors).
    """
    mu = np.asarray(means, dtype=float)
    L, S = mu.shape
    V = _registry_sets(graph, S, registries)
    gaps = []
    if S > 1:
        for l in range(L):
            row = np.sort(mu[l])
            gaps.append(float(np.diff(row).min()))
    for l in range(L):
        for s in range(S):
            for q in V[l][s]:
                gaps.append(abs(mu[l, s] - mu[q, s]))
    if not gaps:
        return math.inf
    d = min(gaps)
    if d <= 0:
        raise DegenerateGaps("two relevant means coincide")
    return d


@dataclass(frozen=True)
class TrueCoefficients:
    row: np.ndarray
    column: np.ndarray
    combined: np.ndarray
    top_sets: tuple


def true_exploration_coefficients(means, graph: InterferenceGraph, kappa: float, registries=None) -> TrueCoefficients:
    """Row/column exploration coefficients computed from the true means."""
    mu = np.asarray(means, dtype=float)
    L, S = mu.shape
    V = _registry_sets(graph, S, registries)
    row = np.zeros((L, S))
    col = np.zeros((L, S))
    tops = []
    for l in range(L):
        top = best_channels(mu[l], len(graph.neighbors[l]) + 1)
        tops.append(tuple(int(x) for x in top))
        cutoff = mu[l, top].min()
        for s in range(S):
            if S == 1:
                continue
            if s in top:
                gap2 = min((mu[l, s] - mu[l, p]) ** 2 for p in range(S) if p != s)
            else:
                gap2 = (mu[l, s] - cutoff) ** 2
            if gap2 == 0:
                raise DegenerateGaps(f"cell {l} has equal means on channel {s} and a competitor")
            row[l, s] = 4 * kappa / gap2
        for s in range(S):
            if V[l][s]:
                gap2 = min((mu[l, s] - mu[q, s]) ** 2 for q in V[l][s])
                if gap2 == 0:
                    raise DegenerateGaps(f"cell {l} ties a neighbor on channel {s}")
                col[l, s] = 4 * kappa / gap2
    return TrueCoefficients(row, col, np.maximum(row, col), tuple(tops))


@dataclass
class BoundTerms:
    t: int
    exploration_transient: float
    exploration_suboptimality: float
    allocation_transient: float
    allocation_suboptimality: float
    exploitation: float
    big_o_reported: float = 0.0
    caveat: str = "O(1) term not numerically specified; reported as 0"

    @property
    def total(self) -> float:
        return (
            self.exploration_transient
            + self.exploration_suboptimality
            + self.allocation_transient
            + self.allocation_suboptimality
            + self.exploitation
            + self.big_o_reported
        )


def bound_sample_budget(constants: SystemConstants, means, graph: InterferenceGraph, registries=None, epsilon: float | None = None):
    """Per-pair sample budget scale used by the bound, and the set A_l mask."""
    mu = np.asarray(means, dtype=float)
    L, S = mu.shape
    eps = constants.epsilon if epsilon is None else epsilon
    kappa = constants.kappa
    V = _registry_sets(graph, S, registries)
    dmin = delta_min(mu, graph, registries)
    floor = 2.0 / constants.sampling_constant
    budget = np.zeros((L, S))
    in_a = np.zeros((L, S), dtype=bool)
    for l in range(L):
        top = set(best_channels(mu[l], len(graph.neighbors[l]) + 1).tolist())
        for s in range(S):
            row2 = min(((mu[l, s] - mu[l, p]) ** 2 for p in range(S) if p != s), default=math.inf)
            col2 = min(((mu[l, s] - mu[q, s]) ** 2 for q in V[l][s]), default=math.inf)
            both = min(row2, col2)
            gate = both if s in top else row2
            in_a[l, s] = gate - 2 * eps > dmin**2
            if in_a[l, s] and math.isfinite(both):
                budget[l, s] = max(floor, 4 * kappa / (both - 2 * eps))
            elif in_a[l, s]:
                budget[l, s] = floor
            else:
                budget[l, s] = max(floor, 4 * kappa / dmin**2)
    return budget, in_a


def theorem1_bound(
    constants: SystemConstants,
    channels: ChannelMatrix,
    graph: InterferenceGraph,
    oracle_alloc: Allocation,
    t: int,
    registries=None,
    epsilon: float | None = None,
) -> BoundTerms:
    """Logarithmic regret envelope of SMILE at slot ``t``, term by term.

    ``registries`` default to all neighbors on every channel (worst case).
    The fourth term is read as ``2LS * sum(K) * oracle_value``; every term
    is returned separately so alternative groupings can be recomputed.
    """
    if t < 2:
        raise ValueError("bound needs t >= 2")
    mu = channels.means
    L, S = mu.shape
    budget, _ = bound_sample_budget(constants, mu, graph, registries, epsilon)
    log_t = math.log(t)
    K = np.floor(np.log(3 * budget * log_t + 1) / math.log(4)) + 1
    k_sum = float(K.sum())
    P = list(oracle_alloc.channels)
    oracle_value = oracle_alloc.value(mu)

    loss = np.zeros((L, S))
    for l in range(L):
        for s in range(S):
            blockers = sum(mu[q, s] for q in graph.neighbors[l] if P[q] == s)
            loss[l, s] = mu[l, P[l]] + blockers - mu[l, s]
    explore_sub = float(np.sum((4 * budget * log_t + 1 + constants.hitting_max * K) * loss))

    exploit_epochs = math.ceil(math.log(1.5 * t + 1, 4))
    per_epoch = L * constants.q_max + (L * S * graph.max_degree + L * S) * 4 * constants.c_max / constants.pi_min * oracle_value
    return BoundTerms(
        t=t,
        exploration_transient=constants.q_max * k_sum,
        exploration_suboptimality=explore_sub,
        allocation_transient=2 * L * S * constants.q_max * k_sum,
        allocation_suboptimality=2 * L * S * k_sum * oracle_value,
        exploitation=per_epoch * exploit_epochs,
    )
