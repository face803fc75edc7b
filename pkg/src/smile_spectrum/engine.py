"""Time-slotted simulation of SMILE and baseline policies.

Every slot, all L x S chains make one transition (restless channels).  Each
cell picks at most one channel; a cell's realized rate is the chain rate of
its channel unless a neighbor picked the same channel, in which case both get
zero.

SMILE runs in three alternating phases:

* exploration: cells whose sample counts fall below their threshold explore
  one channel at a time (recovery epoch, then estimation epoch), while the
  others wait on their last assigned channel;
* allocation: once nobody needs to explore, the distributed greedy protocol
  runs; an uncontested iteration takes one slot and a collision takes two;
* exploitation: everyone transmits on the assigned channel for
  ``2 * 4**(n - 1)`` slots unless some cell's threshold is crossed first.

Exploitation stretches contain no per-slot decisions, so they are simulated
in bulk: the next interrupt slot is known in closed form from each agent's
sample counts and coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .agent import Agent, AgentParams, Phase
from .channel import ChainBank, ChannelMatrix
from .errors import Deadlock, RecoveryTimeout
from .matching import Allocation, Iteration, solve_stable
from .topology import InterferenceGraph, check_feasibility

POLICIES = ("smile", "oracle", "random")


class SlotOutcome(NamedTuple):
    t: int
    choices: np.ndarray  # channel per cell, -1 for silent
    rates: np.ndarray  # chain rate of the chosen channel (0 when silent)
    realized: np.ndarray
    phases: np.ndarray


@dataclass
class EngineConfig:
    channels: ChannelMatrix
    graph: InterferenceGraph
    horizon: int
    params: AgentParams | None = None
    seed: int | np.random.SeedSequence = 0
    policy: str = "smile"
    record_cells: bool = True
    record_chains: bool = False
    max_recovery: int | None = None
    block: int = 8192

    def __post_init__(self):
        L, S = self.channels.shape
        if self.graph.n_cells != L:
            raise ValueError(f"graph has {self.graph.n_cells} cells, channels have {L}")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.policy == "smile":
            if self.params is None:
                raise ValueError("smile needs agent parameters")
            if self.horizon < S:
                raise ValueError(f"horizon {self.horizon} shorter than the {S} initialization slots")


class AllocationEvent(NamedTuple):
    start: int  # first slot of the allocation phase
    allocation: Allocation
    iterations: list[Iteration]
    slots: int


@dataclass
class SimulationResult:
    policy: str
    horizon: int
    sum_rate: np.ndarray
    choices: np.ndarray | None = None
    rates: np.ndarray | None = None
    realized: np.ndarray | None = None
    phases: np.ndarray | None = None
    chain_states: np.ndarray | None = None
    allocations: list[AllocationEvent] = field(default_factory=list)
    agents: list[Agent] | None = None

    def outcomes(self) -> Iterator[SlotOutcome]:
        if self.choices is None:
            raise ValueError("per-cell records were not kept (record_cells=False)")
        for i in range(self.horizon):
            yield SlotOutcome(i + 1, self.choices[i], self.rates[i], self.realized[i], self.phases[i])

    def phase_counts(self) -> dict[str, int]:
        if self.phases is None:
            raise ValueError("per-cell records were not kept")
        values, counts = np.unique(self.phases, return_counts=True)
        return {Phase(v).name: int(c) for v, c in zip(values, counts)}


def collision_mask(choices: np.ndarray, graph: InterferenceGraph) -> np.ndarray:
    """Boolean mask of cells that collide; works on ``(L,)`` or ``(n, L)``."""
    a, b = graph.edge_arrays()
    hit = np.zeros(choices.shape, dtype=bool)
    if a.size == 0:
        return hit
    same = (choices[..., a] == choices[..., b]) & (choices[..., a] >= 0)
    if choices.ndim == 1:
        hit[a[same]] = True
        hit[b[same]] = True
    else:
        rows, k = np.nonzero(same)
        hit[rows, a[k]] = True
        hit[rows, b[k]] = True
    return hit


def resolve_slot(choices: Sequence[int], chain_rates, graph: InterferenceGraph) -> np.ndarray:
    """Realized rates of one slot.

    ``chain_rates`` is the L x S matrix of rates emitted this slot.  A cell
    gets its channel's rate unless a neighbor chose the same channel; silent
    cells (``-1``) get zero.
    """
    c = np.asarray(choices, dtype=np.int64)
    r = np.asarray(chain_rates, dtype=float)
    active = c >= 0
    x = np.zeros(len(c))
    x[active] = r[np.flatnonzero(active), c[active]]
    x[collision_mask(c, graph)] = 0.0
    return x


class ProtocolResult(NamedTuple):
    allocation: Allocation
    iterations: list[Iteration]
    slots: int


def run_allocation_protocol(agents: Sequence[Agent], graph: InterferenceGraph) -> ProtocolResult:
    """Distributed greedy allocation driven by the agents' own estimates.

    In every iteration each unassigned cell bids its best remaining channel;
    the highest bid wins contention (rate-ordered backoff, ties to the lower
    cell index).  The winner probes its channel: if assigned neighbors already
    hold it, both sides log the collision in their registries and the winner
    drops that channel; otherwise the winner takes it.

    Slots consumed: one per iteration plus one extra per collision.
    """
    L = len(agents)
    remaining = [dict(enumerate(a.estimates.tolist())) for a in agents]
    holder: dict[int, int] = {}
    log: list[Iteration] = []
    slots = 0
    while len(holder) < L:
        bids = []
        for cell in range(L):
            if cell in holder or not remaining[cell]:
                continue
            # ties inside a row go to the lower channel
            channel = max(remaining[cell], key=lambda s, r=remaining[cell]: (r[s], -s))
            bids.append((remaining[cell][channel], -cell, channel))
        if not bids:
            stuck = next(c for c in range(L) if c not in holder)
            raise Deadlock(f"cell {stuck} has no feasible channel left")
        value, neg_cell, channel = max(bids)
        cell = -neg_cell
        me = agents[cell]
        blockers = tuple(sorted(q for q in me.neighbors if holder.get(q) == channel))
        if blockers:
            for q in blockers:
                me.record_collision(channel, q, agents[q].estimates[channel])
                agents[q].record_collision(channel, cell, me.estimates[channel])
            del remaining[cell][channel]
            log.append(Iteration(cell, channel, value, False, blockers))
            slots += 2
        else:
            holder[cell] = channel
            log.append(Iteration(cell, channel, value, True, ()))
            slots += 1
    return ProtocolResult(Allocation(tuple(holder[c] for c in range(L))), log, slots)


class _Run:
    """Shared slot bookkeeping: chain blocks and output buffers."""

    def __init__(self, config: EngineConfig):
        self.cfg = config
        self.L, self.S = config.channels.shape
        ss = config.seed if isinstance(config.seed, np.random.SeedSequence) else np.random.SeedSequence(config.seed)
        chain_ss, policy_ss = ss.spawn(2)
        self.bank = ChainBank(config.channels, np.random.default_rng(chain_ss))
        self.policy_rng = np.random.default_rng(policy_ss)
        T = config.horizon
        self.sum_rate = np.zeros(T)
        if config.record_cells:
            self.choices = np.full((T, self.L), -1, dtype=np.int16)
            self.rates = np.zeros((T, self.L))
            self.realized = np.zeros((T, self.L))
            self.phases = np.zeros((T, self.L), dtype=np.int8)
        self.chain_states = np.zeros((T, self.L, self.S), dtype=np.int8) if config.record_chains else None
        self.block_start = 1
        self.block_states = np.zeros((0, self.L, self.S), dtype=np.int64)
        self.block_rates = np.zeros((0, self.L, self.S))
        self.cells = np.arange(self.L)

    @property
    def block_end(self) -> int:
        """One past the last slot covered by the current block."""
        return self.block_start + len(self.block_states)

    def ensure(self, t: int) -> None:
        if t < self.block_end:
            return
        n = min(self.cfg.block, self.cfg.horizon - t + 1)
        self.block_start = t
        self.block_states, self.block_rates = self.bank.advance(n)
        if self.chain_states is not None:
            self.chain_states[t - 1 : t - 1 + n] = self.block_states

    def play(self, t: int, choices: np.ndarray, phases) -> tuple[np.ndarray, np.ndarray]:
        """Play slot ``t``; returns the L x S chain states and rates."""
        self.ensure(t)
        i = t - self.block_start
        states, rates = self.block_states[i], self.block_rates[i]
        active = choices >= 0
        chosen = np.zeros(self.L)
        chosen[active] = rates[self.cells[active], choices[active]]
        x = np.where(collision_mask(choices, self.cfg.graph), 0.0, chosen)
        self.sum_rate[t - 1] = x.sum()
        if self.cfg.record_cells:
            self.choices[t - 1] = choices
            self.rates[t - 1] = chosen
            self.realized[t - 1] = x
            self.phases[t - 1] = phases
        return states, rates

    def play_fixed(self, t0: int, t1: int, choices: np.ndarray, phase: int) -> None:
        """Play slots ``[t0, t1)`` with constant choices (must fit one block)."""
        self.ensure(t0)
        i0, i1 = t0 - self.block_start, t1 - self.block_start
        assert i1 <= len(self.block_states)
        active = choices >= 0
        chosen = np.zeros((t1 - t0, self.L))
        chosen[:, active] = self.block_rates[i0:i1, self.cells[active], choices[active]]
        x = chosen * ~collision_mask(choices, self.cfg.graph)
        self.sum_rate[t0 - 1 : t1 - 1] = x.sum(axis=1)
        if self.cfg.record_cells:
            self.choices[t0 - 1 : t1 - 1] = choices
            self.rates[t0 - 1 : t1 - 1] = chosen
            self.realized[t0 - 1 : t1 - 1] = x
            self.phases[t0 - 1 : t1 - 1] = phase

    def result(self, **extra) -> SimulationResult:
        res = SimulationResult(self.cfg.policy, self.cfg.horizon, self.sum_rate, chain_states=self.chain_states, **extra)
        if self.cfg.record_cells:
            res.choices, res.rates, res.realized, res.phases = self.choices, self.rates, self.realized, self.phases
        return res


def _run_fixed(run: _Run, alloc: Allocation) -> SimulationResult:
    choices = np.array(alloc.channels, dtype=np.int64)
    t, T = 1, run.cfg.horizon
    while t <= T:
        run.ensure(t)
        stop = min(run.block_end, T + 1)
        run.play_fixed(t, stop, choices, Phase.BASELINE)
        t = stop
    return run.result()


def _run_random(run: _Run) -> SimulationResult:
    t, T = 1, run.cfg.horizon
    graph = run.cfg.graph
    while t <= T:
        run.ensure(t)
        stop = min(run.block_end, T + 1)
        n = stop - t
        choices = run.policy_rng.integers(0, run.S, size=(n, run.L))
        i0 = t - run.block_start
        rates = run.block_rates[i0 : i0 + n]
        chosen = np.take_along_axis(rates, choices[:, :, None], axis=2)[:, :, 0]
        x = np.where(collision_mask(choices, graph), 0.0, chosen)
        run.sum_rate[t - 1 : stop - 1] = x.sum(axis=1)
        if run.cfg.record_cells:
            run.choices[t - 1 : stop - 1] = choices
            run.rates[t - 1 : stop - 1] = chosen
            run.realized[t - 1 : stop - 1] = x
            run.phases[t - 1 : stop - 1] = Phase.BASELINE
        t = stop
    return run.result()


def _run_smile(run: _Run) -> SimulationResult:
    cfg = run.cfg
    graph, T, L, S = cfg.graph, cfg.horizon, run.L, run.S
    agents = [Agent(c, S, graph.neighbors[c], cfg.params) for c in range(L)]
    events: list[AllocationEvent] = []

    # initialization: every cell samples channel s in slot s + 1
    for s in range(S):
        t = s + 1
        choices = np.full(L, s, dtype=np.int64)
        states, rates = run.play(t, choices, Phase.INIT)
        for a in agents:
            a.init_sample(s, int(states[a.cell_id, s]), float(rates[a.cell_id, s]))

    t = S + 1
    mode = "cycle"
    exploit_end = 0
    phases = np.empty(L, dtype=np.int8)
    choices = np.empty(L, dtype=np.int64)
    while t <= T:
        if mode == "cycle":
            exploring = False
            for a in agents:
                if a.phase == Phase.AWAIT:
                    s = a.first_needed(t)
                    if s is not None:
                        a.begin_exploration(s)
                if a.phase in (Phase.RECOVERY, Phase.ESTIMATION):
                    exploring = True
                    choices[a.cell_id] = a.channel
                else:
                    choices[a.cell_id] = -1 if a.assigned is None else a.assigned
                phases[a.cell_id] = a.phase
            if not exploring:
                mode = "allocate"
                continue
            states, rates = run.play(t, choices, phases)
            for a in agents:
                if a.phase == Phase.RECOVERY:
                    s = a.channel
                    a.run_recovery_step(int(states[a.cell_id, s]), float(rates[a.cell_id, s]))
                    if cfg.max_recovery is not None and a.recovery_steps > cfg.max_recovery:
                        raise RecoveryTimeout(f"cell {a.cell_id} spent {a.recovery_steps} slots recovering")
                elif a.phase == Phase.ESTIMATION:
                    s = a.channel
                    a.run_estimation_step(int(states[a.cell_id, s]), float(rates[a.cell_id, s]))
            t += 1

        elif mode == "allocate":
            for a in agents:
                a.phase = Phase.ALLOCATE
            result = run_allocation_protocol(agents, graph)
            events.append(AllocationEvent(t, result.allocation, result.iterations, result.slots))
            holder = np.full(L, -1, dtype=np.int64)
            for it in result.iterations:
                for _ in range(1 if it.assigned else 2):
                    if t > T:
                        break
                    probe = holder.copy()
                    probe[it.cell] = it.channel
                    run.play(t, probe, Phase.ALLOCATE)
                    t += 1
                if it.assigned:
                    holder[it.cell] = it.channel
            for a in agents:
                a.assigned = result.allocation[a.cell_id]
                a.phase = Phase.EXPLOIT
            exploit_end = t + agents[0].exploit_length()
            mode = "exploit"

        else:  # exploit
            if t >= exploit_end:
                for a in agents:
                    a.exploit_count += 1
                    a.phase = Phase.AWAIT
                mode = "cycle"
                continue
            interrupt = min(a.next_trigger() for a in agents)
            if interrupt <= t:
                for a in agents:
                    a.phase = Phase.AWAIT
                mode = "cycle"
                continue
            run.ensure(t)
            stop = min(exploit_end, interrupt, T + 1, run.block_end)
            assigned = np.array([a.assigned for a in agents], dtype=np.int64)
            run.play_fixed(t, stop, assigned, Phase.EXPLOIT)
            t = stop

    return run.result(allocations=events, agents=agents)


def run(config: EngineConfig) -> SimulationResult:
    """Simulate one replication.

    Deterministic given ``config.seed``; chain trajectories depend on the
    seed and the channel models only, never on the policy.
    """
    sim = _Run(config)
    if config.policy == "oracle":
        alloc, _ = solve_stable(config.channels.means, config.graph)
        return _run_fixed(sim, alloc)
    if config.policy == "random":
        return _run_random(sim)
    check_feasibility(config.graph, sim.S)
    return _run_smile(sim)
