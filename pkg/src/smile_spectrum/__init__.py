"""Distributed learning of stable channel allocations over interference graphs
with restless Markov channels (SMILE), plus the genie solver and regret tools."""

__version__ = "0.1.0"

from .agent import Agent, AgentParams, Phase
from .channel import (
    ChainBank,
    ChainState,
    ChannelMatrix,
    ChannelModel,
    build_gilbert_elliott,
    build_scaled_fsmc,
    mean_hitting_times,
    paper_rayleigh6,
    stationary_distribution,
    step_chain,
    validate_model,
)
from .engine import EngineConfig, SimulationResult, resolve_slot, run, run_allocation_protocol
from .matching import Allocation, enumerate_stable, is_stable, solve_stable
from .metrics import (
    RegretTrace,
    SystemConstants,
    aggregate,
    compute_constants,
    regret_from_outcomes,
    theorem1_bound,
    true_exploration_coefficients,
)
from .topology import InterferenceGraph, build_graph, check_feasibility, random_graph
