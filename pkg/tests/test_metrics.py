import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import PAPER_MEANS
from oracles import kappa_by_hand, sampling_constant_by_hand, second_modulus
from smile_spectrum.agent import Agent, AgentParams
from smile_spectrum.channel import ChannelMatrix, build_gilbert_elliott, paper_rayleigh6
from smile_spectrum.engine import EngineConfig, run
from smile_spectrum.errors import DegenerateGaps, EpsilonNonpositive, LengthMismatch
from smile_spectrum.matching import Allocation, solve_stable
from smile_spectrum.metrics import (
    RegretTrace,
    aggregate,
    compute_constants,
    delta_min,
    kappa_formula,
    regret_from_outcomes,
    sampling_constant_formula,
    second_eigenvalue,
    theorem1_bound,
    true_exploration_coefficients,
)
from smile_spectrum.topology import build_graph


# -- constants ---------------------------------------------------------------------

def test_kappa_arithmetic():
    assert kappa_formula(2, 1.0, 0.9, 0.5) == pytest.approx(181.44)
    assert kappa_by_hand(2, 1.0, 0.9, 0.5) == pytest.approx(181.44)


def test_sampling_constant_arithmetic():
    assert sampling_constant_formula(1.0, 1.0, 181.44) == pytest.approx(8.931e-5, rel=1e-3)
    assert sampling_constant_formula(1.0, 1.0, 181.44) == pytest.approx(7 / (48 * 9 * 181.44))


def test_rank_one_chain_has_no_second_eigenvalue():
    m = build_gilbert_elliott(0.5, 0.5, 10)
    assert second_eigenvalue(m.transition) == pytest.approx(0, abs=1e-12)
    c = compute_constants(ChannelMatrix.from_grid([[m]]), 1.0)
    assert c.lambda_bar_min == pytest.approx(1.0)


def test_paper_constants(paper_channels):
    c = compute_constants(paper_channels, 1.0)
    pi = np.array([6, 8, 9, 9, 8, 6]) / 46
    assert c.pi_min == pytest.approx(6 / 46)
    assert c.pi_hat_max == pytest.approx(1 - 6 / 46)
    assert c.c_max == 6
    top = paper_rayleigh6(90)
    assert c.r_max == pytest.approx(top.states.max())
    assert c.rbar_max == pytest.approx(top.states.sum())
    assert c.q_max == pytest.approx(top.states.sum() / pi.min())
    assert c.lambda_max == pytest.approx(second_modulus(top.transition), abs=1e-12)
    assert c.lambda_bar_min == pytest.approx(1 - c.lambda_max)
    assert c.kappa == pytest.approx(kappa_by_hand(6, c.rbar_max, c.pi_hat_max, c.lambda_bar_min))
    assert c.sampling_constant == pytest.approx(sampling_constant_by_hand(1.0, c.rbar_max, c.kappa))
    assert c.kappa_from_formula and c.sampling_constant_from_formula
    assert np.all(c.hitting_max > 0)


def test_constants_overrides(paper_channels):
    c = compute_constants(paper_channels, 0.0, kappa=800, sampling_constant=1.0)
    assert (c.kappa, c.sampling_constant) == (800, 1.0)
    assert not c.kappa_from_formula
    d = c.to_dict()
    assert d["kappa"] == 800 and isinstance(d["lambdas"], list)


def test_epsilon_must_be_positive(paper_channels):
    with pytest.raises(EpsilonNonpositive):
        compute_constants(paper_channels, 0.0)


# -- regret ------------------------------------------------------------------------

def test_regret_additivity(paper_channels, paper_graph):
    oracle, _ = solve_stable(paper_channels.means, paper_graph)
    params = AgentParams(800, 1.0, 50)
    res = run(EngineConfig(paper_channels, paper_graph, 5000, params, seed=3))
    tr = regret_from_outcomes(res, oracle, paper_channels.means)
    t = np.arange(1, 5001)
    value = oracle.value(paper_channels.means)
    assert np.array_equal(tr.regret, t * value - np.cumsum(res.realized.sum(axis=1)))
    from_stream = regret_from_outcomes(res.outcomes(), oracle, paper_channels.means)
    np.testing.assert_array_equal(from_stream.regret, tr.regret)
    assert tr.at(0) == 0 and tr.at(5000) == tr.regret[-1]


def test_regret_length_mismatch(paper_channels):
    with pytest.raises(LengthMismatch):
        regret_from_outcomes(np.zeros(10), Allocation((0, 1)), paper_channels.means)


def test_oracle_regret_zero_in_expectation(paper_channels, paper_graph):
    oracle, _ = solve_stable(paper_channels.means, paper_graph)
    finals = []
    for seed in range(10_000):
        res = run(EngineConfig(paper_channels, paper_graph, 50, policy="oracle", seed=seed, record_cells=False))
        finals.append(regret_from_outcomes(res, oracle, paper_channels.means).regret[-1])
    finals = np.array(finals)
    assert abs(finals.mean()) <= 3 * finals.std(ddof=1) / math.sqrt(len(finals))


def test_random_regret_slope(paper_channels, paper_graph):
    # cell 3 is alone: mean of its row; cells 1 and 2 avoid each other 4/5 of the time
    expected = PAPER_MEANS[2].mean() + 0.8 * (PAPER_MEANS[0].mean() + PAPER_MEANS[1].mean())
    assert expected == pytest.approx(110.8)
    oracle, _ = solve_stable(paper_channels.means, paper_graph)
    res = run(EngineConfig(paper_channels, paper_graph, 400_000, policy="random", seed=0, record_cells=False))
    tr = regret_from_outcomes(res, oracle, paper_channels.means)
    slope = tr.regret[-1] / tr.horizon
    assert slope == pytest.approx(205 - expected, rel=0.02)


def test_zero_rate_channels_have_zero_regret():
    grid = ChannelMatrix.from_grid([[build_gilbert_elliott(0.9, 0.8, 0.0)] * 2] * 2)
    g = build_graph(2, [(0, 1)])
    oracle, _ = solve_stable(grid.means, g)
    for policy in ("oracle", "random"):
        res = run(EngineConfig(grid, g, 1000, policy=policy, seed=1, record_cells=False))
        assert np.all(regret_from_outcomes(res, oracle, grid.means).regret == 0)


def test_aggregate_stride_and_stderr():
    a = RegretTrace(np.cumsum([1.0, 2.0, 3.0, 4.0, 5.0]), 3.0, 0)
    b = RegretTrace(np.cumsum([3.0, 2.0, 1.0, 0.0, 5.0]), 3.0, 1)
    agg = aggregate([a, b], stride=2)
    assert agg.t.tolist() == [2, 4, 5]
    np.testing.assert_allclose(agg.mean_regret, [(3 + 1) / 2, (2 + 6) / 2, (0 + 4) / 2])
    np.testing.assert_allclose(agg.mean_sum_rate, [2.0, 2.0, 5.0])
    np.testing.assert_allclose(agg.stderr, np.std([[3, 2, 0], [1, 6, 4]], axis=0, ddof=1) / math.sqrt(2))
    with pytest.raises(LengthMismatch):
        aggregate([a, RegretTrace(np.zeros(3), 1.0)])


# -- coefficients and gaps ---------------------------------------------------------------

def test_true_row_coefficients_simple():
    tc = true_exploration_coefficients([[10.0, 20.0]], build_graph(1, []), 1.0)
    np.testing.assert_allclose(tc.row, [[0.04, 0.04]])
    np.testing.assert_array_equal(tc.combined, tc.row)


def test_true_coefficients_empty_registries_equal_row(paper_graph):
    empty = [[() for _ in range(5)] for _ in range(3)]
    tc = true_exploration_coefficients(PAPER_MEANS, paper_graph, 2.0, registries=empty)
    assert np.all(tc.column == 0)
    np.testing.assert_array_equal(tc.combined, tc.row)


def test_true_coefficients_duplicates_rejected():
    with pytest.raises(DegenerateGaps):
        true_exploration_coefficients([[5.0, 5.0]], build_graph(1, []), 1.0)


def test_delta_min_paper(paper_graph):
    assert delta_min(PAPER_MEANS, paper_graph) == 10


def test_delta_min_ignores_empty_registries(paper_graph):
    empty = [[() for _ in range(5)] for _ in range(3)]
    means = PAPER_MEANS.copy()
    means[1, 2] = 35.5  # close to cell 1 on channel 3, which only matters if registered
    assert delta_min(means, paper_graph, registries=empty) == 5.5
    assert delta_min(means, paper_graph) == 0.5


def _agent_coefficients(est, graph, params):
    """Estimated coefficients with every neighbor registered on every channel."""
    L, S = est.shape
    out = np.zeros((L, S))
    for c in range(L):
        a = Agent(c, S, graph.neighbors[c], params)
        a.estimates[:] = est[c]
        a.ee_samples[:] = 1
        for q in graph.neighbors[c]:
            for s in range(S):
                a.record_collision(s, q, est[q, s])
        out[c] = a.coefficients().combined
    return out


@given(arrays_seed=st.integers(0, 2**32 - 1), frac=st.floats(0.0, 0.49))
def test_sandwich_with_epsilon_slack(paper_graph, arrays_seed, frac):
    # estimates within eta of the truth keep the ordering when eta < dmin / 2;
    # with epsilon >= 4 g eta + 4 eta^2 the estimated coefficient sits between
    # the true one and the bound's inflated 4 kappa / (gap^2 - 2 epsilon)
    rng = np.random.default_rng(arrays_seed)
    dmin = delta_min(PAPER_MEANS, paper_graph)
    eta = frac * dmin / 2
    est = PAPER_MEANS + rng.uniform(-eta, eta, PAPER_MEANS.shape)
    g_max = PAPER_MEANS.max() - PAPER_MEANS.min()
    eps = 4 * g_max * eta + 4 * eta**2
    kappa = 3.0
    params = AgentParams(kappa, 1.0, delta_sq=1e-9, epsilon=eps)
    est_coef = _agent_coefficients(est, paper_graph, params)
    true = true_exploration_coefficients(PAPER_MEANS, paper_graph, kappa).combined
    assert np.all(est_coef >= true * (1 - 1e-12))

    tc = true_exploration_coefficients(PAPER_MEANS, paper_graph, 1.0)
    gap2 = 4.0 / tc.combined  # smallest relevant squared gap per pair
    ok = gap2 - 2 * eps > 0
    upper = 4 * kappa / (gap2 - 2 * eps)
    assert np.all(est_coef[ok] <= upper[ok] * (1 + 1e-12))


def test_sandwich_fails_without_slack(paper_graph):
    # pushing two estimates apart shrinks the estimated coefficient below the true one
    est = PAPER_MEANS.copy()
    est[0, 1] -= 1.0  # cell 1: 10 -> 9, widening its gap to channel 4 (25)
    params = AgentParams(1.0, 1.0, delta_sq=1e-9, epsilon=0.0)
    est_coef = _agent_coefficients(est, paper_graph, params)
    true = true_exploration_coefficients(PAPER_MEANS, paper_graph, 1.0).combined
    assert est_coef[0, 1] < true[0, 1]


# -- bound ---------------------------------------------------------------------------

def test_bound_single_pair_by_hand():
    m = paper_rayleigh6(10)
    ch = ChannelMatrix.from_grid([[m]])
    g = build_graph(1, [])
    c = compute_constants(ch, 1.0)
    oracle, _ = solve_stable(ch.means, g)
    b = theorem1_bound(c, ch, g, oracle, 2)

    budget = 2 / c.sampling_constant
    K = math.floor(math.log(3 * budget * math.log(2) + 1, 4)) + 1
    Q = m.states.sum() / m.stationary.min()
    assert b.exploration_transient == pytest.approx(Q * K)
    assert b.exploration_suboptimality == 0
    assert b.allocation_transient == pytest.approx(2 * Q * K)
    assert b.allocation_suboptimality == pytest.approx(2 * K * 10)
    epochs = math.ceil(math.log(1.5 * 2 + 1, 4))
    assert b.exploitation == pytest.approx((Q + 4 * 6 / m.stationary.min() * 10) * epochs)
    assert b.big_o_reported == 0 and "O(1)" in b.caveat
    assert b.total == pytest.approx(sum([Q * K, 0, 2 * Q * K, 2 * K * 10, b.exploitation]))


@given(st.integers(2, 10**9), st.integers(2, 10**9))
def test_bound_nondecreasing(paper_channels, paper_graph, t1, t2):
    c = compute_constants(paper_channels, 1.0, kappa=800, sampling_constant=1.0)
    oracle, _ = solve_stable(paper_channels.means, paper_graph)
    lo, hi = sorted((t1, t2))
    b_lo = theorem1_bound(c, paper_channels, paper_graph, oracle, lo)
    b_hi = theorem1_bound(c, paper_channels, paper_graph, oracle, hi)
    assert b_lo.total <= b_hi.total


def test_bound_rejects_small_t(paper_channels, paper_graph):
    c = compute_constants(paper_channels, 1.0)
    oracle, _ = solve_stable(paper_channels.means, paper_graph)
    with pytest.raises(ValueError):
        theorem1_bound(c, paper_channels, paper_graph, oracle, 1)
