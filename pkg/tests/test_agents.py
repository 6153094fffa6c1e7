"""Inner search mechanics, the three agents, and the exhaustive oracle."""

import itertools

import numpy as np
import pytest

from ranpower.agents import (
    DqnAgent,
    QLearningAgent,
    SleepAgent,
    _check_accepted,
    _inner_search,
    exhaustive_oracle,
)
from ranpower.errors import InvalidConfig, InvariantViolation, SearchSpaceTooLarge
from ranpower.rl import Hyperparams, state_bin, tabular_q_update
from ranpower.scenario import StepEval

from conftest import make_scenario


@pytest.fixture
def loaded_ctx(three_site, radio_params):
    """Three active stations, every user holding 1e5 pending bits."""
    scn = make_scenario(three_site, radio_params, seed=11)
    scn.residual_bits[:] = 1e5
    scn.arrival_step[:] = 0
    return scn.build_step(volume_scale_bits=2e5)


class InfeasibleCtx:
    """Duck-typed step on which only the full-power assignment is feasible."""

    def __init__(self, n_sites=2, n_levels=3):
        self.n_sites = n_sites
        self.n_levels = n_levels
        self.active_sites = np.arange(n_sites)
        self.any_active = True
        self.features = np.full((n_sites, 2), 0.5)

    def evaluate(self, power_idx):
        power_idx = np.asarray(power_idx, dtype=int)
        full = bool(np.all(power_idx == self.n_levels - 1))
        return StepEval(
            power_idx=power_idx,
            power_dbw=np.full(self.n_sites, 15.2),
            user_rates_bps=np.zeros(self.n_sites),
            rate_bps=np.full(self.n_sites, 1e6),
            power_delta_db=np.zeros(self.n_sites),
            rate_delta_bps=np.zeros(self.n_sites),
            rate_delta_sum=0.0 if full else -1.0,
            link_ee=np.full(self.n_sites, 0.25),
            network_ee=0.25,
        )

    def next_features(self, ev):
        return self.features


def test_search_greedy_tie_keeps_earliest_iteration(loaded_ctx):
    """With no exploration every draw repeats, so iteration 1 must win."""
    qrows = np.zeros((3, loaded_ctx.n_levels))
    records = []
    ev, n_star, _ = _inner_search(loaded_ctx, qrows, 10, 0.0, np.random.default_rng(0), records)
    assert n_star == 1
    assert len(records) == 10
    assert all(r.feasible for r in records)
    assert np.array_equal(ev.power_idx, np.zeros(3, dtype=int))


def test_search_accepts_highest_scoring_feasible_candidate(loaded_ctx):
    qrows = np.random.default_rng(3).normal(size=(3, loaded_ctx.n_levels))
    records = []
    ev, n_star, score = _inner_search(
        loaded_ctx, qrows, 40, 0.5, np.random.default_rng(7), records
    )
    feasible = [r for r in records if r.feasible]
    assert feasible, "the draw should hit at least one feasible candidate"
    best = max(r.score for r in feasible)
    assert score == pytest.approx(best, rel=1e-12)
    accepted = records[n_star - 1]
    assert accepted.feasible
    assert accepted.score == pytest.approx(best, rel=1e-12)
    assert np.array_equal(ev.power_idx, accepted.power_idx)
    earlier = [r for r in feasible if r.score >= best - 1e-15]
    assert n_star == earlier[0].index


def test_search_rejects_higher_scoring_infeasible_candidates(loaded_ctx):
    """The greedy draw (0, 1, 0) is infeasible here and scores highest; the
    accepted candidate must come from the feasible exploration draws."""
    qrows = np.zeros((3, loaded_ctx.n_levels))
    qrows[0, 0] = qrows[1, 1] = qrows[2, 0] = 5.0
    assert loaded_ctx.evaluate(np.array([0, 1, 0])).rate_delta_sum < 0.0
    records = []
    ev, n_star, score = _inner_search(
        loaded_ctx, qrows, 60, 0.5, np.random.default_rng(1), records
    )
    assert ev is not None
    assert ev.rate_delta_sum >= 0.0
    assert any(not r.feasible and r.score > score for r in records)


def test_search_returns_none_when_nothing_is_feasible(loaded_ctx):
    """Pin the greedy draw to an infeasible assignment and disable exploration."""
    qrows = np.zeros((3, loaded_ctx.n_levels))
    qrows[0, 0] = qrows[1, 1] = qrows[2, 0] = 5.0
    ev, n_star, _ = _inner_search(loaded_ctx, qrows, 8, 0.0, np.random.default_rng(0))
    assert ev is None
    assert n_star is None


def test_check_accepted_raises_on_negative_delta_sum(loaded_ctx):
    ev = loaded_ctx.evaluate(np.array([0, 1, 0]))
    with pytest.raises(InvariantViolation):
        _check_accepted(ev)


def greedy_hyper(**kw):
    return Hyperparams(epsilon=0.0, **kw)


def test_dqn_fresh_network_picks_lowest_level_everywhere(loaded_ctx):
    agent = DqnAgent(loaded_ctx.n_levels, greedy_hyper(), np.random.default_rng(0))
    out = agent.run_episode(
        loaded_ctx, np.random.default_rng(1), np.random.default_rng(2), episode=1
    )
    assert out.feasible
    assert np.array_equal(out.ev.power_idx, np.zeros(3, dtype=int))
    assert out.accepted_iteration == 1
    assert out.reward == pytest.approx(out.ev.network_ee, rel=1e-12)


def test_dqn_pushes_one_transition_per_active_station(loaded_ctx):
    agent = DqnAgent(loaded_ctx.n_levels, greedy_hyper(), np.random.default_rng(0))
    out = agent.run_episode(
        loaded_ctx, np.random.default_rng(1), np.random.default_rng(2), episode=1
    )
    assert len(agent.memory) == loaded_ctx.active_sites.size
    nxt = loaded_ctx.next_features(out.ev)
    for b, tr in zip(loaded_ctx.active_sites, agent.memory._buf):
        assert tr.r == pytest.approx(out.reward, rel=1e-12)
        assert tr.a == int(out.ev.power_idx[b])
        assert np.array_equal(tr.s, loaded_ctx.features[b])
        assert np.allclose(tr.s_next, nxt[b])


def test_dqn_terminal_step_stores_no_next_state(loaded_ctx):
    agent = DqnAgent(loaded_ctx.n_levels, greedy_hyper(), np.random.default_rng(0))
    agent.run_episode(
        loaded_ctx, np.random.default_rng(1), np.random.default_rng(2),
        episode=1, terminal=True,
    )
    assert all(tr.s_next is None for tr in agent.memory._buf)


def test_dqn_fallback_keeps_full_power_and_pushes_nothing():
    ctx = InfeasibleCtx()
    agent = DqnAgent(ctx.n_levels, greedy_hyper(), np.random.default_rng(0))
    out = agent.run_episode(
        ctx, np.random.default_rng(1), np.random.default_rng(2), episode=1
    )
    assert not out.feasible
    assert out.accepted_iteration is None
    assert np.array_equal(out.ev.power_idx, np.full(2, ctx.n_levels - 1))
    assert out.reward == pytest.approx(out.ev.network_ee, rel=1e-12)
    assert len(agent.memory) == 0


def test_dqn_all_idle_step_is_inert(three_site, radio_params):
    scn = make_scenario(three_site, radio_params, seed=11)
    ctx = scn.build_step(volume_scale_bits=2e5)
    assert not ctx.any_active
    agent = DqnAgent(ctx.n_levels, greedy_hyper(), np.random.default_rng(0))
    out = agent.run_episode(
        ctx, np.random.default_rng(1), np.random.default_rng(2), episode=1
    )
    assert out.all_sleep
    assert out.reward == 0.0
    assert out.accepted_iteration is None
    assert len(agent.memory) == 0


def test_dqn_trains_on_interval_once_replay_is_deep_enough(loaded_ctx):
    hyper = greedy_hyper(minibatch_size=4, train_interval=2, sync_interval=1)
    agent = DqnAgent(loaded_ctx.n_levels, hyper, np.random.default_rng(0))
    explore, replay = np.random.default_rng(1), np.random.default_rng(2)

    agent.run_episode(loaded_ctx, explore, replay, episode=2)
    assert agent.training_rounds == 0, "replay must hold more than one minibatch"

    agent.run_episode(loaded_ctx, explore, replay, episode=3)
    assert agent.training_rounds == 0, "episode 3 is off the training interval"

    agent.run_episode(loaded_ctx, explore, replay, episode=4)
    assert agent.training_rounds == 1
    for w_pred, w_tgt in zip(agent.predicted.weights, agent.target.weights):
        assert np.array_equal(w_pred, w_tgt), "sync interval 1 copies every round"


def test_dqn_target_lags_until_sync_round(loaded_ctx):
    hyper = Hyperparams(
        epsilon=0.2, minibatch_size=2, train_interval=1, sync_interval=10
    )
    agent = DqnAgent(loaded_ctx.n_levels, hyper, np.random.default_rng(0))
    before = [w.copy() for w in agent.target.weights]
    explore, replay = np.random.default_rng(1), np.random.default_rng(2)
    for episode in range(1, 4):
        agent.run_episode(loaded_ctx, explore, replay, episode=episode)
    assert agent.training_rounds >= 1
    for w_now, w_then in zip(agent.target.weights, before):
        assert np.array_equal(w_now, w_then)


def test_ql_fresh_table_picks_lowest_level_everywhere(loaded_ctx):
    agent = QLearningAgent(loaded_ctx.n_levels, greedy_hyper())
    out = agent.run_episode(loaded_ctx, np.random.default_rng(1), episode=0)
    assert out.feasible
    assert np.array_equal(out.ev.power_idx, np.zeros(3, dtype=int))
    assert out.accepted_iteration == 1


def test_ql_update_matches_replayed_rule(loaded_ctx):
    """The agent must apply the one-step update per active station in station
    order, including the case where stations share a bin."""
    agent = QLearningAgent(loaded_ctx.n_levels, greedy_hyper())
    out = agent.run_episode(loaded_ctx, np.random.default_rng(1), episode=0)

    expected = np.zeros_like(agent.table)
    nxt = loaded_ctx.next_features(out.ev)
    for b in loaded_ctx.active_sites:
        tabular_q_update(
            expected,
            state_bin(loaded_ctx.features[b], agent.n_bins),
            int(out.ev.power_idx[b]),
            out.reward,
            state_bin(nxt[b], agent.n_bins),
            agent.hyper.discount,
            agent.alpha,
        )
    assert np.array_equal(agent.table, expected)
    assert np.count_nonzero(agent.table) > 0


def test_ql_terminal_update_drops_bootstrap(loaded_ctx):
    agent = QLearningAgent(loaded_ctx.n_levels, greedy_hyper())
    out = agent.run_episode(loaded_ctx, np.random.default_rng(1), terminal=True)
    bins = state_bin(loaded_ctx.features[0], agent.n_bins)
    # three stations share this bin, each folding in alpha * reward
    a = agent.alpha
    expected = 0.0
    for _ in range(3):
        expected += a * (out.reward - expected)
    assert agent.table[bins][0] == pytest.approx(expected, rel=1e-12)


def test_ql_fallback_leaves_table_unchanged():
    ctx = InfeasibleCtx()
    agent = QLearningAgent(ctx.n_levels, greedy_hyper())
    out = agent.run_episode(ctx, np.random.default_rng(1))
    assert not out.feasible
    assert out.accepted_iteration is None
    assert np.count_nonzero(agent.table) == 0


def test_sleep_agent_full_power_for_active_zero_iterations(loaded_ctx):
    out = SleepAgent().run_episode(loaded_ctx)
    assert out.feasible
    assert out.accepted_iteration == 0
    assert np.array_equal(
        out.ev.power_idx, np.full(3, loaded_ctx.n_levels - 1)
    )
    assert out.reward == pytest.approx(out.ev.network_ee, rel=1e-12)
    assert out.ev.rate_delta_sum == 0.0


def test_sleep_agent_all_idle(three_site, radio_params):
    scn = make_scenario(three_site, radio_params, seed=11)
    ctx = scn.build_step(volume_scale_bits=2e5)
    out = SleepAgent().run_episode(ctx)
    assert out.all_sleep
    assert out.reward == 0.0
    assert out.accepted_iteration is None


def test_agents_never_accept_negative_delta_sums(loaded_ctx):
    """Both learners, run with heavy exploration, only ever accept feasible
    assignments even though infeasible ones are drawn along the way."""
    hyper = Hyperparams(epsilon=0.5)
    dqn = DqnAgent(loaded_ctx.n_levels, hyper, np.random.default_rng(0))
    ql = QLearningAgent(loaded_ctx.n_levels, hyper)
    explore, replay = np.random.default_rng(1), np.random.default_rng(2)
    saw_infeasible_draw = False
    for episode in range(30):
        for agent in (dqn, ql):
            records = []
            if isinstance(agent, DqnAgent):
                out = agent.run_episode(loaded_ctx, explore, replay, episode, collect=records)
            else:
                out = agent.run_episode(loaded_ctx, explore, episode, collect=records)
            saw_infeasible_draw |= any(not r.feasible for r in records)
            if out.feasible:
                assert out.ev.rate_delta_sum >= 0.0
    assert saw_infeasible_draw
    for tr in dqn.memory._buf:
        assert tr.r >= 0.0


def test_agent_constructor_validation():
    with pytest.raises(InvalidConfig):
        DqnAgent(4, Hyperparams(), np.random.default_rng(0), n_iterations=0)
    with pytest.raises(InvalidConfig):
        QLearningAgent(4, Hyperparams(), n_bins=1)
    with pytest.raises(InvalidConfig):
        QLearningAgent(4, Hyperparams(), alpha=1.5)


def test_exhaustive_oracle_matches_hand_enumeration(loaded_ctx):
    idx, ee = exhaustive_oracle(loaded_ctx)

    best_idx, best_ee = None, -np.inf
    for combo in itertools.product(range(loaded_ctx.n_levels), repeat=3):
        ev = loaded_ctx.evaluate(np.asarray(combo, dtype=int))
        if ev.rate_delta_sum >= 0.0 and ev.network_ee > best_ee:
            best_idx, best_ee = np.asarray(combo, dtype=int), ev.network_ee
    assert np.array_equal(idx, best_idx)
    assert ee == pytest.approx(best_ee, rel=1e-12)


def test_exhaustive_oracle_beats_or_ties_every_feasible_assignment(loaded_ctx):
    _, ee = exhaustive_oracle(loaded_ctx)
    for combo in itertools.product(range(loaded_ctx.n_levels), repeat=3):
        ev = loaded_ctx.evaluate(np.asarray(combo, dtype=int))
        if ev.rate_delta_sum >= 0.0:
            assert ee >= ev.network_ee - 1e-12


def test_exhaustive_oracle_respects_node_cap(loaded_ctx):
    with pytest.raises(SearchSpaceTooLarge):
        exhaustive_oracle(loaded_ctx, max_nodes=63)


def test_exhaustive_oracle_all_idle(three_site, radio_params):
    scn = make_scenario(three_site, radio_params, seed=11)
    ctx = scn.build_step(volume_scale_bits=2e5)
    idx, ee = exhaustive_oracle(ctx)
    assert np.array_equal(idx, np.full(3, ctx.n_levels - 1))
    assert ee == 0.0
