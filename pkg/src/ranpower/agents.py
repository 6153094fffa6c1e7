"""Power-control agents and the exhaustive search oracle.

All learning agents share the same inner loop on a frozen step: draw a joint
power assignment for the active stations (epsilon-greedy per station), rate
it jointly so every station's SINR reflects the others' draws, flag it
feasible when the summed rate deltas stay non-negative, and finally accept
the feasible candidate whose summed action values are largest.  Only the
accepted candidate touches the environment or the learners.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig, InvariantViolation, SearchSpaceTooLarge
from .rl import (
    Hyperparams,
    QNetwork,
    ReplayMemory,
    Transition,
    backward_and_step,
    epsilon_greedy,
    minibatch_targets,
    state_bin,
    sync_target,
    tabular_q_update,
)
from .scenario import StepContext, StepEval

MAX_ORACLE_NODES = 1_000_000


@dataclass(frozen=True, eq=False)
class IterationRecord:
    """One candidate draw of the inner search."""

    index: int
    power_idx: np.ndarray
    score: float
    rate_delta_sum: float
    feasible: bool


@dataclass(frozen=True, eq=False)
class EpisodeOutcome:
    """What one step produced: the executed assignment and its bookkeeping.

    ``accepted_iteration`` is the 1-based index of the accepted candidate,
    ``None`` when no candidate was feasible (the full-power fallback ran) or
    when no search took place.  ``feasible`` mirrors the step's success flag.
    """

    ev: StepEval
    reward: float
    feasible: bool
    accepted_iteration: int | None
    all_sleep: bool = False


def _inner_search(
    ctx: StepContext,
    qrows: np.ndarray,
    n_iterations: int,
    epsilon: float,
    rng: np.random.Generator,
    collect: list[IterationRecord] | None = None,
) -> tuple[StepEval | None, int | None, float]:
    """Run the candidate loop; returns (best eval, its 1-based index, score).

    Ties on the score keep the earliest feasible candidate, which is also
    what makes the recorded iteration count meaningful as a search cost.
    """
    sleep_idx = ctx.n_levels - 1
    best_ev: StepEval | None = None
    best_n: int | None = None
    best_score = -np.inf
    for n in range(1, n_iterations + 1):
        idx = np.full(ctx.n_sites, sleep_idx, dtype=int)
        score = 0.0
        for b in ctx.active_sites:
            a = epsilon_greedy(qrows[b], epsilon, rng)
            idx[b] = a
            score += float(qrows[b, a])
        ev = ctx.evaluate(idx)
        feasible = ev.rate_delta_sum >= 0.0
        if collect is not None:
            collect.append(IterationRecord(n, idx, score, ev.rate_delta_sum, feasible))
        if feasible and score > best_score:
            best_ev, best_n, best_score = ev, n, score
    return best_ev, best_n, best_score


def _fallback_full_power(ctx: StepContext) -> StepEval:
    """Defensive path when no candidate was feasible: keep everyone at max."""
    return ctx.evaluate(np.full(ctx.n_sites, ctx.n_levels - 1, dtype=int))


def _check_accepted(ev: StepEval) -> None:
    if ev.rate_delta_sum < 0.0:
        raise InvariantViolation(
            f"accepted an assignment with rate delta sum {ev.rate_delta_sum}"
        )


class DqnAgent:
    """Deep Q-learning over the shared per-station network with replay.

    The same predicted network scores every station's actions; accepted
    decisions are pushed to replay per station with the shared network-wide
    efficiency as the reward.  Every ``train_interval`` steps (once replay
    holds strictly more than one minibatch) a single gradient-descent round
    runs, and every ``sync_interval`` rounds the target network catches up.
    """

    def __init__(
        self,
        n_actions: int,
        hyper: Hyperparams,
        rng_init: np.random.Generator,
        hidden_sizes: tuple[int, ...] = (64, 64),
        replay_capacity: int = 5000,
        n_iterations: int = 100,
    ) -> None:
        if n_iterations < 1:
            raise InvalidConfig("the inner search needs at least one iteration")
        sizes = (2, *hidden_sizes, n_actions)
        self.predicted = QNetwork.create(sizes, rng_init)
        self.target = self.predicted.clone()
        self.memory = ReplayMemory(replay_capacity)
        self.hyper = hyper
        self.n_iterations = n_iterations
        self.training_rounds = 0

    def run_episode(
        self,
        ctx: StepContext,
        rng_explore: np.random.Generator,
        rng_replay: np.random.Generator,
        episode: int,
        terminal: bool = False,
        collect: list[IterationRecord] | None = None,
    ) -> EpisodeOutcome:
        outcome = self._act(ctx, rng_explore, terminal, collect)
        self._maybe_train(episode, rng_replay)
        return outcome

    def _act(
        self,
        ctx: StepContext,
        rng: np.random.Generator,
        terminal: bool,
        collect: list[IterationRecord] | None,
    ) -> EpisodeOutcome:
        if not ctx.any_active:
            return EpisodeOutcome(
                ev=_fallback_full_power(ctx),
                reward=0.0,
                feasible=False,
                accepted_iteration=None,
                all_sleep=True,
            )
        qrows = self.predicted.forward_batch(ctx.features)
        ev, n_star, _ = _inner_search(
            ctx, qrows, self.n_iterations, self.hyper.epsilon, rng, collect
        )
        if ev is None:
            fallback = _fallback_full_power(ctx)
            return EpisodeOutcome(
                ev=fallback,
                reward=fallback.network_ee,
                feasible=False,
                accepted_iteration=None,
            )
        _check_accepted(ev)
        reward = ev.network_ee
        nxt = None if terminal else ctx.next_features(ev)
        for b in ctx.active_sites:
            self.memory.push(
                Transition(
                    s=ctx.features[b].copy(),
                    a=int(ev.power_idx[b]),
                    r=reward,
                    s_next=None if nxt is None else nxt[b].copy(),
                )
            )
        return EpisodeOutcome(
            ev=ev, reward=reward, feasible=True, accepted_iteration=n_star
        )

    def _maybe_train(self, episode: int, rng: np.random.Generator) -> None:
        h = self.hyper
        due = episode > 0 and episode % h.train_interval == 0
        if not due or len(self.memory) <= h.minibatch_size:
            return
        batch = self.memory.sample_minibatch(h.minibatch_size, rng)
        targets = minibatch_targets(batch, self.target, h.discount)
        backward_and_step(self.predicted, batch, targets, h.learning_rate)
        self.training_rounds += 1
        if self.training_rounds % h.sync_interval == 0:
            sync_target(self.predicted, self.target)


class QLearningAgent:
    """Tabular baseline: same inner search, but values live in a binned table
    and every accepted decision updates the table online."""

    def __init__(
        self,
        n_actions: int,
        hyper: Hyperparams,
        n_bins: int = 16,
        alpha: float = 0.1,
        n_iterations: int = 100,
    ) -> None:
        if n_bins < 2:
            raise InvalidConfig(f"bin count {n_bins} must be at least 2")
        if not 0.0 <= alpha <= 1.0:
            raise InvalidConfig(f"step size {alpha} must lie in [0, 1]")
        self.table = np.zeros((n_bins, n_bins, n_actions))
        self.n_bins = n_bins
        self.alpha = alpha
        self.hyper = hyper
        self.n_iterations = n_iterations

    def run_episode(
        self,
        ctx: StepContext,
        rng_explore: np.random.Generator,
        episode: int = 0,
        terminal: bool = False,
        collect: list[IterationRecord] | None = None,
    ) -> EpisodeOutcome:
        if not ctx.any_active:
            return EpisodeOutcome(
                ev=_fallback_full_power(ctx),
                reward=0.0,
                feasible=False,
                accepted_iteration=None,
                all_sleep=True,
            )
        bins = [state_bin(ctx.features[b], self.n_bins) for b in range(ctx.n_sites)]
        qrows = np.stack([self.table[bins[b]] for b in range(ctx.n_sites)])
        ev, n_star, _ = _inner_search(
            ctx, qrows, self.n_iterations, self.hyper.epsilon, rng_explore, collect
        )
        if ev is None:
            fallback = _fallback_full_power(ctx)
            return EpisodeOutcome(
                ev=fallback,
                reward=fallback.network_ee,
                feasible=False,
                accepted_iteration=None,
            )
        _check_accepted(ev)
        reward = ev.network_ee
        nxt = None if terminal else ctx.next_features(ev)
        for b in ctx.active_sites:
            tabular_q_update(
                self.table,
                bins[b],
                int(ev.power_idx[b]),
                reward,
                None if nxt is None else state_bin(nxt[b], self.n_bins),
                self.hyper.discount,
                self.alpha,
            )
        return EpisodeOutcome(
            ev=ev, reward=reward, feasible=True, accepted_iteration=n_star
        )


class SleepAgent:
    """Non-learning reference: pending traffic means full power, idle means
    sleep.  No search runs, so the accepted-iteration count is recorded as 0."""

    def run_episode(self, ctx: StepContext, **_: object) -> EpisodeOutcome:
        ev = _fallback_full_power(ctx)
        if not ctx.any_active:
            return EpisodeOutcome(
                ev=ev, reward=0.0, feasible=False, accepted_iteration=None,
                all_sleep=True,
            )
        _check_accepted(ev)
        return EpisodeOutcome(
            ev=ev, reward=ev.network_ee, feasible=True, accepted_iteration=0
        )


def exhaustive_oracle(
    ctx: StepContext, max_nodes: int = MAX_ORACLE_NODES
) -> tuple[np.ndarray, float]:
    """Enumerate every joint assignment over the active stations and return
    the feasible one with the highest network efficiency.

    Ties resolve to the lexicographically smallest index vector.  The
    full-power assignment has zero rate deltas by construction, so the
    feasible set is never empty.  Raises ``SearchSpaceTooLarge`` when the
    enumeration would exceed ``max_nodes`` assignments.
    """
    active = ctx.active_sites
    if active.size == 0:
        full = np.full(ctx.n_sites, ctx.n_levels - 1, dtype=int)
        return full, 0.0
    n_nodes = ctx.n_levels ** active.size
    if n_nodes > max_nodes:
        raise SearchSpaceTooLarge(
            f"{n_nodes} joint assignments exceed the {max_nodes} cap"
        )
    best_idx: np.ndarray | None = None
    best_ee = -np.inf
    idx = np.full(ctx.n_sites, ctx.n_levels - 1, dtype=int)
    for combo in itertools.product(range(ctx.n_levels), repeat=active.size):
        idx[active] = combo
        ev = ctx.evaluate(idx)
        if ev.rate_delta_sum >= 0.0 and ev.network_ee > best_ee:
            best_idx = idx.copy()
            best_ee = ev.network_ee
    if best_idx is None:
        raise InvariantViolation("the full-power assignment should be feasible")
    return best_idx, float(best_ee)
