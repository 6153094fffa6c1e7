"""Run orchestration: wiring config to objects, the episode loop, and files.

Determinism contract: all randomness flows from numpy's counter-based
Philox generator, seeded once per run and split into named sub-streams
(model initialisation, user drop, traffic, exploration, replay sampling,
mobility).  Because the streams are independent, switching an agent that
does not consume a stream cannot perturb the others, and two runs with the
same config and seed produce byte-identical CSV output.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import asdict, dataclass, replace
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .agents import DqnAgent, EpisodeOutcome, QLearningAgent, SleepAgent, exhaustive_oracle
from .config import RunConfig
from .metrics import CSV_COLUMNS, MetricsAccumulator, MetricsRow
from .rl import Hyperparams, save_weights
from .scenario import (
    ArrivalConfig,
    RadioParams,
    Scenario,
    Topology,
    build_topology,
    drop_users,
)

STREAM_NAMES = ("model", "topology", "traffic", "exploration", "replay", "mobility")

SLOT_S = 1e-3


def make_streams(seed: int) -> dict[str, np.random.Generator]:
    """Named independent Philox streams derived from one seed."""
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    return {
        name: np.random.Generator(np.random.Philox(child))
        for name, child in zip(STREAM_NAMES, children)
    }


def make_topology(cfg: RunConfig) -> Topology:
    return build_topology(
        rings=cfg.rings,
        isd_m=cfg.isd_m,
        p_max_dbw=cfg.p_max_dbw,
        delta_p_max_db=cfg.delta_p_max_db,
        n_levels=cfg.n_power_levels,
        bs_height_m=cfg.bs_height_m,
        backlobe_atten_db=cfg.backlobe_atten_db,
    )


def make_radio(cfg: RunConfig) -> RadioParams:
    return RadioParams(
        fc_hz=cfg.fc_hz,
        tx_gain_dbi=cfg.tx_gain_dbi,
        rx_gain_dbi=cfg.rx_gain_dbi,
        path_loss_exponent=cfg.path_loss_exponent,
        bandwidth_hz=cfg.bandwidth_hz,
        noise_dbw=cfg.noise_dbw,
        bs_height_m=cfg.bs_height_m,
        user_height_m=cfg.user_height_m,
    )


def make_scenario(cfg: RunConfig, streams: dict[str, np.random.Generator]) -> Scenario:
    topo = make_topology(cfg)
    radio = make_radio(cfg)
    users = drop_users(topo, cfg.per_sector_users, streams["topology"], cfg.user_height_m)
    speed = cfg.user_speed_mps if cfg.mobility == "waypoint" else 0.0
    return Scenario(
        topo,
        radio,
        users,
        ArrivalConfig(
            p0=cfg.traffic_p0,
            period_steps=cfg.traffic_period,
            volume_lo_bits=cfg.volume_lo_bits,
            volume_hi_bits=cfg.volume_hi_bits,
        ),
        slot_s=SLOT_S,
        user_speed_mps=speed,
    )


def make_agent(cfg: RunConfig, streams: dict[str, np.random.Generator]):
    hyper = Hyperparams(
        discount=cfg.discount,
        epsilon=cfg.epsilon,
        learning_rate=cfg.learning_rate,
        minibatch_size=cfg.minibatch_size,
        train_interval=cfg.train_interval,
        sync_interval=cfg.sync_interval,
    )
    if cfg.agent == "dqn":
        return DqnAgent(
            n_actions=cfg.n_power_levels,
            hyper=hyper,
            rng_init=streams["model"],
            hidden_sizes=(cfg.hidden_units,) * cfg.hidden_layers,
            replay_capacity=cfg.replay_capacity,
            n_iterations=cfg.search_iters,
        )
    if cfg.agent == "qlearning":
        return QLearningAgent(
            n_actions=cfg.n_power_levels,
            hyper=hyper,
            n_bins=cfg.q_bins,
            alpha=cfg.q_alpha,
            n_iterations=cfg.search_iters,
        )
    return SleepAgent()


def outcome_to_row(t: int, phi: np.ndarray, outcome: EpisodeOutcome) -> MetricsRow:
    ev = outcome.ev
    if outcome.all_sleep:
        zeta = None
        n_star = None
        ee_reward = None
    else:
        zeta = int(outcome.feasible)
        n_star = outcome.accepted_iteration if outcome.feasible else None
        ee_reward = ev.network_ee
    return MetricsRow(
        t=t,
        phi=phi.copy(),
        power_dbw=ev.power_dbw,
        rate_bps=ev.rate_bps,
        link_ee=ev.link_ee,
        ee_reward=ee_reward,
        zeta=zeta,
        n_star=n_star,
    )


def _format_cell(value: float | int | None) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


@dataclass(frozen=True)
class RunResult:
    config: RunConfig
    out_dir: Path
    csv_path: Path
    summary: dict
    rows: list[MetricsRow]


def run(
    cfg: RunConfig,
    out_dir: str | Path | None = None,
    quiet: bool = True,
    keep_rows: bool = False,
    episode_hook: Callable[[int, object, EpisodeOutcome], None] | None = None,
) -> RunResult:
    """Execute one configured run and write ``metrics.csv`` + ``summary.json``.

    ``episode_hook`` receives ``(t, step_context, outcome)`` after each step;
    the acceptance suite uses it to compare accepted actions against the
    exhaustive oracle on the very contexts the agent saw.
    """
    started = time.perf_counter()
    streams = make_streams(cfg.seed)
    scn = make_scenario(cfg, streams)
    agent = make_agent(cfg, streams)

    out = Path(out_dir) if out_dir is not None else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "metrics.csv"

    acc = MetricsAccumulator(p_max_dbw=cfg.p_max_dbw)
    rows: list[MetricsRow] = []
    with open(csv_path, "w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for t in range(cfg.episodes):
            scn.spawn_arrivals(streams["traffic"])
            ctx = scn.build_step(volume_scale_bits=cfg.volume_hi_bits)
            outcome = _step_agent(agent, ctx, streams, t, cfg.episodes)
            scn.apply(ctx, outcome.ev, streams["mobility"])
            row = outcome_to_row(t, ctx.phi, outcome)
            record = acc.push(row)
            fh.write(",".join(_format_cell(record[c]) for c in CSV_COLUMNS) + "\n")
            if keep_rows:
                rows.append(row)
            if episode_hook is not None:
                episode_hook(t, ctx, outcome)

    if isinstance(agent, DqnAgent):
        save_weights(agent.predicted, str(out / "weights.bin"))

    summary = {
        "agent": cfg.agent,
        "seed": cfg.seed,
        **acc.summary(),
        "wall_clock_s": time.perf_counter() - started,
        "config": asdict(cfg),
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    if not quiet:
        ee = summary["ee_overall_mbps_per_dbw"]
        print(f"[{cfg.agent}] seed={cfg.seed} episodes={cfg.episodes} ee={ee:.4f}")
    return RunResult(cfg, out, csv_path, summary, rows)


def _step_agent(agent, ctx, streams, t: int, horizon: int) -> EpisodeOutcome:
    terminal = t == horizon - 1
    if isinstance(agent, DqnAgent):
        return agent.run_episode(
            ctx, streams["exploration"], streams["replay"], t, terminal
        )
    if isinstance(agent, QLearningAgent):
        return agent.run_episode(ctx, streams["exploration"], t, terminal)
    return agent.run_episode(ctx)


def run_compare(
    cfg: RunConfig, out_dir: str | Path | None = None, quiet: bool = True
) -> list[dict]:
    """Run every agent on the same seed and write a joined comparison table."""
    out = Path(out_dir) if out_dir is not None else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table: list[dict] = []
    for agent in ("dqn", "qlearning", "sleep"):
        result = run(replace(cfg, agent=agent), out / agent, quiet=quiet)
        entry = {"agent": agent}
        entry.update(
            {
                k: result.summary[k]
                for k in (
                    "ee_overall_mbps_per_dbw",
                    "throughput_overall_bps",
                    "power_overall_dbw",
                    "success_ratio_overall",
                    "iterations_overall",
                )
            }
        )
        table.append(entry)
    columns = list(table[0].keys())
    with open(out / "comparison.csv", "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for entry in table:
            fh.write(
                ",".join(
                    _format_cell(entry[c]) if c != "agent" else str(entry[c])
                    for c in columns
                )
                + "\n"
            )
    return table


def _sweep_one(args: tuple[RunConfig, str]) -> dict:
    cfg, out = args
    result = run(cfg, out, quiet=True)
    return {
        "out": out,
        "agent": cfg.agent,
        "seed": cfg.seed,
        "ee_overall_mbps_per_dbw": result.summary["ee_overall_mbps_per_dbw"],
    }


def run_sweep(
    cfg: RunConfig,
    vary: dict[str, Sequence],
    out_dir: str | Path | None = None,
    workers: int = 1,
    quiet: bool = True,
) -> list[dict]:
    """Cartesian sweep over the listed keys; one subdirectory per combo.

    Combos are independent runs, so ``workers > 1`` executes them in
    parallel processes without changing any output.
    """
    out = Path(out_dir) if out_dir is not None else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    keys = sorted(vary)
    jobs: list[tuple[RunConfig, str]] = []
    for combo in itertools.product(*(vary[k] for k in keys)):
        tags = dict(zip(keys, combo))
        sub = out / "_".join(f"{k}={v}" for k, v in tags.items())
        jobs.append((replace(cfg, **tags).validate(), str(sub)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_sweep_one, jobs))
    else:
        entries = [_sweep_one(job) for job in jobs]
    with open(out / "sweep.json", "w") as fh:
        json.dump(entries, fh, indent=2)
        fh.write("\n")
    if not quiet:
        for entry in entries:
            print(f"{entry['out']}: ee={entry['ee_overall_mbps_per_dbw']:.4f}")
    return entries


def run_oracle_check(
    cfg: RunConfig, out_dir: str | Path | None = None, quiet: bool = True
) -> dict:
    """Run the configured agent while scoring each step against the oracle.

    Only viable on small instances: the enumeration is capped, so wide grids
    or many power levels are rejected.  Writes ``oracle.csv`` with the
    per-step efficiency ratio and returns summary statistics.
    """
    out = Path(out_dir) if out_dir is not None else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ratios: list[tuple[int, float, float, float]] = []

    def hook(t: int, ctx, outcome: EpisodeOutcome) -> None:
        if outcome.all_sleep:
            return
        _, best_ee = exhaustive_oracle(ctx)
        achieved = outcome.ev.network_ee
        ratio = achieved / best_ee if best_ee > 0.0 else 1.0
        ratios.append((t, achieved, best_ee, ratio))

    run(cfg, out, quiet=True, episode_hook=hook)
    with open(out / "oracle.csv", "w", newline="") as fh:
        fh.write("t,achieved_ee,oracle_ee,ratio\n")
        for t, achieved, best, ratio in ratios:
            fh.write(f"{t},{achieved!r},{best!r},{ratio!r}\n")
    stats = {
        "steps_scored": len(ratios),
        "mean_ratio": float(np.mean([r[3] for r in ratios])) if ratios else None,
        "min_ratio": float(np.min([r[3] for r in ratios])) if ratios else None,
    }
    with open(out / "oracle_summary.json", "w") as fh:
        json.dump(stats, fh, indent=2)
        fh.write("\n")
    if not quiet and stats["mean_ratio"] is not None:
        print(
            f"oracle check: {stats['steps_scored']} steps, "
            f"mean ratio {stats['mean_ratio']:.4f}, min {stats['min_ratio']:.4f}"
        )
    return stats
