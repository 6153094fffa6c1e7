"""Run orchestration, output files, determinism, and the CLI."""

import json
import subprocess
import sys

import numpy as np
import pytest

from ranpower.cli import main
from ranpower.config import RunConfig
from ranpower.metrics import CSV_COLUMNS
from ranpower.runner import (
    STREAM_NAMES,
    make_streams,
    outcome_to_row,
    run,
    run_compare,
    run_oracle_check,
    run_sweep,
)


def small_cfg(**kw):
    base = dict(rings=0, episodes=40, search_iters=10, seed=3, agent="dqn")
    base.update(kw)
    return RunConfig(**base).validate()


def test_streams_are_named_and_reproducible():
    a = make_streams(7)
    b = make_streams(7)
    assert set(a) == set(STREAM_NAMES)
    for name in STREAM_NAMES:
        assert a[name].random() == b[name].random()


def test_streams_differ_between_names_and_seeds():
    streams = make_streams(7)
    draws = {name: streams[name].random() for name in STREAM_NAMES}
    assert len(set(draws.values())) == len(STREAM_NAMES)
    assert make_streams(8)["model"].random() != make_streams(7)["model"].random()


def test_outcome_to_row_all_sleep_masks_everything():
    from ranpower.agents import SleepAgent
    from conftest import make_scenario as scenario_for
    from ranpower.scenario import RadioParams
    from ranpower.runner import make_topology

    topo = make_topology(small_cfg())
    scn = scenario_for(topo, RadioParams(), seed=0)
    ctx = scn.build_step(volume_scale_bits=2e5)
    out = SleepAgent().run_episode(ctx)
    row = outcome_to_row(5, ctx.phi, out)
    assert row.t == 5
    assert row.zeta is None
    assert row.n_star is None
    assert row.ee_reward is None


def test_run_writes_csv_summary_and_weights(tmp_path):
    cfg = small_cfg()
    result = run(cfg, tmp_path / "out")
    lines = (tmp_path / "out" / "metrics.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == cfg.episodes + 1
    assert (tmp_path / "out" / "weights.bin").exists()

    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["agent"] == "dqn"
    assert summary["episodes"] == cfg.episodes
    assert summary["ee_overall_mbps_per_dbw"] == pytest.approx(
        result.summary["ee_overall_mbps_per_dbw"]
    )
    assert summary["config"]["seed"] == cfg.seed


def test_run_without_learning_agent_writes_no_weights(tmp_path):
    run(small_cfg(agent="sleep"), tmp_path / "out")
    assert not (tmp_path / "out" / "weights.bin").exists()
    run(small_cfg(agent="qlearning"), tmp_path / "ql")
    assert not (tmp_path / "ql" / "weights.bin").exists()


def test_csv_floats_survive_a_parse_round_trip(tmp_path):
    run(small_cfg(), tmp_path / "out")
    lines = (tmp_path / "out" / "metrics.csv").read_text().splitlines()
    for line in lines[1:3]:
        cells = line.split(",")
        for cell in cells:
            if cell and "." in cell:
                assert repr(float(cell)) == cell


@pytest.mark.parametrize("agent", ["dqn", "qlearning", "sleep"])
def test_same_seed_gives_byte_identical_csv(tmp_path, agent):
    cfg = small_cfg(agent=agent)
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    a = (tmp_path / "a" / "metrics.csv").read_bytes()
    b = (tmp_path / "b" / "metrics.csv").read_bytes()
    assert a == b


def test_different_seed_changes_the_csv(tmp_path):
    run(small_cfg(seed=3), tmp_path / "a")
    run(small_cfg(seed=4), tmp_path / "b")
    a = (tmp_path / "a" / "metrics.csv").read_bytes()
    b = (tmp_path / "b" / "metrics.csv").read_bytes()
    assert a != b


def test_episode_hook_sees_every_step(tmp_path):
    seen = []
    run(
        small_cfg(episodes=12),
        tmp_path / "out",
        episode_hook=lambda t, ctx, outcome: seen.append((t, outcome.ev.power_idx.copy())),
    )
    assert [t for t, _ in seen] == list(range(12))


def test_keep_rows_returns_one_row_per_episode(tmp_path):
    result = run(small_cfg(episodes=15), tmp_path / "out", keep_rows=True)
    assert len(result.rows) == 15
    assert [r.t for r in result.rows] == list(range(15))


def test_run_compare_covers_all_agents(tmp_path):
    cfg = small_cfg(episodes=25)
    table = run_compare(cfg, tmp_path / "cmp")
    assert [entry["agent"] for entry in table] == ["dqn", "qlearning", "sleep"]
    for agent in ("dqn", "qlearning", "sleep"):
        assert (tmp_path / "cmp" / agent / "metrics.csv").exists()
    lines = (tmp_path / "cmp" / "comparison.csv").read_text().splitlines()
    assert len(lines) == 4
    assert lines[0].startswith("agent,ee_overall_mbps_per_dbw")


def test_run_sweep_serial_and_parallel_agree(tmp_path):
    cfg = small_cfg(episodes=20)
    vary = {"seed": [0, 1], "agent": ["sleep"]}
    serial = run_sweep(cfg, vary, tmp_path / "s1", workers=1)
    parallel = run_sweep(cfg, vary, tmp_path / "s2", workers=2)
    assert len(serial) == 2
    key = "ee_overall_mbps_per_dbw"
    for a, b in zip(serial, parallel):
        assert a["seed"] == b["seed"]
        assert a[key] == b[key]
    assert (tmp_path / "s1" / "agent=sleep_seed=0" / "metrics.csv").exists()
    assert json.loads((tmp_path / "s1" / "sweep.json").read_text())[0]["agent"] == "sleep"


def test_oracle_check_scores_active_steps(tmp_path):
    stats = run_oracle_check(small_cfg(episodes=30), tmp_path / "oracle")
    assert stats["steps_scored"] > 0
    assert stats["mean_ratio"] <= 1.0 + 1e-12
    assert stats["min_ratio"] > 0.0
    lines = (tmp_path / "oracle" / "oracle.csv").read_text().splitlines()
    assert lines[0] == "t,achieved_ee,oracle_ee,ratio"
    assert len(lines) == stats["steps_scored"] + 1


def write_cfg(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


def test_cli_run_exit_zero_and_seed_override(tmp_path):
    cfg = write_cfg(tmp_path, "rings = 0\nepisodes = 20\nsearch_iters = 5\n")
    code = main(
        ["run", "--config", cfg, "--seed", "9", "--agent", "sleep",
         "--out", str(tmp_path / "out"), "--quiet"]
    )
    assert code == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["seed"] == 9
    assert summary["agent"] == "sleep"


def test_cli_config_errors_exit_one(tmp_path, capsys):
    bad = write_cfg(tmp_path, "episodes ???\n")
    assert main(["run", "--config", bad]) == 1
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 1
    cfg = write_cfg(tmp_path, "rings = 0\n")
    assert main(["sweep", "--config", cfg, "--vary", "nonsense=1,2"]) == 1
    assert main(["sweep", "--config", cfg]) == 1
    err = capsys.readouterr().err
    assert "config error" in err


def test_cli_runtime_errors_exit_two(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "rings = 2\nepisodes = 20\n")
    code = main(["oracle", "--config", cfg, "--out", str(tmp_path / "out"), "--quiet"])
    assert code == 2
    assert "runtime error" in capsys.readouterr().err


def test_cli_compare_and_sweep_end_to_end(tmp_path):
    cfg = write_cfg(
        tmp_path, "rings = 0\nepisodes = 15\nsearch_iters = 5\nseed = 1\n"
    )
    assert main(["compare", "--config", cfg, "--out", str(tmp_path / "cmp"), "--quiet"]) == 0
    assert (tmp_path / "cmp" / "comparison.csv").exists()
    assert (
        main(
            ["sweep", "--config", cfg, "--vary", "seed=0,1",
             "--out", str(tmp_path / "sw"), "--quiet"]
        )
        == 0
    )
    assert (tmp_path / "sw" / "sweep.json").exists()


def test_console_script_is_installed(tmp_path):
    cfg = write_cfg(tmp_path, "rings = 0\nepisodes = 5\nsearch_iters = 2\n")
    proc = subprocess.run(
        [sys.executable, "-c",
         "import sys; from ranpower.cli import main; sys.exit(main(sys.argv[1:]))",
         "run", "--config", cfg, "--agent", "sleep",
         "--out", str(tmp_path / "out"), "--quiet"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "out" / "metrics.csv").exists()
