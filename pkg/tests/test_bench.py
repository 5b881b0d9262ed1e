import csv
import json
import math

import numpy as np
import pytest

from lumen.bench import (
    BenchReport,
    CheckpointError,
    ConfigError,
    RunConfig,
    export_trajectories,
    load_config,
    load_policies,
    load_trace,
    replay_metrics,
    run_benchmark,
    train_runs,
    validate_config,
    write_report,
)
from lumen.tasks import init_episode, make_task, metrics
from lumen.training import run_episode, train


TINY = {
    "task": "simple_swing",
    "comm_modes": ["evlc", "none"],
    "seeds": [0, 1],
    "train_episodes": 3,
    "bench_episodes": 2,
    "hyper": {"warmup": 20, "batch_size": 8, "mlp_width": 16,
              "mlp_layers": 2, "fg_width": 16, "fg_layers": 2},
}


def test_validate_accepts_tiny():
    cfg = validate_config(dict(TINY))
    assert cfg.task == "simple_swing"
    assert cfg.comm_modes == ("evlc", "none")
    assert cfg.train_config().batch_size == 8
    assert cfg.train_config().episodes == 3


@pytest.mark.parametrize("mutation,match", [
    ({"tsak": "simple_swing"}, "unknown config keys"),
    ({"comm_modes": ["laser"]}, "unknown comm mode"),
    ({"seeds": [1, 1]}, "distinct"),
    ({"hyper": {"warmup": 20, "learning_rate": 3}}, "unknown hyper"),
    ({"world": {"field": 1.0}}, "unknown world"),
    ({"ablation": {"g_predict": False}}, "unknown ablation"),
    ({"task_overrides": {"name": "x"}}, "unknown task_overrides"),
])
def test_validate_rejects_unknown_keys(mutation, match):
    raw = dict(TINY)
    raw.update(mutation)
    with pytest.raises(ConfigError, match=match):
        validate_config(raw)


def test_validate_requires_core_keys():
    with pytest.raises(ConfigError, match="missing required"):
        validate_config({"task": "simple_swing"})


def test_config_hash_stable_and_sensitive():
    a = validate_config(dict(TINY))
    b = validate_config(json.loads(json.dumps(TINY)))
    assert a.config_hash == b.config_hash
    c = dict(TINY)
    c["bench_episodes"] = 3
    assert validate_config(c).config_hash != a.config_hash


def test_load_config_rejects_bad_json(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(p)


@pytest.fixture(scope="module")
def trained_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    cfg = validate_config(dict(TINY))
    train_runs(cfg, out, echo=lambda *_: None)
    return out, cfg


def test_train_then_bench_pipeline(trained_out):
    out, cfg = trained_out
    report = run_benchmark(cfg, out, echo=lambda *_: None)
    assert {r.mode for r in report.rows} == {"evlc", "none"}
    for row in report.rows:
        assert row.n_episodes == 4  # 2 seeds x 2 episodes
        assert set(row.per_seed_mean) == {0, 1}
    csv_path, json_path = write_report(report, out)
    parsed = list(csv.DictReader(csv_path.read_text().splitlines()))
    assert len(parsed) == 2
    assert parsed[0]["config_hash"] == cfg.config_hash
    assert "wall" not in csv_path.read_text()
    data = json.loads(json_path.read_text())
    assert data["task"] == "simple_swing"


def test_bench_missing_checkpoint_names_pair(tmp_path):
    cfg = validate_config(dict(TINY))
    with pytest.raises(CheckpointError, match="simple_swing.*evlc.*seed 0"):
        run_benchmark(cfg, tmp_path, echo=lambda *_: None)


def test_load_policies_reproduces_actions(trained_out):
    out, cfg = trained_out
    family = load_policies(out, cfg, "evlc", 0)
    res = train(cfg.task_spec(), "evlc", cfg.train_config(), seed=0,
                world_overrides=cfg.world)
    ep = init_episode(cfg.task_spec(), np.random.default_rng(3),
                      cfg.world_config())
    assert run_episode(family, ep)[-1].positions == pytest.approx(
        run_episode(res.family, ep)[-1].positions)


def test_benchmark_deterministic_and_parallel_equivalent(trained_out):
    out, cfg = trained_out
    r1 = run_benchmark(cfg, out, workers=1, echo=lambda *_: None)
    r2 = run_benchmark(cfg, out, workers=2, echo=lambda *_: None)
    assert r1.to_csv() == r2.to_csv()


def test_single_episode_report_has_zero_stderr(tmp_path, trained_out):
    out, cfg = trained_out
    one = RunConfig(task=cfg.task, comm_modes=("evlc",), seeds=(0,),
                    train_episodes=cfg.train_episodes, bench_episodes=1,
                    hyper=cfg.hyper)
    report = run_benchmark(one, out, echo=lambda *_: None)
    assert report.rows[0].n_episodes == 1
    assert report.rows[0].stderr == 0.0


def test_trace_export_row_count_and_roundtrip(tmp_path):
    spec = make_task("simple_swing")
    wc = spec.world_config()
    ep = init_episode(spec, np.random.default_rng(0), wc)
    from lumen.marl import TrainConfig
    from lumen.training import make_family
    family = make_family(spec, "none", wc, TrainConfig(
        mlp_width=8, mlp_layers=1, fg_width=8, fg_layers=1),
        np.random.default_rng(1))
    states = run_episode(family, ep)
    path = export_trajectories(ep, states, tmp_path / "trace.csv",
                               config_hash="cafe", seed=0)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# lumen-trace task=simple_swing")
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 20 * 6  # 20 steps x 6 entities

    task, ep2, states2 = load_trace(path)
    assert task == "simple_swing"
    for s_orig, s_back in zip(states, states2):
        for e in s_orig.entities:
            a = s_orig.positions[s_orig.index_of(e)]
            b = s_back.positions[s_back.index_of(e)]
            assert np.all(np.abs(a - b) <= 1e-12)

    online = metrics(spec, ep, states, wc)
    replayed = replay_metrics(path)
    assert replayed == pytest.approx(online)


def test_trace_includes_goal_rows(tmp_path):
    spec = make_task("goal_crossing")
    wc = spec.world_config()
    ep = init_episode(spec, np.random.default_rng(2), wc)
    from lumen.marl import TrainConfig
    from lumen.training import make_family
    family = make_family(spec, "none", wc, TrainConfig(
        mlp_width=8, mlp_layers=1, conv_filters=4, conv_layers=1,
        obs_pool=10), np.random.default_rng(3))
    states = run_episode(family, ep)
    path = export_trajectories(ep, states, tmp_path / "gc.csv")
    rows = list(csv.DictReader(path.read_text().splitlines()[1:]))
    goal_rows = [r for r in rows if r["class"] == "goal"]
    assert len(goal_rows) == 20 * spec.n_agents
    online = metrics(spec, ep, states, wc)
    assert replay_metrics(path) == pytest.approx(online)


def test_adversary_from_shares_frozen_opponent(tmp_path):
    cfg = validate_config({
        "task": "predator_prey",
        "comm_modes": ["evlc", "none"],
        "seeds": [0],
        "train_episodes": 2,
        "bench_episodes": 1,
        "hyper": {"warmup": 20, "batch_size": 8, "mlp_width": 12,
                  "mlp_layers": 1, "fg_width": 12, "fg_layers": 1,
                  "conv_filters": 4, "conv_layers": 1, "obs_pool": 10},
        "adversary_from": "none",
    })
    train_runs(cfg, tmp_path, echo=lambda *_: None)
    evlc_fam = load_policies(tmp_path, cfg, "evlc", 0)
    none_fam = load_policies(tmp_path, cfg, "none", 0)
    adv_idx = [i for i, m in enumerate(evlc_fam.movers)
               if m.cls == "adversary"][0]
    for a, b in zip(evlc_fam.agents[adv_idx].actor.params(),
                    none_fam.agents[adv_idx].actor.params()):
        assert np.array_equal(a, b)


def test_adversary_from_must_be_a_mode():
    raw = {"task": "predator_prey", "comm_modes": ["evlc"], "seeds": [0],
           "adversary_from": "radio"}
    with pytest.raises(ConfigError, match="adversary_from"):
        validate_config(raw)
