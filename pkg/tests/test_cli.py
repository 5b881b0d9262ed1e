import csv
import json
import os

import pytest

from lumen.cli import cli

TINY = {
    "task": "simple_swing",
    "comm_modes": ["evlc"],
    "seeds": [0],
    "train_episodes": 2,
    "bench_episodes": 2,
    "hyper": {"warmup": 20, "batch_size": 8, "mlp_width": 16,
              "mlp_layers": 2, "fg_width": 16, "fg_layers": 2},
}


def write_config(tmp_path, payload=None):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(payload or TINY))
    return p


def test_missing_subcommand_usage_exit_2(capsys):
    assert cli([]) == 2


def test_bench_without_config_exit_2(capsys):
    assert cli(["bench"]) == 2


def test_unknown_subcommand_exit_2(capsys):
    assert cli(["frobnicate"]) == 2


def test_bad_config_machine_readable_error(tmp_path, capsys):
    cfg = write_config(tmp_path, {"task": "simple_swing",
                                  "comm_modes": ["evlc"], "seeds": [0],
                                  "typo_key": 1})
    rc = cli(["train", "--config", str(cfg), "--out",
              str(tmp_path / "out")])
    assert rc == 1
    err = capsys.readouterr().err.strip().splitlines()[-1]
    payload = json.loads(err)
    assert "unknown config keys" in payload["error"]


def test_missing_config_file_error(tmp_path, capsys):
    rc = cli(["train", "--config", str(tmp_path / "nope.json")])
    assert rc == 1
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "error" in payload


def test_train_bench_replay_pipeline(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert cli(["train", "--config", str(cfg), "--out", str(out)]) == 0
    capsys.readouterr()
    assert cli(["bench", "--config", str(cfg), "--out", str(out)]) == 0
    captured = capsys.readouterr()
    report_csv = (out / "reports" / "bench_simple_swing.csv")
    assert report_csv.exists()
    rows = list(csv.DictReader(report_csv.read_text().splitlines()))
    assert rows[0]["mode"] == "evlc"

    # export a trace through the library, then replay it via the CLI
    from lumen.bench import export_trajectories, load_config, load_policies
    from lumen.tasks import init_episode
    from lumen.training import run_episode
    import numpy as np
    config = load_config(cfg)
    family = load_policies(out, config, "evlc", 0)
    ep = init_episode(config.task_spec(), np.random.default_rng(0),
                      config.world_config())
    states = run_episode(family, ep)
    trace = export_trajectories(ep, states, tmp_path / "trace.csv")
    assert cli(["replay", "--trace", str(trace)]) == 0
    replayed = json.loads(capsys.readouterr().out)
    assert "landmarks_in_sight_rate" in replayed


def test_bench_before_train_fails_cleanly(tmp_path, capsys):
    cfg = write_config(tmp_path)
    rc = cli(["bench", "--config", str(cfg), "--out",
              str(tmp_path / "empty")])
    assert rc == 1
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "missing checkpoint" in payload["error"]


def test_codec_test_csv_output(tmp_path, capsys):
    rc = cli(["codec-test", "--payloads", "30", "--occlusion", "0.9,1.0",
              "--occlusion-trials", "10", "--seed", "5"])
    assert rc == 0
    out = capsys.readouterr().out
    rows = list(csv.DictReader(out.splitlines()))
    by_param = {r["parameter"]: float(r["success_rate"]) for r in rows}
    assert by_param["roundtrip"] == 1.0
    assert by_param["occlusion=0.9"] == 1.0
    assert by_param["occlusion=1.0"] == 0.0


def test_codec_test_writes_file(tmp_path, capsys):
    rc = cli(["codec-test", "--payloads", "5", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "codec_test.csv").exists()


def test_seed_env_override(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("LUMEN_SEED", "1")
    cfg = write_config(tmp_path, {**TINY, "seeds": [0, 1]})
    out = tmp_path / "env_out"
    assert cli(["train", "--config", str(cfg), "--out", str(out)]) == 0
    # only the env-selected seed was trained
    ckpts = sorted(p.name for p in (out / "checkpoints").iterdir())
    assert ckpts == ["simple_swing_evlc_seed1"]


def test_seed_env_must_be_integer(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("LUMEN_SEED", "one")
    cfg = write_config(tmp_path)
    rc = cli(["train", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert rc == 1
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "LUMEN_SEED" in payload["error"]
