"""Run configuration, checkpoints, the benchmark runner, and trace files.

A run configuration is a JSON file with a fixed schema; unknown keys are
rejected so typos fail fast. Every artifact (checkpoint, training log,
trace, report) embeds the configuration hash and seed that produced it,
and repeated runs with the same values are byte-identical. Wall time is
reported on stderr only, never inside report files, for that reason.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .channel import COMM_MODES
from .marl import TrainConfig
from .neural import load_params, save_params
from .tasks import Episode, TaskSpec, init_episode, make_task, metrics
from .training import make_family, run_episode, train
from .world import WorldConfig, make_state, EntityId

BENCH_STREAM = 0xB37C


class ConfigError(ValueError):
    pass


class CheckpointError(RuntimeError):
    pass


_TOP_KEYS = {"task", "comm_modes", "seeds", "train_episodes",
             "bench_episodes", "ablation", "world", "hyper",
             "task_overrides", "adversary_from"}
_ABLATION_KEYS = {"f_predict", "comm_reward", "evlc_physical"}


@dataclass(frozen=True)
class RunConfig:
    task: str
    comm_modes: tuple[str, ...]
    seeds: tuple[int, ...]
    train_episodes: int = 2000
    bench_episodes: int = 1000
    ablation: dict = field(default_factory=dict)
    world: dict = field(default_factory=dict)
    hyper: dict = field(default_factory=dict)
    task_overrides: dict = field(default_factory=dict)
    # benchmark adversaries come frozen from this mode's checkpoint, so
    # every comm mode faces the same opponent
    adversary_from: str | None = None

    def canonical(self) -> dict:
        return {
            "task": self.task,
            "comm_modes": list(self.comm_modes),
            "seeds": list(self.seeds),
            "train_episodes": self.train_episodes,
            "bench_episodes": self.bench_episodes,
            "ablation": dict(sorted(self.ablation.items())),
            "world": dict(sorted(self.world.items())),
            "hyper": dict(sorted(self.hyper.items())),
            "task_overrides": dict(sorted(self.task_overrides.items())),
            "adversary_from": self.adversary_from,
        }

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def task_spec(self) -> TaskSpec:
        return make_task(self.task, **self.task_overrides)

    def world_config(self) -> WorldConfig:
        return self.task_spec().world_config(**self.world)

    def train_config(self) -> TrainConfig:
        kwargs = dict(self.hyper)
        kwargs["episodes"] = self.train_episodes
        kwargs.update(self.ablation)
        return TrainConfig(**kwargs)


def validate_config(raw: dict) -> RunConfig:
    """Schema-check a parsed config dict; unknown keys are errors."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("task", "comm_modes", "seeds"):
        if key not in raw:
            raise ConfigError(f"missing required config key {key!r}")
    modes = tuple(raw["comm_modes"])
    for m in modes:
        if m not in COMM_MODES:
            raise ConfigError(f"unknown comm mode {m!r}")
    seeds = tuple(int(s) for s in raw["seeds"])
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")

    ablation = dict(raw.get("ablation", {}))
    if set(ablation) - _ABLATION_KEYS:
        raise ConfigError(
            f"unknown ablation keys: {sorted(set(ablation) - _ABLATION_KEYS)}")
    hyper = dict(raw.get("hyper", {}))
    hyper_ok = {f.name for f in fields(TrainConfig)} - _ABLATION_KEYS - {"episodes"}
    if set(hyper) - hyper_ok:
        raise ConfigError(
            f"unknown hyper keys: {sorted(set(hyper) - hyper_ok)}")
    world = dict(raw.get("world", {}))
    world_ok = {f.name for f in fields(WorldConfig)}
    if set(world) - world_ok:
        raise ConfigError(
            f"unknown world keys: {sorted(set(world) - world_ok)}")
    task_overrides = dict(raw.get("task_overrides", {}))
    task_ok = {f.name for f in fields(TaskSpec)} - {"name"}
    if set(task_overrides) - task_ok:
        raise ConfigError(
            f"unknown task_overrides keys: "
            f"{sorted(set(task_overrides) - task_ok)}")

    adversary_from = raw.get("adversary_from")
    if adversary_from is not None and adversary_from not in modes:
        raise ConfigError("adversary_from must name one of comm_modes")

    cfg = RunConfig(
        task=str(raw["task"]),
        comm_modes=modes,
        seeds=seeds,
        train_episodes=int(raw.get("train_episodes", 2000)),
        bench_episodes=int(raw.get("bench_episodes", 1000)),
        ablation=ablation,
        world=world,
        hyper=hyper,
        task_overrides=task_overrides,
        adversary_from=adversary_from,
    )
    cfg.task_spec()  # raises on an unknown task name
    return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    return validate_config(raw)


# ---------------------------------------------------------------------------
# checkpoints


def checkpoint_dir(out: str | Path, task: str, mode: str, seed: int) -> Path:
    return Path(out) / "checkpoints" / f"{task}_{mode}_seed{seed}"


def save_checkpoint(out, config: RunConfig, mode: str, seed: int,
                    result) -> Path:
    path = checkpoint_dir(out, config.task, mode, seed)
    save_params(path, result.family.named_nets())
    meta = {
        "task": config.task,
        "comm_mode": mode,
        "seed": seed,
        "config_hash": config.config_hash,
        "config": config.canonical(),
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    return path


def load_policies(out, config: RunConfig, mode: str, seed: int):
    """Rebuild the model family for (task, mode, seed) and load weights.

    With `adversary_from` set, adversary networks are overwritten from
    that mode's checkpoint so benchmarks face one frozen opponent.
    """
    path = checkpoint_dir(out, config.task, mode, seed)
    if not (path / "manifest.json").exists():
        raise CheckpointError(
            f"missing checkpoint for ({config.task}, {mode}, seed {seed}) "
            f"at {path}")
    spec = config.task_spec()
    wc = config.world_config()
    tc = config.train_config()
    family = make_family(spec, mode, wc, tc, np.random.default_rng(0))
    load_params(path, family.named_nets())
    if config.adversary_from and getattr(family, "advs", None):
        donor_path = checkpoint_dir(out, config.task, config.adversary_from,
                                    seed)
        if not (donor_path / "manifest.json").exists():
            raise CheckpointError(
                f"missing adversary checkpoint for ({config.task}, "
                f"{config.adversary_from}, seed {seed})")
        donor = make_family(spec, config.adversary_from, wc, tc,
                            np.random.default_rng(0))
        load_params(donor_path, donor.named_nets())
        for i, mover in enumerate(family.movers):
            if mover.cls == "adversary":
                for dst, src in zip(family.agents[i].actor.params(),
                                    donor.agents[i].actor.params()):
                    dst[...] = src
    return family


def write_training_log(out, config: RunConfig, mode: str, seed: int,
                       result) -> Path:
    logs = Path(out) / "logs"
    logs.mkdir(parents=True, exist_ok=True)
    path = logs / f"train_{config.task}_{mode}_seed{seed}.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "mean_reward", "metric",
                    "config_hash", "seed"])
        for row in result.log:
            w.writerow([row["episode"], repr(row["mean_reward"]),
                        repr(row["metric"]), config.config_hash, seed])
    return path


def train_runs(config: RunConfig, out, seeds=None, modes=None,
               echo=print) -> list[Path]:
    """Train every (mode, seed) pair of the config; returns checkpoints."""
    paths = []
    for seed in (seeds if seeds is not None else config.seeds):
        for mode in (modes if modes is not None else config.comm_modes):
            t0 = time.perf_counter()
            result = train(config.task_spec(), mode, config.train_config(),
                           seed=seed, world_overrides=config.world)
            paths.append(save_checkpoint(out, config, mode, seed, result))
            write_training_log(out, config, mode, seed, result)
            echo(f"trained {config.task}/{mode} seed {seed} "
                 f"in {time.perf_counter() - t0:.1f}s")
    return paths


# ---------------------------------------------------------------------------
# benchmark


@dataclass(frozen=True)
class ModeResult:
    mode: str
    metric_name: str
    mean: float
    stderr: float
    n_episodes: int
    seeds: tuple[int, ...]
    per_seed_mean: dict[int, float]


@dataclass(frozen=True)
class BenchReport:
    task: str
    config_hash: str
    rows: tuple[ModeResult, ...]
    wall_time_s: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["task", "mode", "metric", "mean", "stderr",
                    "n_episodes", "seeds", "config_hash"])
        for r in self.rows:
            w.writerow([self.task, r.mode, r.metric_name, repr(r.mean),
                        repr(r.stderr), r.n_episodes,
                        ";".join(str(s) for s in r.seeds), self.config_hash])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "task": self.task,
            "config_hash": self.config_hash,
            "modes": [
                {
                    "mode": r.mode,
                    "metric": r.metric_name,
                    "mean": r.mean,
                    "stderr": r.stderr,
                    "n_episodes": r.n_episodes,
                    "seeds": list(r.seeds),
                    "per_seed_mean": {str(k): v
                                      for k, v in r.per_seed_mean.items()},
                }
                for r in self.rows
            ],
        }, indent=1, sort_keys=True)


def bench_episode_rng(seed: int, episode_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([BENCH_STREAM, seed, episode_index]))


def _bench_seed(args) -> tuple[int, list[float]]:
    out, config, mode, seed, n_episodes = args
    family = load_policies(out, config, mode, seed)
    spec = config.task_spec()
    wc = config.world_config()
    values = []
    for k in range(n_episodes):
        episode = init_episode(spec, bench_episode_rng(seed, k), wc)
        states = run_episode(family, episode)
        values.append(metrics(spec, episode, states, wc)[spec.metric_name])
    return seed, values


def run_benchmark(config: RunConfig, out, workers: int = 1,
                  echo=print) -> BenchReport:
    """Fresh seeded episodes against the frozen per-(mode, seed) policies."""
    t0 = time.perf_counter()
    spec = config.task_spec()
    for mode in config.comm_modes:
        for seed in config.seeds:
            path = checkpoint_dir(out, config.task, mode, seed)
            if not (path / "manifest.json").exists():
                raise CheckpointError(
                    f"missing checkpoint for ({config.task}, {mode}, "
                    f"seed {seed})")
    rows = []
    for mode in config.comm_modes:
        jobs = [(out, config, mode, seed, config.bench_episodes)
                for seed in config.seeds]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                per_seed = dict(pool.map(_bench_seed, jobs))
        else:
            per_seed = dict(map(_bench_seed, jobs))
        values = np.concatenate([per_seed[s] for s in config.seeds])
        stderr = (float(np.std(values, ddof=1) / np.sqrt(len(values)))
                  if len(values) > 1 else 0.0)
        rows.append(ModeResult(
            mode=mode,
            metric_name=spec.metric_name,
            mean=float(np.mean(values)),
            stderr=stderr,
            n_episodes=len(values),
            seeds=config.seeds,
            per_seed_mean={s: float(np.mean(per_seed[s]))
                           for s in config.seeds},
        ))
        echo(f"benchmarked {config.task}/{mode}: "
             f"{rows[-1].mean:.4f} +/- {rows[-1].stderr:.4f}")
    return BenchReport(task=config.task, config_hash=config.config_hash,
                       rows=tuple(rows), wall_time_s=time.perf_counter() - t0)


def write_report(report: BenchReport, out) -> tuple[Path, Path]:
    reports = Path(out) / "reports"
    reports.mkdir(parents=True, exist_ok=True)
    csv_path = reports / f"bench_{report.task}.csv"
    json_path = reports / f"bench_{report.task}.json"
    csv_path.write_text(report.to_csv())
    json_path.write_text(report.to_json())
    return csv_path, json_path


# ---------------------------------------------------------------------------
# trajectory traces


def export_trajectories(episode: Episode, states, path,
                        config_hash: str = "", seed: int = 0) -> Path:
    """Write the per-step entity poses (and goal rows) as CSV.

    One row per entity per step, steps numbered from 1; goals are static
    navigation marks exported with class 'goal'.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# lumen-trace task={episode.spec.name} "
                 f"config_hash={config_hash} seed={seed}\n")
        w = csv.writer(fh)
        w.writerow(["step", "entity", "class", "x", "y", "heading"])
        for k, state in enumerate(states, start=1):
            for e in state.entities:
                i = state.index_of(e)
                w.writerow([k, e.index, e.cls,
                            repr(float(state.positions[i, 0])),
                            repr(float(state.positions[i, 1])),
                            repr(float(state.headings[i]))])
            if episode.goals is not None:
                for gi, g in enumerate(episode.goals):
                    w.writerow([k, gi, "goal", repr(float(g[0])),
                                repr(float(g[1])), repr(0.0)])
    return path


def load_trace(path) -> tuple[str, Episode, list]:
    """Rebuild (task name, episode context, states) from a trace file."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("# lumen-trace"):
        raise ValueError(f"{path} is not a trace file")
    meta = dict(kv.split("=", 1) for kv in lines[0][2:].split()[1:])
    task = meta["task"]
    spec = make_task(task)
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    by_step: dict[int, list[dict]] = {}
    for r in rows:
        by_step.setdefault(int(r["step"]), []).append(r)

    states = []
    goals = None
    for k in sorted(by_step):
        ids, pos, heads = [], [], []
        step_goals = []
        for r in sorted(by_step[k], key=lambda r: (r["class"], int(r["entity"]))):
            if r["class"] == "goal":
                step_goals.append([float(r["x"]), float(r["y"])])
                continue
            ids.append(EntityId(r["class"], int(r["entity"])))
            pos.append([float(r["x"]), float(r["y"])])
            heads.append(float(r["heading"]))
        states.append(make_state(ids, np.array(pos), np.array(heads),
                                 step_index=k))
        if step_goals:
            goals = np.array(step_goals)
    episode = Episode(spec=spec, state=states[0], goals=goals)
    return task, episode, states


def replay_metrics(path) -> dict[str, float]:
    """Recompute an exported trace's metrics from the file alone."""
    task, episode, states = load_trace(path)
    spec = make_task(task)
    return metrics(spec, episode, states)
