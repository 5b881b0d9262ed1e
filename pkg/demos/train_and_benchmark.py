"""A miniature of the full study: train Simple Swing with and without the
event-VLC channel, benchmark both, and export a trajectory trace.

The run is deliberately small (a few minutes); raise `episodes` and the
network sizes toward the TrainConfig defaults for a real study.

Run:  python demos/train_and_benchmark.py
"""

import numpy as np

from lumen.bench import bench_episode_rng, export_trajectories, replay_metrics
from lumen.marl import TrainConfig
from lumen.tasks import init_episode, metrics
from lumen.training import run_episode, train

tc = TrainConfig(
    episodes=300, warmup=500, batch_size=64,
    mlp_width=48, mlp_layers=2, fg_width=48, fg_layers=2,
    actor_lr=1e-3, critic_lr=1e-3,
)

results = {}
for mode in ("evlc", "none"):
    print(f"training simple_swing/{mode} for {tc.episodes} episodes...")
    results[mode] = train("simple_swing", mode, tc, seed=0)

print("\nbenchmark on 50 fresh seeded episodes per mode:")
for mode, res in results.items():
    values = []
    for k in range(50):
        ep = init_episode(res.spec, bench_episode_rng(0, k), res.world_config)
        states = run_episode(res.family, ep)
        values.append(metrics(res.spec, ep, states,
                              res.world_config)["landmarks_in_sight_rate"])
    print(f"  {mode:>5}: landmarks-in-sight rate "
          f"{np.mean(values):.3f} +/- {np.std(values) / np.sqrt(50):.3f}")

res = results["evlc"]
ep = init_episode(res.spec, bench_episode_rng(0, 0), res.world_config)
states = run_episode(res.family, ep)
path = export_trajectories(ep, states, "swing_trace.csv", seed=0)
print(f"\nwrote {path}; replaying it reproduces the episode metric:")
print(f"  online:   {metrics(res.spec, ep, states, res.world_config)}")
print(f"  replayed: {replay_metrics(path)}")
