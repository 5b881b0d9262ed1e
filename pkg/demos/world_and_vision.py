"""Walk through the world model: a scene, a step, and what an agent sees.

Run:  python demos/world_and_vision.py
"""

import math

import numpy as np

from lumen.percept import CHANNEL_ORDER, render_observation, topological_info
from lumen.world import (
    AGENT,
    LANDMARK,
    EntityId,
    KinematicAction,
    WorldConfig,
    collisions,
    line_of_sight,
    make_state,
    step_kinematic,
)

cfg = WorldConfig(fov=math.radians(120.0))
ids = [EntityId(AGENT, 0), EntityId(AGENT, 1),
       EntityId(LANDMARK, 0), EntityId(LANDMARK, 1)]
state = make_state(
    ids,
    [(-0.25, 0.0), (0.05, 0.0), (0.3, 0.0), (0.0, 0.25)],
    headings=[0.0, math.pi, 0.0, 0.0],
)

print("Scene: agent0 at (-0.25, 0) looking +x; agent1 at (0.05, 0) looking -x;")
print("landmark0 at (0.3, 0) hides behind agent1 from agent0's viewpoint.\n")

a0, a1 = ids[0], ids[1]
print(f"line_of_sight(agent0, landmark0) = "
      f"{line_of_sight(state, a0, ids[2], cfg)}  (agent1 blocks it)")
print(f"line_of_sight(agent0, agent1)    = "
      f"{line_of_sight(state, a0, a1, cfg)}")

topo = topological_info(state, a0, cfg)
print("\nagent0 visibility bits (landmarks first, then the other agent):")
for e, bit in zip(topo.order, topo.bits):
    print(f"  {e}: {bit}")

obs = render_observation(state, a0, cfg)
print(f"\n1D observation: {obs.k} bins x {obs.bins.shape[1]} channels")
for ci, name in enumerate(CHANNEL_ORDER):
    row = "".join("#" if v else "." for v in obs.bins[:, ci])
    print(f"  {name:>9}: {row}")

# rotate agent0 up toward landmark1 and look again
state = step_kinematic(
    state, {a0: KinematicAction(heading=math.radians(45.0))}, cfg)
obs = render_observation(state, a0, cfg)
print("\nafter rotating agent0 to 45 degrees:")
for ci, name in enumerate(CHANNEL_ORDER):
    row = "".join("#" if v else "." for v in obs.bins[:, ci])
    print(f"  {name:>9}: {row}")

print(f"\ncollisions now: {collisions(state, cfg)}")
