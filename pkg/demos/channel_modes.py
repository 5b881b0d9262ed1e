"""The four communication regimes on one scene, including the physical
event-VLC link standing in for the idealized one.

Run:  python demos/channel_modes.py
"""

import numpy as np

from lumen.channel import (
    ViewTopoMessage,
    exchange,
    physical_exchange,
    quantize_direction,
    serialize_message,
)
from lumen.percept import topological_info
from lumen.tasks import init_episode, make_task

spec = make_task("simple_spread")
cfg = spec.world_config()
episode = init_episode(spec, np.random.default_rng(12), cfg)
state = episode.state

messages = {}
for agent in state.agents:
    heading = float(state.headings[state.index_of(agent)])
    messages[agent] = ViewTopoMessage(
        direction_level=quantize_direction(heading, 36),
        topo=topological_info(state, agent, cfg).bits.copy(),
    )

for mode in ("none", "radio", "radio_id", "evlc"):
    inboxes = exchange(state, mode, messages, cfg)
    print(f"mode {mode}:")
    for agent in state.agents:
        entries = [
            f"(from {e.sender if e.sender else 'anon'}"
            + (f", seen at bin {e.link})" if e.link is not None else ")")
            for e in inboxes[agent]
        ]
        print(f"  {agent}: {entries or 'silence'}")

print("\nphysical event-VLC (modulate -> sensor -> track -> demodulate):")
physical = physical_exchange(state, messages, cfg, "view_topo", topo_len=5)
ideal = exchange(state, "evlc", messages, cfg)
for agent in state.agents:
    got = {(e.sender, serialize_message(e.message).tobytes())
           for e in physical[agent]}
    want = {(e.sender, serialize_message(e.message).tobytes())
            for e in ideal[agent]}
    tag = "matches ideal" if got == want else "DIFFERS"
    print(f"  {agent}: {len(physical[agent])} decoded messages, {tag}")
