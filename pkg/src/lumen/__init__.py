"""lumen: multi-agent coordination over a simulated event-camera VLC channel.

A 2D world of limited-view agents, four communication regimes (none,
radio, radio-with-ID, event-VLC), a synthetic event-camera physical layer
that realizes the VLC link, from-scratch MADDPG with view-imagination
networks, and a seeded benchmark harness for the five tasks.
"""

__version__ = "0.1.0"

from . import bench, channel, evlc, marl, neural, percept, tasks, training, world

__all__ = ["bench", "channel", "evlc", "marl", "neural", "percept", "tasks",
           "training", "world", "__version__"]
