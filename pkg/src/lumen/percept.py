"""1D visual observation and per-agent topological visibility bits.

The observation divides the field of view into K equal angular bins and
casts one ray through each bin center. Only entities that are visible to
the observer (center bearing inside the FOV and an unoccluded sight line
to the center) participate; the nearest such disc hit by a ray sets that
entity's class channel in the bin. A trailing channel is reserved for
VLC signal markers and is filled by the channel layer, not here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .world import (
    ADVERSARY,
    AGENT,
    LANDMARK,
    TARGET,
    TWO_PI,
    EntityId,
    WorldConfig,
    WorldState,
    angle_diff,
    bearing,
    visible,
)

# Channel layout: one channel per entity class, plus the VLC marker channel.
CHANNEL_ORDER = (AGENT, ADVERSARY, LANDMARK, TARGET)
VLC_CHANNEL = len(CHANNEL_ORDER)
N_CHANNELS = len(CHANNEL_ORDER) + 1

# Canonical entity order for topological bits: landmarks, targets, agents,
# adversaries, each ascending by index, excluding the observer.
_TOPO_CLASS_ORDER = (LANDMARK, TARGET, AGENT, ADVERSARY)


def bin_count(fov: float) -> int:
    """Appendix-rule bin count: 90 for FOV <= 120 degrees, else 360."""
    if fov <= math.radians(120.0) + 1e-12:
        return 90
    return 360


def bin_of_bearing(fov: float, heading: float, target_bearing: float) -> int | None:
    """Index of the angular bin containing a bearing, or None if outside."""
    k = bin_count(fov)
    rel = angle_diff(target_bearing, heading)
    if fov < TWO_PI and abs(rel) > fov / 2.0 + 1e-9:
        return None
    width = fov / k
    idx = int(math.floor((rel + fov / 2.0) / width))
    return min(max(idx, 0), k - 1)


@dataclass(frozen=True)
class Observation1D:
    """K x C binary image; hit_entity[k] is the state index drawn in bin k."""

    bins: np.ndarray        # (K, N_CHANNELS) uint8
    hit_entity: np.ndarray  # (K,) int32, -1 where no hit

    @property
    def k(self) -> int:
        return self.bins.shape[0]


@dataclass(frozen=True)
class TopoBits:
    """Visibility bit per non-self entity, in canonical order."""

    bits: np.ndarray               # (E,) uint8
    order: tuple[EntityId, ...]

    def bit(self, entity: EntityId) -> int:
        return int(self.bits[self.order.index(entity)])


def topo_order(state: WorldState, agent: EntityId) -> tuple[EntityId, ...]:
    ordered = []
    for cls in _TOPO_CLASS_ORDER:
        ordered.extend(
            sorted((e for e in state.entities if e.cls == cls and e != agent),
                   key=lambda e: e.index)
        )
    return tuple(ordered)


def topological_info(
    state: WorldState, agent: EntityId, config: WorldConfig
) -> TopoBits:
    """Bit e = 1 iff entity e is within the FOV with a clear sight line."""
    order = topo_order(state, agent)
    bits = np.zeros(len(order), dtype=np.uint8)
    for i, e in enumerate(order):
        if visible(state, agent, e, config):
            bits[i] = 1
    return TopoBits(bits=bits, order=order)


def render_observation(
    state: WorldState, agent: EntityId, config: WorldConfig
) -> Observation1D:
    """Ray-cast the K bin-center rays against the visible entity discs."""
    k = bin_count(config.fov)
    obs = np.zeros((k, N_CHANNELS), dtype=np.uint8)
    hits = np.full(k, -1, dtype=np.int32)

    ai = state.index_of(agent)
    origin = state.positions[ai]
    heading = float(state.headings[ai])
    r = config.entity_radius
    max_dist = config.diagonal

    vis = [e for e in state.entities if e != agent and visible(state, agent, e, config)]
    if not vis:
        return Observation1D(bins=obs, hit_entity=hits)

    idx = np.array([state.index_of(e) for e in vis])
    delta = state.positions[idx] - origin
    dist = np.linalg.norm(delta, axis=1)
    bear = np.arctan2(delta[:, 1], delta[:, 0])

    width = config.fov / k
    ray_rel = -config.fov / 2.0 + (np.arange(k) + 0.5) * width  # offsets from heading
    ray_abs = heading + ray_rel

    # Polar ray-disc intersection. For a disc at distance d and bearing b,
    # a ray at angle a hits iff |wrap(a-b)| <= asin(r/d); the near root is
    # t = d*cos(D) - sqrt(r^2 - d^2 sin^2 D). Overlapping the observer
    # (d <= r) counts as a hit at t = 0 from every direction.
    t_hit = np.full((k, len(vis)), np.inf)
    for j in range(len(vis)):
        d = dist[j]
        if d <= r:
            t_hit[:, j] = 0.0
            continue
        rel = np.mod(ray_abs - bear[j] + math.pi, TWO_PI) - math.pi
        sin_rel = np.sin(rel)
        disc = r * r - (d * sin_rel) ** 2
        ok = disc >= 0.0
        t = d * np.cos(rel[ok]) - np.sqrt(disc[ok])
        good = (t >= 0.0) & (t <= max_dist)
        cols = np.where(ok)[0][good]
        t_hit[cols, j] = t[good]

    nearest = np.argmin(t_hit, axis=1)
    hit_mask = np.isfinite(t_hit[np.arange(k), nearest])
    for b in np.where(hit_mask)[0]:
        e = vis[nearest[b]]
        obs[b, CHANNEL_ORDER.index(e.cls)] = 1
        hits[b] = idx[nearest[b]]
    return Observation1D(bins=obs, hit_entity=hits)


def attach_vlc_links(obs: Observation1D, link_bins: list[int]) -> Observation1D:
    """Return a copy of the observation with VLC markers set at link bins."""
    bins = obs.bins.copy()
    for b in link_bins:
        bins[b, VLC_CHANNEL] = 1
    return Observation1D(bins=bins, hit_entity=obs.hit_entity.copy())


def link_bin(
    state: WorldState, receiver: EntityId, sender: EntityId, config: WorldConfig
) -> int | None:
    """Observation bin holding the sender's disc-center bearing, if any."""
    heading = float(state.headings[state.index_of(receiver)])
    return bin_of_bearing(config.fov, heading, bearing(state, receiver, sender))
