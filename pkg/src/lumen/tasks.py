"""The five benchmark tasks: initial-state samplers, rewards, metrics.

Goal positions in Goal Crossing are navigation targets, not physical
objects: they neither occlude sight lines nor collide, so they live in
the Episode alongside the world state instead of being entities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

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
    collisions,
    make_state,
    visible,
)

TASK_NAMES = ("simple_spread", "predator_prey", "simple_swing",
              "target_encirclement", "goal_crossing")


class PlacementError(RuntimeError):
    """Rejection sampling could not place an entity without overlap."""


@dataclass(frozen=True)
class TaskSpec:
    name: str
    n_agents: int
    action_kind: str        # rotation | rotation_move | force
    payload_variant: str    # view_topo | velocity | velocity_goal
    fov_deg: float
    n_adversaries: int = 0
    n_landmarks: int = 0
    n_targets: int = 0
    has_goals: bool = False
    episode_length: int = 20
    max_step_rotation: float | None = None
    collision_penalty: float = 1.0
    capture_bonus: float = 10.0
    comm_link_reward: float = 0.01
    arrival_threshold: float = 0.06  # 2 * entity radius
    metric_name: str = ""
    metric_higher_is_better: bool = True

    def world_config(self, **overrides) -> WorldConfig:
        base = dict(
            fov=math.radians(self.fov_deg),
            max_step_rotation=self.max_step_rotation,
            dt=0.1 if self.action_kind == "force" else 1.0,
        )
        base.update(overrides)
        return WorldConfig(**base)

    def entity_ids(self) -> list[EntityId]:
        ids = [EntityId(AGENT, i) for i in range(self.n_agents)]
        ids += [EntityId(ADVERSARY, i) for i in range(self.n_adversaries)]
        ids += [EntityId(LANDMARK, i) for i in range(self.n_landmarks)]
        ids += [EntityId(TARGET, i) for i in range(self.n_targets)]
        return ids


def make_task(name: str, **overrides) -> TaskSpec:
    if name == "simple_spread":
        spec = TaskSpec(
            name=name, n_agents=3, n_landmarks=3, fov_deg=120.0,
            action_kind="rotation_move", payload_variant="view_topo",
            metric_name="conquest_rate", metric_higher_is_better=True)
    elif name == "predator_prey":
        spec = TaskSpec(
            name=name, n_agents=3, n_adversaries=1, fov_deg=120.0,
            action_kind="rotation_move", payload_variant="view_topo",
            metric_name="steps_to_capture", metric_higher_is_better=False)
    elif name == "simple_swing":
        spec = TaskSpec(
            name=name, n_agents=3, n_landmarks=3, fov_deg=80.0,
            action_kind="rotation", payload_variant="view_topo",
            max_step_rotation=math.radians(30.0),
            metric_name="landmarks_in_sight_rate",
            metric_higher_is_better=True)
    elif name == "target_encirclement":
        spec = TaskSpec(
            name=name, n_agents=5, n_targets=1, fov_deg=360.0,
            action_kind="force", payload_variant="velocity",
            metric_name="target_distance", metric_higher_is_better=False)
    elif name == "goal_crossing":
        spec = TaskSpec(
            name=name, n_agents=3, has_goals=True, fov_deg=360.0,
            action_kind="force", payload_variant="velocity_goal",
            metric_name="arrival_rate", metric_higher_is_better=True)
    else:
        raise ValueError(f"unknown task {name!r}")
    return replace(spec, **overrides) if overrides else spec


@dataclass(frozen=True)
class Episode:
    """A task episode's fixed context: initial state plus goal positions."""

    spec: TaskSpec
    state: WorldState
    goals: np.ndarray | None = None  # (n_agents, 2) for goal_crossing


def _sample_clear(rng, config: WorldConfig, placed: list[np.ndarray],
                  sampler, max_tries: int = 1000) -> np.ndarray:
    min_d = 2.0 * config.entity_radius
    for _ in range(max_tries):
        p = sampler()
        if all(np.linalg.norm(p - q) >= min_d for q in placed):
            return p
    raise PlacementError("could not place entity without overlap "
                         f"after {max_tries} attempts")


def _triangle_vertices(config: WorldConfig) -> np.ndarray:
    # Equilateral triangle inscribed in the field, one vertex up.
    r = config.half_side
    angles = np.radians([90.0, 210.0, 330.0])
    return np.stack([r * np.cos(angles), r * np.sin(angles)], axis=1)


def init_episode(spec: TaskSpec, rng: np.random.Generator,
                 config: WorldConfig | None = None) -> Episode:
    """Sample a non-overlapping initial state per the task's own rules."""
    config = config or spec.world_config()
    h = config.half_side - config.entity_radius
    ids = spec.entity_ids()
    # fixed placements claim their spots before anything is sampled
    fixed: dict[EntityId, np.ndarray] = {}
    if spec.name == "predator_prey":
        for eid in ids:
            if eid.cls == ADVERSARY:
                fixed[eid] = np.zeros(2)
    placed: list[np.ndarray] = list(fixed.values())
    positions = []

    def uniform():
        return rng.uniform(-h, h, 2)

    for eid in ids:
        if eid in fixed:
            p = fixed[eid]
        elif spec.name == "simple_swing" and eid.cls == AGENT:
            verts = _triangle_vertices(config)

            def on_edge():
                e = int(rng.integers(0, 3))
                t = rng.uniform()
                return verts[e] + t * (verts[(e + 1) % 3] - verts[e])

            p = _sample_clear(rng, config, placed, on_edge)
        else:
            p = _sample_clear(rng, config, placed, uniform)
        if eid not in fixed:
            placed.append(p)
        positions.append(p)

    headings = np.where(
        [e.cls in (AGENT, ADVERSARY) for e in ids],
        rng.uniform(0.0, TWO_PI, len(ids)),
        0.0,
    )
    state = make_state(ids, np.stack(positions), headings)

    goals = None
    if spec.has_goals:
        goal_list: list[np.ndarray] = []
        for _ in range(spec.n_agents):
            g = _sample_clear(rng, config, goal_list, uniform)
            goal_list.append(g)
        goals = np.stack(goal_list)
    return Episode(spec=spec, state=state, goals=goals)


def _capture(spec: TaskSpec, state: WorldState, config: WorldConfig) -> bool:
    for a, b in collisions(state, config):
        if {a.cls, b.cls} == {AGENT, ADVERSARY}:
            return True
    return False


def reward(
    spec: TaskSpec,
    episode: Episode,
    state: WorldState,
    prev_state: WorldState,
    config: WorldConfig,
    comm_links: dict[EntityId, int] | None = None,
) -> np.ndarray:
    """Per-mover rewards (agents first, then adversaries) for one step."""
    agents = state.agents
    adversaries = state.of_class(ADVERSARY)
    pos = {e: state.positions[state.index_of(e)] for e in state.entities}

    if spec.name == "simple_spread":
        landmarks = state.of_class(LANDMARK)
        total = sum(
            min(np.linalg.norm(pos[l] - pos[a]) for a in agents)
            for l in landmarks
        )
        return np.full(len(agents), -total)

    if spec.name == "predator_prey":
        adv = adversaries[0]
        caught = _capture(spec, state, config)
        out = []
        for a in agents:
            r = -float(np.linalg.norm(pos[a] - pos[adv]))
            if caught:
                r += spec.capture_bonus
            out.append(r)
        nearest = min(float(np.linalg.norm(pos[a] - pos[adv])) for a in agents)
        adv_r = nearest - (spec.capture_bonus if caught else 0.0)
        return np.array(out + [adv_r])

    if spec.name == "simple_swing":
        landmarks = state.of_class(LANDMARK)
        missed = sum(
            not any(visible(state, a, l, config) for a in agents)
            for l in landmarks
        )
        base = -float(missed)
        out = np.full(len(agents), base)
        if comm_links:
            for i, a in enumerate(agents):
                out[i] += spec.comm_link_reward * comm_links.get(a, 0)
        return out

    if spec.name == "target_encirclement":
        target = state.of_class(TARGET)[0]
        total = sum(float(np.linalg.norm(pos[a] - pos[target])) for a in agents)
        n_coll = sum(
            1 for a, b in collisions(state, config)
            if AGENT in (a.cls, b.cls)
        )
        return np.full(len(agents), -total - spec.collision_penalty * n_coll)

    if spec.name == "goal_crossing":
        out = []
        colls = collisions(state, config)
        for i, a in enumerate(agents):
            d = float(np.linalg.norm(pos[a] - episode.goals[i]))
            n = sum(1 for x, y in colls if a in (x, y))
            out.append(-d - spec.collision_penalty * n)
        return np.array(out)

    raise ValueError(f"unknown task {spec.name!r}")


def _greedy_distinct_match(dist: np.ndarray, threshold: float) -> bool:
    """True iff every landmark gets its own agent within the threshold,
    matching nearest pairs first."""
    n_l, n_a = dist.shape
    if n_a < n_l:
        return False
    d = dist.copy()
    for _ in range(n_l):
        k = np.unravel_index(np.argmin(d), d.shape)
        if d[k] > threshold:
            return False
        d[k[0], :] = np.inf
        d[:, k[1]] = np.inf
    return True


def metrics(
    spec: TaskSpec,
    episode: Episode,
    states: list[WorldState],
    config: WorldConfig | None = None,
) -> dict[str, float]:
    """Benchmark metrics over a complete episode trace.

    `states` holds the post-action state of each of the episode's steps.
    """
    if len(states) != spec.episode_length:
        raise ValueError(
            f"trace has {len(states)} steps, expected {spec.episode_length}")
    config = config or spec.world_config()
    final = states[-1]
    agents = final.agents
    out: dict[str, float] = {}

    if spec.name == "simple_spread":
        landmarks = final.of_class(LANDMARK)
        dist = np.array([
            [np.linalg.norm(final.positions[final.index_of(l)]
                            - final.positions[final.index_of(a)])
             for a in agents]
            for l in landmarks
        ])
        out["conquest_rate"] = float(
            _greedy_distinct_match(dist, spec.arrival_threshold))

    if spec.name == "predator_prey":
        step = spec.episode_length
        for k, s in enumerate(states, start=1):
            if _capture(spec, s, config):
                step = k
                break
        out["steps_to_capture"] = float(step)

    if spec.name == "simple_swing":
        landmarks = states[0].of_class(LANDMARK)
        seen = [
            sum(any(visible(s, a, l, config) for a in s.agents)
                for l in landmarks) / len(landmarks)
            for s in states
        ]
        out["landmarks_in_sight_rate"] = float(np.mean(seen))

    if spec.name == "target_encirclement":
        target = final.of_class(TARGET)[0]
        dists = [
            float(np.linalg.norm(final.positions[final.index_of(a)]
                                 - final.positions[final.index_of(target)]))
            for a in agents
        ]
        out["target_distance"] = float(np.mean(dists))

    if spec.name == "goal_crossing":
        arrived = [
            float(np.linalg.norm(final.positions[final.index_of(a)]
                                 - episode.goals[i]))
            <= spec.arrival_threshold
            for i, a in enumerate(agents)
        ]
        out["arrival_rate"] = float(np.mean(arrived))

    return out
