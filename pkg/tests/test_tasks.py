import math

import numpy as np
import pytest

from lumen.tasks import (
    Episode,
    PlacementError,
    _triangle_vertices,
    init_episode,
    make_task,
    metrics,
    reward,
)
from lumen.world import (
    ADVERSARY,
    AGENT,
    LANDMARK,
    TARGET,
    EntityId,
    WorldConfig,
    make_state,
)


def test_task_table_settings():
    spread = make_task("simple_spread")
    assert (spread.n_agents, spread.n_landmarks, spread.fov_deg) == (3, 3, 120.0)
    assert spread.action_kind == "rotation_move"
    pp = make_task("predator_prey")
    assert (pp.n_agents, pp.n_adversaries, pp.fov_deg) == (3, 1, 120.0)
    swing = make_task("simple_swing")
    assert swing.fov_deg == 80.0
    assert swing.action_kind == "rotation"
    assert swing.max_step_rotation == pytest.approx(math.radians(30.0))
    te = make_task("target_encirclement")
    assert (te.n_agents, te.n_targets, te.fov_deg) == (5, 1, 360.0)
    assert te.action_kind == "force"
    gc = make_task("goal_crossing")
    assert gc.has_goals and gc.payload_variant == "velocity_goal"
    assert all(make_task(n).episode_length == 20 for n in
               ("simple_spread", "predator_prey", "simple_swing",
                "target_encirclement", "goal_crossing"))


def test_unknown_task_rejected():
    with pytest.raises(ValueError):
        make_task("keep_away")


def test_predator_prey_adversary_at_center():
    spec = make_task("predator_prey")
    rng = np.random.default_rng(0)
    for _ in range(10):
        ep = init_episode(spec, rng)
        adv = ep.state.of_class(ADVERSARY)[0]
        assert np.array_equal(ep.state.positions[ep.state.index_of(adv)],
                              np.zeros(2))


def point_edge_distance(p, a, b):
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0, 1)
    return np.linalg.norm(p - (a + t * ab))


def test_simple_swing_agents_on_triangle_edges():
    spec = make_task("simple_swing")
    cfg = spec.world_config()
    verts = _triangle_vertices(cfg)
    rng = np.random.default_rng(1)
    for _ in range(10):
        ep = init_episode(spec, rng, cfg)
        for a in ep.state.agents:
            p = ep.state.positions[ep.state.index_of(a)]
            d = min(point_edge_distance(p, verts[i], verts[(i + 1) % 3])
                    for i in range(3))
            assert d == pytest.approx(0.0, abs=1e-12)


def test_init_no_overlaps_any_task():
    rng = np.random.default_rng(2)
    for name in ("simple_spread", "predator_prey", "simple_swing",
                 "target_encirclement", "goal_crossing"):
        spec = make_task(name)
        cfg = spec.world_config()
        for _ in range(5):
            ep = init_episode(spec, rng, cfg)
            pos = ep.state.positions
            n = len(pos)
            for i in range(n):
                for j in range(i + 1, n):
                    assert np.linalg.norm(pos[i] - pos[j]) >= 2 * cfg.entity_radius


def test_goal_crossing_goals_positions_distinct():
    spec = make_task("goal_crossing")
    ep = init_episode(spec, np.random.default_rng(3))
    assert ep.goals.shape == (spec.n_agents, 2)
    for i in range(spec.n_agents):
        for j in range(i + 1, spec.n_agents):
            assert np.linalg.norm(ep.goals[i] - ep.goals[j]) > 0


def test_placement_failure_raises():
    spec = make_task("simple_spread", n_agents=3, n_landmarks=3)
    tiny = spec.world_config(field_side=0.13, entity_radius=0.03)
    with pytest.raises(PlacementError):
        for _ in range(50):
            init_episode(spec, np.random.default_rng(4), tiny)


def swing_state(agent_pos, agent_heads, lm_pos):
    ids = [EntityId(AGENT, i) for i in range(len(agent_pos))]
    ids += [EntityId(LANDMARK, i) for i in range(len(lm_pos))]
    return make_state(ids, list(agent_pos) + list(lm_pos),
                      list(agent_heads) + [0.0] * len(lm_pos))


def test_swing_reward_counts_missed_landmarks():
    spec = make_task("simple_swing")
    cfg = spec.world_config()
    # all agents stare at landmark 0; landmarks 1 and 2 are behind them
    state = swing_state(
        [(-0.2, 0.0), (-0.2, 0.1), (-0.2, -0.1)], [0.0, 0.0, 0.0],
        [(0.2, 0.0), (-0.38, 0.3), (-0.38, -0.3)])
    ep = Episode(spec=spec, state=state)
    r = reward(spec, ep, state, state, cfg)
    assert r == pytest.approx([-2.0, -2.0, -2.0])
    # comm reward adds beta per received link
    r = reward(spec, ep, state, state, cfg,
               comm_links={EntityId(AGENT, 0): 2})
    assert r[0] == pytest.approx(-2.0 + 2 * spec.comm_link_reward)
    assert r[1] == pytest.approx(-2.0)


def test_swing_reward_zero_when_all_seen_no_links():
    spec = make_task("simple_swing")
    cfg = spec.world_config()
    state = swing_state(
        [(-0.3, 0.0), (0.0, 0.3), (0.3, -0.3)],
        [0.0, -math.pi / 2, math.pi * 3 / 4],
        [(0.1, 0.0), (0.0, -0.1), (0.05, 0.05)])
    ep = Episode(spec=spec, state=state)
    r = reward(spec, ep, state, state, cfg)
    assert r == pytest.approx([0.0, 0.0, 0.0])


def test_swing_reward_bounds():
    spec = make_task("simple_swing")
    cfg = spec.world_config()
    rng = np.random.default_rng(5)
    for _ in range(20):
        ep = init_episode(spec, rng, cfg)
        r = reward(spec, ep, ep.state, ep.state, cfg,
                   comm_links={a: 2 for a in ep.state.agents})
        assert np.all(r >= -spec.n_landmarks)
        assert np.all(r <= spec.comm_link_reward * (spec.n_agents - 1) * 2)


def test_spread_reward_zero_on_landmarks():
    spec = make_task("simple_spread")
    cfg = spec.world_config()
    pts = [(-0.2, 0.0), (0.0, 0.2), (0.2, -0.1)]
    state = swing_state(pts, [0, 0, 0], pts)
    ep = Episode(spec=spec, state=state)
    assert reward(spec, ep, state, state, cfg) == pytest.approx([0.0] * 3)


def test_spread_reward_total_min_distance():
    spec = make_task("simple_spread")
    cfg = spec.world_config()
    state = swing_state([(0.0, 0.0), (0.3, 0.0), (-0.3, 0.0)], [0, 0, 0],
                        [(0.1, 0.0), (0.3, 0.1), (-0.3, -0.2)])
    ep = Episode(spec=spec, state=state)
    r = reward(spec, ep, state, state, cfg)
    assert r[0] == pytest.approx(-(0.1 + 0.1 + 0.2))
    assert np.all(r == r[0])  # shared


def test_predator_prey_rewards_and_capture():
    spec = make_task("predator_prey")
    cfg = spec.world_config()
    ids = [EntityId(AGENT, 0), EntityId(AGENT, 1), EntityId(AGENT, 2),
           EntityId(ADVERSARY, 0)]
    state = make_state(ids, [(0.05, 0.0), (0.2, 0.0), (0.0, 0.3), (0.0, 0.0)])
    ep = Episode(spec=spec, state=state)
    r = reward(spec, ep, state, state, cfg)
    # agent0 is within 2r of the adversary: capture bonus for the good team
    assert r[0] == pytest.approx(-0.05 + spec.capture_bonus)
    assert r[1] == pytest.approx(-0.2 + spec.capture_bonus)
    assert r[3] == pytest.approx(0.05 - spec.capture_bonus)  # adversary


def test_translation_invariance_of_distance_rewards():
    spec = make_task("simple_spread")
    cfg = spec.world_config(field_side=10.0)  # avoid clamping effects
    rng = np.random.default_rng(6)
    state = swing_state(rng.uniform(-0.3, 0.3, (3, 2)), [0, 0, 0],
                        rng.uniform(-0.3, 0.3, (3, 2)))
    shift = np.array([0.7, -1.1])
    shifted = make_state(list(state.entities), state.positions + shift,
                         state.headings)
    ep = Episode(spec=spec, state=state)
    r0 = reward(spec, ep, state, state, cfg)
    r1 = reward(spec, ep, shifted, shifted, cfg)
    assert r0 == pytest.approx(r1)


def test_target_encirclement_reward():
    spec = make_task("target_encirclement")
    cfg = spec.world_config()
    ids = [EntityId(AGENT, i) for i in range(5)] + [EntityId(TARGET, 0)]
    pos = [(0.2, 0.0), (-0.2, 0.0), (0.0, 0.2), (0.0, -0.2), (0.15, 0.15),
           (0.0, 0.0)]
    state = make_state(ids, pos)
    ep = Episode(spec=spec, state=state)
    r = reward(spec, ep, state, state, cfg)
    dist_sum = 0.2 * 4 + math.hypot(0.15, 0.15)
    assert r[0] == pytest.approx(-dist_sum)


def test_goal_crossing_reward_per_agent():
    spec = make_task("goal_crossing")
    cfg = spec.world_config()
    ids = [EntityId(AGENT, i) for i in range(3)]
    state = make_state(ids, [(0.0, 0.0), (0.2, 0.0), (-0.2, 0.0)])
    goals = np.array([(0.1, 0.0), (0.2, 0.0), (0.2, 0.3)])
    ep = Episode(spec=spec, state=state, goals=goals)
    r = reward(spec, ep, state, state, cfg)
    assert r[0] == pytest.approx(-0.1)
    assert r[1] == pytest.approx(0.0)
    assert r[2] == pytest.approx(-0.5)


def run_static_trace(spec, state, steps=20):
    return [state] * steps


def test_metrics_require_complete_trace():
    spec = make_task("simple_swing")
    ep = init_episode(spec, np.random.default_rng(7))
    with pytest.raises(ValueError, match="expected 20"):
        metrics(spec, ep, [ep.state] * 19)


def test_metrics_capture_step():
    spec = make_task("predator_prey")
    cfg = spec.world_config()
    ids = [EntityId(AGENT, 0), EntityId(AGENT, 1), EntityId(AGENT, 2),
           EntityId(ADVERSARY, 0)]
    far = make_state(ids, [(0.3, 0.0), (0.2, 0.3), (0.0, 0.3), (0.0, 0.0)])
    near = make_state(ids, [(0.05, 0.0), (0.2, 0.3), (0.0, 0.3), (0.0, 0.0)])
    trace = [far] * 6 + [near] + [far] * 13  # hand-built capture at step 7
    ep = Episode(spec=spec, state=far)
    assert metrics(spec, ep, trace, cfg)["steps_to_capture"] == 7.0
    assert metrics(spec, ep, [far] * 20, cfg)["steps_to_capture"] == 20.0


def test_metrics_landmarks_rate_one_when_always_visible():
    spec = make_task("simple_swing")
    cfg = spec.world_config()
    state = swing_state(
        [(-0.3, 0.0), (0.0, 0.3), (0.3, -0.3)],
        [0.0, -math.pi / 2, math.pi * 3 / 4],
        [(0.1, 0.0), (0.0, -0.1), (0.05, 0.05)])
    ep = Episode(spec=spec, state=state)
    m = metrics(spec, ep, run_static_trace(spec, state), cfg)
    assert m["landmarks_in_sight_rate"] == 1.0


def test_metrics_arrival_rate_zero():
    spec = make_task("goal_crossing")
    ids = [EntityId(AGENT, i) for i in range(3)]
    state = make_state(ids, [(0.0, 0.0), (0.2, 0.0), (-0.2, 0.0)])
    ep = Episode(spec=spec, state=state,
                 goals=np.array([(0.3, 0.3), (-0.3, 0.3), (0.3, -0.3)]))
    m = metrics(spec, ep, run_static_trace(spec, state))
    assert m["arrival_rate"] == 0.0


def test_metrics_conquest_requires_distinct_agents():
    spec = make_task("simple_spread")
    cfg = spec.world_config()
    # two landmarks share one nearby agent: conquest fails
    state = swing_state([(0.1, 0.0), (0.5, 0.5), (-0.5, -0.5)], [0, 0, 0],
                        [(0.11, 0.0), (0.09, 0.0), (-0.5, -0.45)])
    ep = Episode(spec=spec, state=state)
    assert metrics(spec, ep, run_static_trace(spec, state), cfg)[
        "conquest_rate"] == 0.0
    # distinct agents on each landmark: conquest succeeds
    pts = [(0.1, 0.0), (0.0, 0.2), (-0.2, -0.2)]
    state = swing_state(pts, [0, 0, 0],
                        [(0.12, 0.0), (0.02, 0.2), (-0.22, -0.2)])
    ep = Episode(spec=spec, state=state)
    assert metrics(spec, ep, run_static_trace(spec, state), cfg)[
        "conquest_rate"] == 1.0
