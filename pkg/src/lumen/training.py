"""Task-family trainers and the training loop.

Three model families cover the five tasks:

* swing: rotation-only agents with compact history features; the critic
  is the f-augmented Simple Swing critic (MLP critic under the ablation).
* spread_pp: Simple Spread and Predator-Prey; movement is learned with
  MADDPG over the 1D visual observation through a shared conv trunk,
  while the view direction is chosen each step by the f/g imagination
  networks trained online from the replay stream.
* force: Target Encirclement and Goal Crossing; force actions from a
  conv trunk shared between actor and critic, with received messages
  written into the observation's channel axis (event-VLC) or appended as
  flat features (radio).

The shared conv trunk is trained by the critic's TD loss; actor heads
treat trunk features as given. Adversaries do not communicate by default
and aim their view along their motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import channel
from .channel import (
    InboxEntry,
    Message,
    VelocityGoalMessage,
    VelocityMessage,
    ViewTopoMessage,
    dequantize_direction,
    exchange,
    physical_exchange,
    quantize_direction,
)
from .marl import (
    AgentNets,
    HistoryBuffer,
    MlpCritic,
    ReplayBuffer,
    SliceActor,
    SwingCritic,
    TrainConfig,
    maddpg_update,
    next_topo_loss,
    reward_improved,
    select_view_direction,
)
from .neural import Adam, Conv1dEncoder, Mlp, copy_params, zero_grads
from .percept import (
    N_CHANNELS,
    VLC_CHANNEL,
    attach_vlc_links,
    bin_count,
    render_observation,
    topological_info,
)
from .tasks import Episode, TaskSpec, init_episode, make_task, metrics, reward
from .world import (
    ADVERSARY,
    AGENT,
    EntityId,
    KinematicAction,
    WorldConfig,
    WorldState,
    step_dynamic,
    step_kinematic,
)


def _clone_mlp(rng_shape_twin: Mlp, source: Mlp) -> Mlp:
    copy_params(rng_shape_twin.params(), source.params())
    return rng_shape_twin


class ExplorationNoise:
    """Per-agent action noise: white Gaussian or an Ornstein-Uhlenbeck
    walk (temporally correlated, so exploratory rotations persist across
    steps and expose multi-step consequences)."""

    def __init__(self, kind: str, n_agents: int, act_dim: int,
                 theta: float = 0.15):
        if kind not in ("gaussian", "ou"):
            raise ValueError(f"unknown noise kind {kind!r}")
        self.kind = kind
        self.theta = theta
        self.shape = (n_agents, act_dim)
        self.state = np.zeros(self.shape)

    def reset(self) -> None:
        self.state = np.zeros(self.shape)

    def sample(self, sigma: float, rng: np.random.Generator | None) -> np.ndarray:
        if sigma <= 0.0 or rng is None:
            return np.zeros(self.shape)
        if self.kind == "gaussian":
            return sigma * rng.normal(size=self.shape)
        self.state = ((1.0 - self.theta) * self.state
                      + sigma * rng.normal(size=self.shape))
        return self.state


def _received_slots(receiver: EntityId, entries: list[InboxEntry],
                    participants: list[EntityId], comm_mode: str,
                    n_levels: int):
    """Per-peer (direction, topo) slots for the history buffer; plain
    radio fills slots in the payload-sorted arrival order because senders
    are anonymous."""
    others = [a for a in participants if a != receiver]
    slots: list[tuple[float | None, np.ndarray | None]] = []
    if comm_mode == "radio":
        for k in range(len(others)):
            if k < len(entries):
                m = entries[k].message
                slots.append((dequantize_direction(m.direction_level,
                                                   n_levels), m.topo))
            else:
                slots.append((None, None))
        return slots
    by_sender = {e.sender: e.message for e in entries}
    for o in others:
        if o in by_sender:
            m = by_sender[o]
            slots.append((dequantize_direction(m.direction_level, n_levels),
                          m.topo))
        else:
            slots.append((None, None))
    return slots


class ConvActor:
    """Policy head over shared-trunk features plus flat extras.

    The trunk belongs to the critic's optimizer; the actor head treats
    trunk features as constants, so backward touches the head alone.
    """

    def __init__(self, trunk: Conv1dEncoder, head: Mlp, img_shape, n_extra):
        self.trunk = trunk
        self.head = head
        self.img_shape = img_shape  # (L, C)
        self.n_extra = n_extra

    def _split(self, obs_flat: np.ndarray):
        l, c = self.img_shape
        img = obs_flat[:, :l * c].reshape(-1, l, c).astype(np.float64)
        extras = obs_flat[:, l * c:].astype(np.float64)
        return img, extras

    def forward(self, obs_flat: np.ndarray) -> np.ndarray:
        img, extras = self._split(obs_flat)
        feats = self.trunk.forward(img)
        return self.head.forward(np.concatenate([feats, extras], axis=1))

    def backward(self, grad_out: np.ndarray) -> None:
        self.head.backward(grad_out)

    def params(self):
        return self.head.params()

    def grads(self):
        return self.head.grads()


class ConvJointCritic:
    """Centralized Q: the agent's trunk encodes every agent's image, then
    an MLP head consumes [features..., extras..., actions...]."""

    def __init__(self, trunk: Conv1dEncoder, head: Mlp, img_shape,
                 n_extras: list[int], act_dims: list[int]):
        self.trunk = trunk
        self.head = head
        self.img_shape = img_shape
        self.n_extras = list(n_extras)
        self.act_dims = list(act_dims)
        self._feat_dim = None
        self._n_agents = len(act_dims)

    def q_forward(self, obs_list, act_list) -> np.ndarray:
        l, c = self.img_shape
        n, b = len(obs_list), obs_list[0].shape[0]
        imgs = np.concatenate(
            [o[:, :l * c].reshape(b, l, c) for o in obs_list], axis=0
        ).astype(np.float64)
        feats = self.trunk.forward(imgs)
        self._feat_dim = feats.shape[1]
        parts = [feats[i * b:(i + 1) * b] for i in range(n)]
        parts += [obs_list[i][:, l * c:].astype(np.float64) for i in range(n)]
        parts += [np.asarray(a, dtype=np.float64) for a in act_list]
        return self.head.forward(np.concatenate(parts, axis=1))

    def q_backward(self, grad_q, param_grads: bool = True) -> list[np.ndarray]:
        gx = self.head.backward(grad_q)
        n = self._n_agents
        f = self._feat_dim
        offset = n * f + sum(self.n_extras)
        act_grads = []
        for d in self.act_dims:
            act_grads.append(gx[:, offset:offset + d])
            offset += d
        if param_grads:
            gfeat = np.concatenate(
                [gx[:, i * f:(i + 1) * f] for i in range(n)], axis=0)
            self.trunk.backward(gfeat)
        return act_grads

    def params(self):
        return self.trunk.params() + self.head.params()

    def grads(self):
        return self.trunk.grads() + self.head.grads()


def _pool_bins(img: np.ndarray, pool: int) -> np.ndarray:
    """Max-pool the bin axis by an integer factor (binary channels stay
    binary; a pooled bin is set when any member bin is set)."""
    if pool <= 1:
        return img
    k, c = img.shape
    if k % pool:
        raise ValueError(f"pool {pool} must divide bin count {k}")
    return img.reshape(k // pool, pool, c).max(axis=1)


# ---------------------------------------------------------------------------
# swing family


class SwingFamily:
    """Rotation-only agents on history features with the f-critic."""

    act_dim = 1

    def __init__(self, spec: TaskSpec, comm_mode: str, wc: WorldConfig,
                 tc: TrainConfig, rng: np.random.Generator):
        self.spec = spec
        self.comm_mode = comm_mode
        self.wc = wc
        self.tc = tc
        self.movers = [EntityId(AGENT, i) for i in range(spec.n_agents)]
        template = spec.entity_ids()
        self.topo_len = len(template) - 1
        self.n_peers = spec.n_agents - 1
        self.histories = {
            a: HistoryBuffer(self.n_peers, self.topo_len, tc.history_frames)
            for a in self.movers
        }
        frame_dim = self.histories[self.movers[0]].frame_dim
        self.obs_dim = frame_dim * tc.history_frames
        # the actor and value head read the newest swing_obs_frames frames;
        # the replay keeps the full history for the critic's f head
        n_read = min(tc.swing_obs_frames, tc.history_frames)
        self.obs_slice = slice((tc.history_frames - n_read) * frame_dim,
                               self.obs_dim)
        self.agents = self._build_agents(rng)
        self._n_updates = 0

    def _build_agents(self, rng: np.random.Generator) -> list[AgentNets]:
        tc = self.tc
        n = len(self.movers)
        obs_dims = [self.obs_dim] * n
        act_dims = [self.act_dim] * n
        read_dim = len(range(*self.obs_slice.indices(self.obs_dim)))
        agents = []
        for i in range(n):
            actor = SliceActor(
                Mlp(rng, read_dim, [tc.mlp_width] * tc.mlp_layers,
                    self.act_dim, out_activation="tanh"), self.obs_slice)
            actor_t = SliceActor(
                Mlp(rng, read_dim, [tc.mlp_width] * tc.mlp_layers,
                    self.act_dim, out_activation="tanh"), self.obs_slice)
            copy_params(actor_t.params(), actor.params())
            if tc.f_predict:
                critic = SwingCritic(rng, obs_dims, act_dims, i, self.topo_len,
                                     tc.mlp_width, tc.mlp_layers,
                                     tc.fg_width, tc.fg_layers,
                                     obs_slice=self.obs_slice)
                critic_t = SwingCritic(rng, obs_dims, act_dims, i,
                                       self.topo_len, tc.mlp_width,
                                       tc.mlp_layers, tc.fg_width,
                                       tc.fg_layers, obs_slice=self.obs_slice)
            else:
                critic = MlpCritic(rng, obs_dims, act_dims, tc.mlp_width,
                                   tc.mlp_layers, obs_slice=self.obs_slice)
                critic_t = MlpCritic(rng, obs_dims, act_dims, tc.mlp_width,
                                     tc.mlp_layers, obs_slice=self.obs_slice)
            copy_params(critic_t.params(), critic.params())
            ag = AgentNets(
                actor=actor, actor_target=actor_t,
                critic=critic, critic_target=critic_t,
                opt_actor=Adam(actor.params(), tc.actor_lr),
                opt_critic=Adam(critic.params(), tc.critic_lr),
            )
            if tc.f_predict:
                ag.opt_f = Adam(critic.f.params(), tc.f_lr)
            agents.append(ag)
        return agents

    def reset_episode(self, episode: Episode) -> None:
        for h in self.histories.values():
            h.reset()

    def build_messages(self, state: WorldState) -> dict[EntityId, Message]:
        out = {}
        for a in self.movers:
            heading = float(state.headings[state.index_of(a)])
            topo = topological_info(state, a, self.wc)
            out[a] = ViewTopoMessage(
                direction_level=quantize_direction(
                    heading, self.tc.n_direction_levels),
                topo=topo.bits.copy(),
            )
        return out

    def deliver(self, state, msgs):
        if self.tc.evlc_physical and self.comm_mode == "evlc":
            return physical_exchange(state, msgs, self.wc,
                                     self.spec.payload_variant, self.topo_len)
        return exchange(state, self.comm_mode, msgs, self.wc)

    def observe(self, state: WorldState,
                inboxes: dict[EntityId, list[InboxEntry]]) -> list[np.ndarray]:
        obs = []
        for a in self.movers:
            heading = float(state.headings[state.index_of(a)])
            topo = topological_info(state, a, self.wc)
            self.histories[a].push(
                heading, topo.bits.astype(np.float64),
                _received_slots(a, inboxes.get(a, []), self.movers,
                                self.comm_mode, self.tc.n_direction_levels))
            obs.append(self.histories[a].features())
        return obs

    def step_actions(self, state, obs_list, sigma, rng):
        acts = []
        world_actions = {}
        for i, a in enumerate(self.movers):
            raw = self.agents[i].actor.forward(obs_list[i][None])[0]
            raw = _gaussian_clipped(raw, sigma, rng)
            acts.append(raw)
            heading = float(state.headings[state.index_of(a)])
            delta = float(raw[0]) * self.wc.max_step_rotation
            world_actions[a] = KinematicAction(heading=heading + delta)
        return acts, world_actions, {}

    def world_step(self, state, world_actions):
        return step_kinematic(state, world_actions, self.wc)

    def attach_next(self, pending: dict, next_obs: list[np.ndarray]) -> None:
        pass

    def comm_link_counts(self, inboxes) -> dict[EntityId, int]:
        return {a: len(inboxes.get(a, [])) for a in self.movers}

    def update(self, replay: ReplayBuffer) -> dict[str, float]:
        batch = replay.sample(self.tc.batch_size)
        self._n_updates += 1
        losses = maddpg_update(batch, self.agents, self.tc.gamma, self.tc.tau,
                               update_actor=self._n_updates
                               % self.tc.actor_delay == 0)
        if self.tc.f_predict:
            t = self.tc.history_frames - 1
            frame_dim = self.histories[self.movers[0]].frame_dim
            lo = t * frame_dim + 2
            for i, ag in enumerate(self.agents):
                s_true = batch["next_obs"][i][:, lo:lo + self.topo_len]
                s_hat = ag.critic.predict_next_topo(batch["obs"][i],
                                                    batch["act"][i])
                losses[f"f_{i}"] = next_topo_loss(s_true, s_hat)
                zero_grads(ag.critic.f)
                grad = 2.0 * (s_hat - s_true) / s_hat.shape[0]
                ag.critic.f_backward(grad)
                ag.opt_f.step(ag.critic.f.grads())
        return losses

    def named_nets(self) -> dict:
        out = {}
        for i, ag in enumerate(self.agents):
            out[f"actor_{i}"] = ag.actor
            out[f"actor_target_{i}"] = ag.actor_target
            out[f"critic_{i}"] = ag.critic
            out[f"critic_target_{i}"] = ag.critic_target
        return out


# ---------------------------------------------------------------------------
# spread / predator-prey family


class SpreadPPFamily:
    """Kinematic view+move tasks: MADDPG movement over conv features with
    f/g view-direction selection for the communicating agents."""

    act_dim = 2

    def __init__(self, spec: TaskSpec, comm_mode: str, wc: WorldConfig,
                 tc: TrainConfig, rng: np.random.Generator):
        self.spec = spec
        self.comm_mode = comm_mode
        self.wc = wc
        self.tc = tc
        self.good = [EntityId(AGENT, i) for i in range(spec.n_agents)]
        self.advs = [EntityId(ADVERSARY, i) for i in range(spec.n_adversaries)]
        self.movers = self.good + self.advs
        self.topo_len = len(spec.entity_ids()) - 1
        self.n_peers = spec.n_agents - 1
        self.histories = {
            a: HistoryBuffer(self.n_peers, self.topo_len, tc.history_frames)
            for a in self.good
        }
        self.k_bins = bin_count(wc.fov)
        self.k_pooled = self.k_bins // max(1, tc.obs_pool)
        self.img_shape = (self.k_pooled, N_CHANNELS)
        self.n_extra = 2  # cos/sin of own heading
        self.obs_dim = self.k_pooled * N_CHANNELS + self.n_extra
        self.hist_dim = (self.histories[self.good[0]].frame_dim
                         * tc.history_frames)
        self.agents = self._build_agents(rng)
        self._prev_reward: np.ndarray | None = None
        self._n_updates = 0

    def _build_agents(self, rng) -> list[AgentNets]:
        tc = self.tc
        n = len(self.movers)
        obs_dims = [self.obs_dim] * n
        act_dims = [self.act_dim] * n
        agents = []
        feat_dim = self.k_pooled * tc.conv_filters
        for i, mover in enumerate(self.movers):
            trunk = Conv1dEncoder(rng, N_CHANNELS, tc.conv_filters,
                                  tc.conv_layers, tc.conv_kernel)
            trunk_t = Conv1dEncoder(rng, N_CHANNELS, tc.conv_filters,
                                    tc.conv_layers, tc.conv_kernel)
            head = Mlp(rng, feat_dim + self.n_extra,
                       [tc.mlp_width] * tc.mlp_layers, self.act_dim,
                       out_activation="tanh")
            head_t = Mlp(rng, feat_dim + self.n_extra,
                         [tc.mlp_width] * tc.mlp_layers, self.act_dim,
                         out_activation="tanh")
            c_in = n * feat_dim + n * self.n_extra + n * self.act_dim
            c_head = Mlp(rng, c_in, [tc.mlp_width] * tc.mlp_layers, 1)
            c_head_t = Mlp(rng, c_in, [tc.mlp_width] * tc.mlp_layers, 1)
            actor = ConvActor(trunk, head, self.img_shape, self.n_extra)
            actor_t = ConvActor(trunk_t, head_t, self.img_shape, self.n_extra)
            critic = ConvJointCritic(trunk, c_head, self.img_shape,
                                     [self.n_extra] * n, act_dims)
            critic_t = ConvJointCritic(trunk_t, c_head_t, self.img_shape,
                                       [self.n_extra] * n, act_dims)
            copy_params(actor_t.params(), actor.params())
            copy_params(critic_t.params(), critic.params())
            ag = AgentNets(
                actor=actor, actor_target=actor_t,
                critic=critic, critic_target=critic_t,
                opt_actor=Adam(actor.params(), tc.actor_lr),
                opt_critic=Adam(critic.params(), tc.critic_lr),
            )
            if mover.cls == AGENT:
                f_net = Mlp(rng, self.hist_dim + 2,
                            [tc.fg_width] * tc.fg_layers, self.topo_len,
                            out_activation="sigmoid")
                g_net = Mlp(rng, self.hist_dim,
                            [tc.fg_width] * tc.fg_layers, 1,
                            out_activation="sigmoid")
                ag.f_net, ag.g_net = f_net, g_net
                ag.opt_f = Adam(f_net.params(), tc.f_lr)
                ag.opt_g = Adam(g_net.params(), tc.g_lr)
            agents.append(ag)
        return agents

    def reset_episode(self, episode: Episode) -> None:
        for h in self.histories.values():
            h.reset()
        self._prev_reward = None

    def build_messages(self, state) -> dict[EntityId, Message]:
        out = {}
        for a in self.good:
            heading = float(state.headings[state.index_of(a)])
            topo = topological_info(state, a, self.wc)
            out[a] = ViewTopoMessage(
                direction_level=quantize_direction(
                    heading, self.tc.n_direction_levels),
                topo=topo.bits.copy(),
            )
        return out

    def deliver(self, state, msgs):
        if self.tc.evlc_physical and self.comm_mode == "evlc":
            return physical_exchange(state, msgs, self.wc,
                                     self.spec.payload_variant, self.topo_len)
        return exchange(state, self.comm_mode, msgs, self.wc)

    def observe(self, state, inboxes) -> list[np.ndarray]:
        obs = []
        for a in self.movers:
            rendered = render_observation(state, a, self.wc)
            if a.cls == AGENT:
                entries = inboxes.get(a, [])
                if self.comm_mode == "evlc":
                    links = [e.link for e in entries if e.link is not None]
                    rendered = attach_vlc_links(rendered, links)
                heading = float(state.headings[state.index_of(a)])
                topo = topological_info(state, a, self.wc)
                self.histories[a].push(
                    heading, topo.bits.astype(np.float64),
                    _received_slots(a, entries, self.good, self.comm_mode,
                                    self.tc.n_direction_levels))
            img = _pool_bins(rendered.bins.astype(np.float64),
                             self.tc.obs_pool)
            heading = float(state.headings[state.index_of(a)])
            flat = np.concatenate(
                [img.ravel(), [math.cos(heading), math.sin(heading)]])
            obs.append(flat.astype(np.float32))
        return obs

    def step_actions(self, state, obs_list, sigma, rng):
        acts = []
        world_actions = {}
        aux_f_in = []
        for i, mover in enumerate(self.movers):
            raw = self.agents[i].actor.forward(obs_list[i][None])[0]
            raw = _gaussian_clipped(raw, sigma, rng)
            acts.append(raw)
            move = raw * (self.wc.max_step_move / math.sqrt(2.0))
            heading = float(state.headings[state.index_of(mover)])
            if mover.cls == AGENT:
                hist = self.histories[mover]
                theta = select_view_direction(
                    self.agents[i].f_net, self.agents[i].g_net, hist, heading,
                    self.spec.max_step_rotation,
                    self.tc.n_direction_levels)
                aux_f_in.append(np.concatenate(
                    [hist.features(), [math.cos(theta), math.sin(theta)]]))
            else:
                # adversaries face where they move
                theta = (math.atan2(move[1], move[0])
                         if np.linalg.norm(move) > 1e-9 else heading)
            world_actions[mover] = KinematicAction(
                heading=theta, move=(float(move[0]), float(move[1])))
        return acts, world_actions, {"f_in": np.stack(aux_f_in)}

    def world_step(self, state, world_actions):
        return step_kinematic(state, world_actions, self.wc)

    def attach_next(self, pending: dict, next_obs) -> None:
        """Complete the f/g supervision once the post-step frame exists."""
        n_good = len(self.good)
        rew = pending["rew"][:n_good]
        topo_now = np.stack([
            self._newest_own_topo(self.histories[a]) for a in self.good
        ])
        g_in = np.stack([self.histories[a].features() for a in self.good])
        if self._prev_reward is None:
            g_label = np.zeros(n_good)
            g_mask = np.zeros(n_good)
        else:
            g_label = reward_improved(rew, self._prev_reward,
                                      self.tc.delta_r).astype(np.float64)
            g_mask = np.ones(n_good)
        self._prev_reward = rew.copy()
        pending["aux"] = {
            "f_in": pending["aux"]["f_in"],
            "f_target": topo_now,
            "g_in": g_in,
            "g_label": g_label,
            "g_mask": g_mask,
        }

    def _newest_own_topo(self, hist: HistoryBuffer) -> np.ndarray:
        feats = hist.features()
        lo = (self.tc.history_frames - 1) * hist.frame_dim + 2
        return feats[lo:lo + self.topo_len]

    def comm_link_counts(self, inboxes) -> dict[EntityId, int]:
        return {a: len(inboxes.get(a, [])) for a in self.good}

    def update(self, replay: ReplayBuffer) -> dict[str, float]:
        batch = replay.sample(self.tc.batch_size)
        self._n_updates += 1
        losses = maddpg_update(batch, self.agents, self.tc.gamma, self.tc.tau,
                               update_actor=self._n_updates
                               % self.tc.actor_delay == 0)
        aux = batch["aux"]
        for i, a in enumerate(self.good):
            ag = self.agents[i]
            f_in = aux["f_in"][:, i]
            s_true = aux["f_target"][:, i]
            s_hat = ag.f_net.forward(f_in)
            losses[f"f_{i}"] = next_topo_loss(s_true, s_hat)
            zero_grads(ag.f_net)
            ag.f_net.backward(2.0 * (s_hat - s_true) / s_hat.shape[0])
            ag.opt_f.step(ag.f_net.grads())

            mask = aux["g_mask"][:, i]
            if mask.sum() > 0:
                g_in = aux["g_in"][:, i]
                label = aux["g_label"][:, i:i + 1]
                p = ag.g_net.forward(g_in)
                eps = 1e-7
                pc = np.clip(p, eps, 1.0 - eps)
                w = mask[:, None] / mask.sum()
                losses[f"g_{i}"] = float(
                    -np.sum(w * (label * np.log(pc)
                                 + (1 - label) * np.log(1 - pc))))
                zero_grads(ag.g_net)
                # d(BCE)/dp; the sigmoid output layer folds in p(1-p)
                ag.g_net.backward(w * (pc - label) / (pc * (1.0 - pc)))
                ag.opt_g.step(ag.g_net.grads())
        return losses

    def named_nets(self) -> dict:
        out = {}
        for i, ag in enumerate(self.agents):
            out[f"actor_{i}"] = ag.actor
            out[f"actor_target_{i}"] = ag.actor_target
            out[f"critic_{i}"] = ag.critic
            out[f"critic_target_{i}"] = ag.critic_target
            if ag.f_net is not None:
                out[f"f_{i}"] = ag.f_net
                out[f"g_{i}"] = ag.g_net
        return out


# ---------------------------------------------------------------------------
# force family (target encirclement / goal crossing)


class ForceFamily:
    """Force-actuated omnidirectional tasks with messages merged into the
    observation: per-bin channels for event-VLC, flat features for radio."""

    act_dim = 2

    def __init__(self, spec: TaskSpec, comm_mode: str, wc: WorldConfig,
                 tc: TrainConfig, rng: np.random.Generator):
        self.spec = spec
        self.comm_mode = comm_mode
        self.wc = wc
        self.tc = tc
        self.movers = [EntityId(AGENT, i) for i in range(spec.n_agents)]
        self.msg_dim = 2 if spec.payload_variant == "velocity" else 4
        self.k_bins = bin_count(wc.fov)
        self.k_pooled = self.k_bins // max(1, tc.obs_pool)
        self.msg_channels = self.msg_dim if comm_mode == "evlc" else 0
        self.n_channels = N_CHANNELS + self.msg_channels
        self.img_shape = (self.k_pooled, self.n_channels)
        n_others = spec.n_agents - 1
        self.n_extra = 2 + (2 if spec.has_goals else 0)
        if comm_mode in ("radio", "radio_id"):
            self.n_extra += self.msg_dim * n_others
        self.obs_dim = self.k_pooled * self.n_channels + self.n_extra
        self.agents = self._build_agents(rng)
        self.episode: Episode | None = None
        self._n_updates = 0

    def _build_agents(self, rng) -> list[AgentNets]:
        tc = self.tc
        n = len(self.movers)
        act_dims = [self.act_dim] * n
        feat_dim = self.k_pooled * tc.conv_filters
        agents = []
        for i in range(n):
            trunk = Conv1dEncoder(rng, self.n_channels, tc.conv_filters,
                                  tc.conv_layers, tc.conv_kernel)
            trunk_t = Conv1dEncoder(rng, self.n_channels, tc.conv_filters,
                                    tc.conv_layers, tc.conv_kernel)
            head = Mlp(rng, feat_dim + self.n_extra,
                       [tc.mlp_width] * tc.mlp_layers, self.act_dim,
                       out_activation="tanh")
            head_t = Mlp(rng, feat_dim + self.n_extra,
                         [tc.mlp_width] * tc.mlp_layers, self.act_dim,
                         out_activation="tanh")
            c_in = n * (feat_dim + self.n_extra) + n * self.act_dim
            c_head = Mlp(rng, c_in, [tc.mlp_width] * tc.mlp_layers, 1)
            c_head_t = Mlp(rng, c_in, [tc.mlp_width] * tc.mlp_layers, 1)
            actor = ConvActor(trunk, head, self.img_shape, self.n_extra)
            actor_t = ConvActor(trunk_t, head_t, self.img_shape, self.n_extra)
            critic = ConvJointCritic(trunk, c_head, self.img_shape,
                                     [self.n_extra] * n, act_dims)
            critic_t = ConvJointCritic(trunk_t, c_head_t, self.img_shape,
                                       [self.n_extra] * n, act_dims)
            copy_params(actor_t.params(), actor.params())
            copy_params(critic_t.params(), critic.params())
            agents.append(AgentNets(
                actor=actor, actor_target=actor_t,
                critic=critic, critic_target=critic_t,
                opt_actor=Adam(actor.params(), tc.actor_lr),
                opt_critic=Adam(critic.params(), tc.critic_lr),
            ))
        return agents

    def reset_episode(self, episode: Episode) -> None:
        self.episode = episode

    def _goal_vector(self, state, i: int) -> np.ndarray:
        a = self.movers[i]
        return self.episode.goals[i] - state.positions[state.index_of(a)]

    def build_messages(self, state) -> dict[EntityId, Message]:
        out = {}
        for i, a in enumerate(self.movers):
            v = state.velocities[state.index_of(a)].copy()
            if self.spec.payload_variant == "velocity":
                out[a] = VelocityMessage(velocity=v)
            else:
                out[a] = VelocityGoalMessage(
                    velocity=v, goal_vector=self._goal_vector(state, i))
        return out

    def deliver(self, state, msgs):
        if self.tc.evlc_physical and self.comm_mode == "evlc":
            return physical_exchange(state, msgs, self.wc,
                                     self.spec.payload_variant, 0)
        return exchange(state, self.comm_mode, msgs, self.wc)

    @staticmethod
    def _message_vector(msg: Message) -> np.ndarray:
        if isinstance(msg, VelocityMessage):
            return np.asarray(msg.velocity, dtype=np.float64)
        return np.concatenate([msg.velocity, msg.goal_vector])

    def observe(self, state, inboxes) -> list[np.ndarray]:
        obs = []
        for i, a in enumerate(self.movers):
            rendered = render_observation(state, a, self.wc)
            entries = inboxes.get(a, [])
            img = _pool_bins(rendered.bins.astype(np.float64),
                             self.tc.obs_pool)
            if self.comm_mode == "evlc":
                vlc = np.zeros((self.k_pooled, 1 + self.msg_dim))
                for e in entries:
                    if e.link is None:
                        continue
                    b = min(e.link // max(1, self.tc.obs_pool),
                            self.k_pooled - 1)
                    vlc[b, 0] = 1.0
                    vlc[b, 1:] += self._message_vector(e.message)
                img[:, VLC_CHANNEL] = vlc[:, 0]
                img = np.concatenate([img, vlc[:, 1:]], axis=1)
            extras = [state.velocities[state.index_of(a)]]
            if self.spec.has_goals:
                extras.append(self._goal_vector(state, i))
            if self.comm_mode in ("radio", "radio_id"):
                flat = np.zeros(self.msg_dim * (len(self.movers) - 1))
                for k, e in enumerate(entries):
                    flat[k * self.msg_dim:(k + 1) * self.msg_dim] = (
                        self._message_vector(e.message))
                extras.append(flat)
            obs.append(np.concatenate([img.ravel()] + extras)
                       .astype(np.float32))
        return obs

    def step_actions(self, state, obs_list, sigma, rng):
        acts = []
        world_actions = {}
        scale = self.wc.max_force / math.sqrt(2.0)
        for i, a in enumerate(self.movers):
            raw = self.agents[i].actor.forward(obs_list[i][None])[0]
            raw = _gaussian_clipped(raw, sigma, rng)
            acts.append(raw)
            world_actions[a] = raw * scale
        return acts, world_actions, {}

    def world_step(self, state, world_actions):
        return step_dynamic(state, world_actions, self.wc)

    def attach_next(self, pending: dict, next_obs) -> None:
        pass

    def comm_link_counts(self, inboxes) -> dict[EntityId, int]:
        return {a: len(inboxes.get(a, [])) for a in self.movers}

    def update(self, replay: ReplayBuffer) -> dict[str, float]:
        batch = replay.sample(self.tc.batch_size)
        self._n_updates += 1
        return maddpg_update(batch, self.agents, self.tc.gamma, self.tc.tau,
                             update_actor=self._n_updates
                             % self.tc.actor_delay == 0)

    def named_nets(self) -> dict:
        out = {}
        for i, ag in enumerate(self.agents):
            out[f"actor_{i}"] = ag.actor
            out[f"actor_target_{i}"] = ag.actor_target
            out[f"critic_{i}"] = ag.critic
            out[f"critic_target_{i}"] = ag.critic_target
        return out


FAMILIES = {
    "simple_swing": SwingFamily,
    "simple_spread": SpreadPPFamily,
    "predator_prey": SpreadPPFamily,
    "target_encirclement": ForceFamily,
    "goal_crossing": ForceFamily,
}


def make_family(spec: TaskSpec, comm_mode: str, wc: WorldConfig,
                tc: TrainConfig, rng: np.random.Generator):
    if comm_mode not in channel.COMM_MODES:
        raise ValueError(f"unknown comm mode {comm_mode!r}")
    cls = FAMILIES.get(spec.name)
    if cls is None:
        raise ValueError(f"no model family for task {spec.name!r}")
    return cls(spec, comm_mode, wc, tc, rng)


@dataclass
class TrainResult:
    family: object
    spec: TaskSpec
    comm_mode: str
    world_config: WorldConfig
    train_config: TrainConfig
    log: list[dict] = field(default_factory=list)


def _noise_at(tc: TrainConfig, episode_index: int) -> float:
    frac = episode_index / max(1, tc.episodes - 1)
    return tc.noise_start + (tc.noise_end - tc.noise_start) * min(1.0, frac)


def run_episode(family, episode: Episode, rng=None, sigma: float = 0.0,
                collect_obs: bool = False):
    """Roll one episode with the family's current policies (greedy by
    default); returns the list of post-action states and, optionally, the
    per-step observations."""
    spec, wc = family.spec, family.wc
    family.reset_episode(episode)
    state = episode.state
    states = []
    obs_log = []
    for _ in range(spec.episode_length):
        msgs = family.build_messages(state)
        inboxes = family.deliver(state, msgs)
        obs = family.observe(state, inboxes)
        if collect_obs:
            obs_log.append(obs)
        _, world_actions, _ = family.step_actions(state, obs, sigma, rng)
        state = family.world_step(state, world_actions)
        states.append(state)
    return (states, obs_log) if collect_obs else states


def train(task, comm_mode: str, tc: TrainConfig | None = None,
          seed: int = 0, world_overrides: dict | None = None) -> TrainResult:
    """Train one (task, comm mode) pair; deterministic for a given seed."""
    spec = make_task(task) if isinstance(task, str) else task
    tc = tc or TrainConfig()
    wc = spec.world_config(**(world_overrides or {}))
    ss = np.random.SeedSequence(seed)
    rng_init, rng_episode, rng_explore, rng_replay = [
        np.random.default_rng(s) for s in ss.spawn(4)]

    family = make_family(spec, comm_mode, wc, tc, rng_init)
    replay = ReplayBuffer(tc.replay_capacity, rng_replay)
    result = TrainResult(family=family, spec=spec, comm_mode=comm_mode,
                         world_config=wc, train_config=tc)
    total_steps = 0
    for ep in range(tc.episodes):
        sigma = _noise_at(tc, ep)
        episode = init_episode(spec, rng_episode, wc)
        family.reset_episode(episode)
        state = episode.state
        pending = None
        states = []
        reward_rows = []
        for t in range(spec.episode_length):
            msgs = family.build_messages(state)
            inboxes = family.deliver(state, msgs)
            obs = family.observe(state, inboxes)
            if pending is not None:
                pending["next_obs"] = obs
                family.attach_next(pending, obs)
                pending["rew"] = pending["rew"] * tc.reward_scale
                replay.push(pending)
            acts, world_actions, step_aux = family.step_actions(
                state, obs, sigma, rng_explore)
            next_state = family.world_step(state, world_actions)
            links = None
            if comm_mode == "evlc" and tc.comm_reward:
                links = family.comm_link_counts(inboxes)
            r = reward(spec, episode, next_state, state, wc, links)
            pending = {
                "obs": obs, "act": acts, "rew": r,
                "done": 1.0 if t == spec.episode_length - 1 else 0.0,
                "aux": step_aux,
            }
            if not step_aux:
                pending.pop("aux")
            state = next_state
            states.append(state)
            reward_rows.append(r)
            if len(replay) >= tc.warmup and total_steps % tc.update_every == 0:
                family.update(replay)
            total_steps += 1
        # terminal observation completes the last pending transition
        msgs = family.build_messages(state)
        inboxes = family.deliver(state, msgs)
        obs = family.observe(state, inboxes)
        pending["next_obs"] = obs
        family.attach_next(pending, obs)
        pending["rew"] = pending["rew"] * tc.reward_scale
        replay.push(pending)

        m = metrics(spec, episode, states, wc)
        result.log.append({
            "episode": ep,
            "mean_reward": float(np.mean(reward_rows)),
            "metric": float(m[spec.metric_name]),
        })
    return result
