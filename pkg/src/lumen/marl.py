"""Learning machinery: MADDPG core, the view-imagination networks f and g,
and the Simple Swing critic that predicts the next visibility bits.

Network f answers "what would I see if I faced angle theta", network g
answers "how likely is that view to improve my reward by more than
delta_r"; at execution the agent scores every grid direction with f and g
and turns to the best one. The Simple Swing critic instead runs f inside
the centralized critic: f predicts the next visibility bits from the
agent's own observation and action, and the value head C consumes that
prediction alongside the joint features. The TD loss reaches only C's
parameters; the prediction loss reaches only f's.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .neural import Adam, Mlp, soft_update, zero_grads
from .world import ANGLE_EPS, TWO_PI, angle_diff, wrap_angle


@dataclass
class TrainConfig:
    """Hyperparameters and model sizes; every field may be overridden from
    the run configuration file."""

    episodes: int = 2000
    gamma: float = 0.95
    tau: float = 0.01
    batch_size: int = 256
    warmup: int = 1000
    update_every: int = 1
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    f_lr: float = 1e-3
    g_lr: float = 1e-3
    noise_start: float = 0.3
    noise_end: float = 0.05
    noise_kind: str = "gaussian"  # or "ou" (temporally correlated)
    ou_theta: float = 0.15
    actor_delay: int = 1      # actor/target updates every N critic updates
    reward_scale: float = 1.0  # replay-only scaling; logs and metrics are raw
    replay_capacity: int = 1_000_000
    mlp_width: int = 256
    mlp_layers: int = 5
    fg_width: int = 256
    fg_layers: int = 4
    conv_filters: int = 64
    conv_layers: int = 4
    conv_kernel: int = 4
    obs_pool: int = 1
    history_frames: int = 3
    swing_obs_frames: int = 3  # frames the swing actor / value head consume
    n_direction_levels: int = 36
    delta_r: float = 0.001
    f_predict: bool = True
    comm_reward: bool = True
    evlc_physical: bool = False
    adversary_communicates: bool = False


class HistoryBuffer:
    """Ring of the last T frames of {own direction, own visibility bits,
    received directions and bits per peer slot (zero-filled when absent)}.

    Directions are stored as (cos, sin) pairs, so an empty slot's (0, 0)
    is distinguishable from any real direction.
    """

    def __init__(self, n_peers: int, topo_len: int, frames: int = 3):
        self.n_peers = n_peers
        self.topo_len = topo_len
        self.frames = frames
        self.frame_dim = (2 + topo_len) * (1 + n_peers)
        self._ring = [np.zeros(self.frame_dim) for _ in range(frames)]

    def reset(self) -> None:
        self._ring = [np.zeros(self.frame_dim) for _ in range(self.frames)]

    @staticmethod
    def _block(direction: float | None, topo: np.ndarray | None,
               topo_len: int) -> np.ndarray:
        out = np.zeros(2 + topo_len)
        if direction is not None:
            out[0] = math.cos(direction)
            out[1] = math.sin(direction)
        if topo is not None:
            out[2:] = topo
        return out

    def push(self, own_direction: float, own_topo: np.ndarray,
             received: list[tuple[float | None, np.ndarray | None]]) -> None:
        if len(received) != self.n_peers:
            raise ValueError(f"expected {self.n_peers} peer slots")
        blocks = [self._block(own_direction, own_topo, self.topo_len)]
        blocks += [self._block(d, t, self.topo_len) for d, t in received]
        self._ring.pop(0)
        self._ring.append(np.concatenate(blocks))

    def features(self) -> np.ndarray:
        """Oldest-to-newest concatenation, length frames * frame_dim."""
        return np.concatenate(self._ring)

    def imagined_features(self, direction: float,
                          topo_probs: np.ndarray) -> np.ndarray:
        """Features after an imagined rotation: the window shifts by one
        frame whose own block holds the candidate direction and f's
        predicted bits; peers carry over from the newest real frame."""
        peers = self._ring[-1][2 + self.topo_len:]
        own = self._block(direction, topo_probs, self.topo_len)
        return np.concatenate(self._ring[1:] + [np.concatenate([own, peers])])


class ReplayBuffer:
    """Uniform-sampling FIFO ring of joint transitions."""

    def __init__(self, capacity: int, rng: np.random.Generator):
        self.capacity = int(capacity)
        self._rng = rng
        self._data: list[dict] = []
        self._write = 0

    def __len__(self) -> int:
        return len(self._data)

    def push(self, transition: dict) -> None:
        if len(self._data) < self.capacity:
            self._data.append(transition)
        else:
            self._data[self._write] = transition
            self._write = (self._write + 1) % self.capacity

    def sample_indices(self, batch_size: int) -> np.ndarray:
        if not self._data:
            raise ValueError("cannot sample from an empty buffer")
        return self._rng.integers(0, len(self._data), size=batch_size)

    def sample(self, batch_size: int) -> dict:
        idx = self.sample_indices(batch_size)
        rows = [self._data[i] for i in idx]
        n_agents = len(rows[0]["obs"])
        batch = {
            "obs": [np.stack([r["obs"][i] for r in rows])
                    for i in range(n_agents)],
            "act": [np.stack([r["act"][i] for r in rows])
                    for i in range(n_agents)],
            "rew": np.stack([r["rew"] for r in rows]),
            "next_obs": [np.stack([r["next_obs"][i] for r in rows])
                         for i in range(n_agents)],
            "done": np.array([r["done"] for r in rows]),
        }
        if "aux" in rows[0]:
            keys = rows[0]["aux"].keys()
            batch["aux"] = {k: np.stack([r["aux"][k] for r in rows])
                            for k in keys}
        return batch


def discounted_return(rewards, gamma: float) -> float:
    """Sum of gamma^t * r_t."""
    total = 0.0
    for t, r in enumerate(rewards):
        total += (gamma ** t) * float(r)
    return total


def reward_improved(r_next, r_prev, delta_r: float = 0.001):
    """Training label for g: strictly more than delta_r of improvement."""
    return np.asarray(r_next) - np.asarray(r_prev) > delta_r


def next_topo_loss(true_bits: np.ndarray, predicted: np.ndarray) -> float:
    """Mean over samples of the squared norm of the prediction error."""
    diff = np.asarray(true_bits, dtype=np.float64) - predicted
    return float(np.mean(np.sum(diff * diff, axis=-1)))


def f_predict(f_net: Mlp, history: HistoryBuffer, theta: float) -> np.ndarray:
    """Predicted visibility probabilities after rotating to `theta`."""
    x = np.concatenate([history.features(),
                        [math.cos(theta), math.sin(theta)]])[None]
    return f_net.forward(x)[0]


def g_predict(g_net: Mlp, history: HistoryBuffer, theta: float,
              topo_probs: np.ndarray) -> float:
    """Probability that rotating to `theta` improves reward by > delta_r."""
    x = history.imagined_features(theta, topo_probs)[None]
    return float(g_net.forward(x)[0, 0])


def select_view_direction(
    f_net: Mlp,
    g_net: Mlp,
    history: HistoryBuffer,
    current_heading: float,
    max_step_rotation: float | None = None,
    n_levels: int = 36,
) -> float:
    """Score every grid direction with f then g; return the best.

    Ties break toward the smallest absolute rotation from the current
    heading, then the smallest grid index. Under a rotation cap only the
    reachable grid points are candidates.
    """
    angles = [TWO_PI * k / n_levels for k in range(n_levels)]
    ks = list(range(n_levels))
    if max_step_rotation is not None:
        keep = [i for i, a in enumerate(angles)
                if abs(angle_diff(a, current_heading))
                <= max_step_rotation + ANGLE_EPS]
        angles = [angles[i] for i in keep]
        ks = [ks[i] for i in keep]
    if not angles:
        return wrap_angle(current_heading)

    base = history.features()
    f_in = np.stack([
        np.concatenate([base, [math.cos(a), math.sin(a)]]) for a in angles
    ])
    topo_probs = f_net.forward(f_in)
    g_in = np.stack([
        history.imagined_features(a, topo_probs[i])
        for i, a in enumerate(angles)
    ])
    scores = g_net.forward(g_in)[:, 0]

    best = None
    for i, a in enumerate(angles):
        key = (-scores[i], abs(angle_diff(a, current_heading)), ks[i])
        if best is None or key < best[0]:
            best = (key, a)
    return best[1]


class SliceActor:
    """Policy head that reads a column slice of the stored observation
    (the swing actor consumes the newest history frame only)."""

    def __init__(self, net: Mlp, columns: slice):
        self.net = net
        self.columns = columns

    def forward(self, obs: np.ndarray) -> np.ndarray:
        return self.net.forward(obs[:, self.columns])

    def backward(self, grad_out: np.ndarray) -> None:
        self.net.backward(grad_out)

    def params(self):
        return self.net.params()

    def grads(self):
        return self.net.grads()


class MlpCritic:
    """Centralized Q over concatenated observations and actions; an
    optional column slice restricts what it reads from each observation."""

    def __init__(self, rng, obs_dims: list[int], act_dims: list[int],
                 width: int, layers: int, obs_slice: slice = slice(None)):
        self.obs_dims = list(obs_dims)
        self.act_dims = list(act_dims)
        self.obs_slice = obs_slice
        sliced = [len(range(*obs_slice.indices(d))) for d in obs_dims]
        self._sliced_dims = sliced
        n_in = sum(sliced) + sum(act_dims)
        self.net = Mlp(rng, n_in, [width] * layers, 1)

    def q_forward(self, obs_list, act_list) -> np.ndarray:
        x = np.concatenate(
            [o[:, self.obs_slice] for o in obs_list] + list(act_list), axis=1)
        return self.net.forward(x)

    def q_backward(self, grad_q, param_grads: bool = True) -> list[np.ndarray]:
        """Accumulate parameter grads; return the gradient on each action."""
        gx = self.net.backward(grad_q)
        grads = []
        offset = sum(self._sliced_dims)
        for d in self.act_dims:
            grads.append(gx[:, offset:offset + d])
            offset += d
        return grads

    def params(self):
        return self.net.params()

    def grads(self):
        return self.net.grads()


class SwingCritic:
    """f + C critic: f predicts the agent's next visibility bits from its
    own observation and action; C maps joint features plus that prediction
    to Q. TD gradients stop at C (the prediction enters as a constant);
    the next-topology loss trains f alone."""

    def __init__(self, rng, obs_dims: list[int], act_dims: list[int],
                 agent_index: int, topo_len: int, width: int, layers: int,
                 f_width: int, f_layers: int, obs_slice: slice = slice(None)):
        self.obs_dims = list(obs_dims)
        self.act_dims = list(act_dims)
        self.agent_index = agent_index
        self.topo_len = topo_len
        self.obs_slice = obs_slice
        self._sliced_dims = [len(range(*obs_slice.indices(d)))
                             for d in obs_dims]
        # f reads the agent's full stored history; C reads the slice
        self.f = Mlp(rng, obs_dims[agent_index] + act_dims[agent_index],
                     [f_width] * f_layers, topo_len, out_activation="sigmoid")
        n_in = sum(self._sliced_dims) + sum(act_dims) + topo_len
        self.c = Mlp(rng, n_in, [width] * layers, 1)
        self._last_prediction = None

    def predict_next_topo(self, own_obs, own_act) -> np.ndarray:
        return self.f.forward(np.concatenate([own_obs, own_act], axis=1))

    def q_forward(self, obs_list, act_list) -> np.ndarray:
        s_hat = self.predict_next_topo(obs_list[self.agent_index],
                                       act_list[self.agent_index])
        self._last_prediction = s_hat
        x = np.concatenate(
            [o[:, self.obs_slice] for o in obs_list] + list(act_list)
            + [s_hat], axis=1)
        return self.c.forward(x)

    @property
    def last_prediction(self) -> np.ndarray:
        return self._last_prediction

    def q_backward(self, grad_q, param_grads: bool = True) -> list[np.ndarray]:
        gx = self.c.backward(grad_q)  # TD path: C only, f input slice dropped
        grads = []
        offset = sum(self._sliced_dims)
        for d in self.act_dims:
            grads.append(gx[:, offset:offset + d])
            offset += d
        return grads

    def f_backward(self, grad_s_hat) -> None:
        self.f.backward(grad_s_hat)

    def params(self):
        return self.f.params() + self.c.params()

    def grads(self):
        return self.f.grads() + self.c.grads()


@dataclass
class AgentNets:
    """One agent's live and target networks plus optimizers."""

    actor: object
    actor_target: object
    critic: object
    critic_target: object
    opt_actor: Adam
    opt_critic: Adam
    f_net: Mlp | None = None
    g_net: Mlp | None = None
    opt_f: Adam | None = None
    opt_g: Adam | None = None
    extras: dict = field(default_factory=dict)


def maddpg_update(
    batch: dict,
    agents: list[AgentNets],
    gamma: float,
    tau: float,
    update_actor: bool = True,
) -> dict[str, float]:
    """One MADDPG step for every agent: fitted-Q critics against target
    actors/critics, deterministic policy gradient actors, soft target
    updates. Returns per-agent losses."""
    obs, act = batch["obs"], batch["act"]
    next_obs, rew, done = batch["next_obs"], batch["rew"], batch["done"]
    n_batch = rew.shape[0]
    if n_batch == 0:
        raise ValueError("empty batch")

    next_actions = [ag.actor_target.forward(next_obs[i])
                    for i, ag in enumerate(agents)]
    losses: dict[str, float] = {}
    for i, ag in enumerate(agents):
        q_next = ag.critic_target.q_forward(next_obs, next_actions)
        y = rew[:, i:i + 1] + gamma * (1.0 - done[:, None]) * q_next

        q = ag.critic.q_forward(obs, act)
        td = q - y
        losses[f"critic_{i}"] = float(np.mean(td * td))
        zero_grads(ag.critic)
        ag.critic.q_backward(2.0 * td / n_batch)
        ag.opt_critic.step(ag.critic.grads())

        if update_actor:
            a_i = ag.actor.forward(obs[i])
            acts = list(act)
            acts[i] = a_i
            q_pi = ag.critic.q_forward(obs, acts)
            losses[f"actor_{i}"] = float(-np.mean(q_pi))
            zero_grads(ag.critic)
            act_grads = ag.critic.q_backward(-np.ones_like(q_pi) / n_batch,
                                             param_grads=False)
            zero_grads(ag.actor)
            ag.actor.backward(act_grads[i])
            ag.opt_actor.step(ag.actor.grads())

    if update_actor:
        for ag in agents:
            soft_update(ag.critic_target.params(), ag.critic.params(), tau)
            soft_update(ag.actor_target.params(), ag.actor.params(), tau)
    return losses
