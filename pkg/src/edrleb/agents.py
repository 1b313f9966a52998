"""DDPG and TD3 population members with episode-structured replay buffers."""
from __future__ import annotations

import collections
import copy
from dataclasses import dataclass, replace
from typing import Iterator, NamedTuple

import numpy as np

from .envs import EnvSpec, env_reset, env_step
from .tensor_net import (
    AdamState,
    FlatParams,
    MLP,
    MLPSpec,
    apply_adam,
    mlp_backward,
    mlp_forward,
    mlp_init,
    soft_update,
)

ALGOS = ("ddpg", "td3")


class Transition(NamedTuple):
    s: np.ndarray
    a: np.ndarray
    s_next: np.ndarray
    r: float


class Batch(NamedTuple):
    """Column-stacked transitions, one row per sample."""

    s: np.ndarray
    a: np.ndarray
    s_next: np.ndarray
    r: np.ndarray


@dataclass(frozen=True, eq=False)
class EpisodeSequence:
    """One complete episode stored as read-only arrays of length H."""

    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    rewards: np.ndarray

    def __post_init__(self):
        arrays = [np.array(a, dtype=np.float64) for a in
                  (self.states, self.actions, self.next_states, self.rewards)]
        s, a, s2, r = arrays
        if r.ndim != 1 or s.ndim != 2 or a.ndim != 2 or s2.shape != s.shape:
            raise ValueError("malformed episode arrays")
        if not (len(s) == len(a) == len(r)):
            raise ValueError("episode arrays differ in length")
        if len(r) > 1 and not np.array_equal(s2[:-1], s[1:]):
            raise ValueError("next state of step t must equal state of step t+1")
        for name, arr in zip(("states", "actions", "next_states", "rewards"), arrays):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite values in episode {name}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_transitions(cls, transitions) -> EpisodeSequence:
        s, a, s2, r = zip(*transitions)
        return cls(np.array(s), np.array(a), np.array(s2), np.array(r))

    @property
    def total_reward(self) -> float:
        return float(self.rewards.sum())

    @property
    def transitions(self) -> list[Transition]:
        return list(self)

    def __len__(self):
        return self.rewards.size

    def __getitem__(self, t) -> Transition:
        return Transition(self.states[t], self.actions[t], self.next_states[t], float(self.rewards[t]))

    def __iter__(self) -> Iterator[Transition]:
        return (self[t] for t in range(len(self)))

    def same_as(self, other: EpisodeSequence) -> bool:
        return all(np.array_equal(x, y) for x, y in zip(
            (self.states, self.actions, self.next_states, self.rewards),
            (other.states, other.actions, other.next_states, other.rewards)))


class ReplayBuffer:
    """FIFO store of whole episodes; capacity is counted in episodes.

    Episodes are immutable, so copying a buffer only copies references.
    """

    def __init__(self, capacity: int = 1000, state_dim: int | None = None, action_dim: int | None = None):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.episodes: collections.deque[EpisodeSequence] = collections.deque(maxlen=capacity)
        self._flat: Batch | None = None

    def __len__(self):
        return len(self.episodes)

    @property
    def n_transitions(self) -> int:
        return sum(len(ep) for ep in self.episodes)

    def store(self, ep: EpisodeSequence) -> None:
        if self.state_dim is not None and ep.states.shape[1] != self.state_dim:
            raise ValueError(f"episode state dim {ep.states.shape[1]} != buffer state dim {self.state_dim}")
        if self.action_dim is not None and ep.actions.shape[1] != self.action_dim:
            raise ValueError(f"episode action dim {ep.actions.shape[1]} != buffer action dim {self.action_dim}")
        self.episodes.append(ep)
        self._flat = None

    def flat(self) -> Batch:
        if self._flat is None:
            eps = self.episodes
            self._flat = Batch(np.concatenate([e.states for e in eps]),
                               np.concatenate([e.actions for e in eps]),
                               np.concatenate([e.next_states for e in eps]),
                               np.concatenate([e.rewards for e in eps]))
        return self._flat

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform sampling with replacement over every stored transition."""
        if not self.episodes:
            raise ValueError("cannot sample from an empty replay buffer")
        flat = self.flat()
        idx = rng.integers(0, flat.r.size, size=batch_size)
        return Batch(flat.s[idx], flat.a[idx], flat.s_next[idx], flat.r[idx])

    def copy(self) -> ReplayBuffer:
        new = ReplayBuffer(self.capacity, self.state_dim, self.action_dim)
        new.episodes.extend(self.episodes)
        new._flat = self._flat
        return new

    @classmethod
    def from_episodes(cls, episodes, capacity: int | None = None) -> ReplayBuffer:
        episodes = list(episodes)
        buf = cls(capacity or max(len(episodes), 1))
        for ep in episodes:
            buf.store(ep)
        return buf


def store_episode(buffer: ReplayBuffer, ep: EpisodeSequence) -> ReplayBuffer:
    buffer.store(ep)
    return buffer


def sample_batch(buffer: ReplayBuffer, batch_size: int, rng: np.random.Generator) -> Batch:
    return buffer.sample(batch_size, rng)


@dataclass
class AgentConfig:
    """Learner hyperparameters.

    Noise magnitudes (``explore_noise``, ``target_noise``, ``noise_clip``)
    are fractions of the action half-range, so ``0.1`` on a ``[-1, 1]``
    action means a standard deviation of ``0.1``.
    """

    hidden_sizes: tuple[int, ...] = (64, 64)
    hidden_activation: str = "relu"
    final_init: float | None = 3e-3
    gamma: float = 0.99
    tau: float = 0.005
    batch_size: int = 64
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    explore_noise: float = 0.1
    policy_delay: int = 2
    target_noise: float = 0.2
    noise_clip: float = 0.5
    warmup_steps: int = 500
    buffer_capacity: int = 1000

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.policy_delay < 1 or self.batch_size < 1:
            raise ValueError("policy_delay and batch_size must be >= 1")


@dataclass
class Agent:
    algo: str
    env_spec: EnvSpec
    config: AgentConfig
    actor: MLP
    actor_target: MLP
    critics: list[MLP]
    critic_targets: list[MLP]
    actor_opt: AdamState
    critic_opts: list[AdamState]
    buffer: ReplayBuffer
    update_counter: int = 0
    env_steps: int = 0

    @property
    def action_scale(self) -> np.ndarray:
        return (self.env_spec.high - self.env_spec.low) / 2.0

    @property
    def action_center(self) -> np.ndarray:
        return (self.env_spec.high + self.env_spec.low) / 2.0

    def clone(self) -> Agent:
        """Independent copy; the replay buffer shares immutable episodes."""
        return replace(
            self,
            config=copy.copy(self.config),
            actor=self.actor.copy(),
            actor_target=self.actor_target.copy(),
            critics=[c.copy() for c in self.critics],
            critic_targets=[c.copy() for c in self.critic_targets],
            actor_opt=self.actor_opt.copy(),
            critic_opts=[o.copy() for o in self.critic_opts],
            buffer=self.buffer.copy(),
        )


def agent_init(algo: str, env_spec: EnvSpec, seed: int, config: AgentConfig | None = None) -> Agent:
    if algo not in ALGOS:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGOS}")
    config = config or AgentConfig()
    n, m = env_spec.state_dim, env_spec.action_dim
    rng = np.random.default_rng(seed)
    actor_spec = MLPSpec((n, *config.hidden_sizes, m), config.hidden_activation, "tanh", config.final_init)
    critic_spec = MLPSpec((n + m, *config.hidden_sizes, 1), config.hidden_activation, "identity")
    actor = mlp_init(actor_spec, rng)
    critics = [mlp_init(critic_spec, rng) for _ in range(2 if algo == "td3" else 1)]
    return Agent(
        algo=algo,
        env_spec=env_spec,
        config=config,
        actor=actor,
        actor_target=actor.copy(),
        critics=critics,
        critic_targets=[c.copy() for c in critics],
        actor_opt=AdamState.zeros(actor_spec.n_params),
        critic_opts=[AdamState.zeros(critic_spec.n_params) for _ in critics],
        buffer=ReplayBuffer(config.buffer_capacity, n, m),
    )


def policy(agent: Agent, s: np.ndarray, net: MLP | None = None) -> np.ndarray:
    """Deterministic action(s) of the actor, scaled to the action bounds."""
    out, _ = mlp_forward(net or agent.actor, s)
    return agent.action_center + agent.action_scale * out


def select_action(agent: Agent, s: np.ndarray, noise_scale: float, rng: np.random.Generator) -> np.ndarray:
    """``clip(pi(s) + eps)`` with ``eps ~ N(0, noise_scale^2)`` per dimension."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (agent.env_spec.state_dim,):
        raise ValueError(f"state shape {s.shape} != ({agent.env_spec.state_dim},)")
    if noise_scale < 0:
        raise ValueError("noise_scale must be >= 0")
    a = policy(agent, s)
    if noise_scale > 0:
        a = a + rng.normal(0.0, noise_scale, size=a.shape)
    return agent.env_spec.clip(a)


# losses and updates -------------------------------------------------------

def critic_targets(agent: Agent, batch: Batch, rng: np.random.Generator | None = None) -> np.ndarray:
    """Bootstrapped regression targets ``y`` for the critic(s).

    DDPG uses ``r + gamma Q'(s', pi'(s'))``; TD3 smooths the target action
    with clipped noise and takes the minimum of the two target critics.
    """
    cfg = agent.config
    a_next = policy(agent, batch.s_next, agent.actor_target)
    if agent.algo == "td3":
        if cfg.target_noise > 0:
            if rng is None:
                raise ValueError("TD3 target smoothing needs an rng")
            noise = rng.normal(0.0, cfg.target_noise, size=a_next.shape) * agent.action_scale
            clip = cfg.noise_clip * agent.action_scale
            a_next = a_next + np.clip(noise, -clip, clip)
        a_next = agent.env_spec.clip(a_next)
    x_next = np.concatenate([batch.s_next, a_next], axis=1)
    q_next = np.min([mlp_forward(t, x_next)[0][:, 0] for t in agent.critic_targets], axis=0)
    return batch.r + cfg.gamma * q_next


def critic_loss_grad(critic: MLP, s: np.ndarray, a: np.ndarray, y: np.ndarray) -> tuple[float, FlatParams]:
    """Mean squared error ``mean((Q(s, a) - y)^2)`` and its parameter gradient."""
    q, cache = mlp_forward(critic, np.concatenate([s, a], axis=1))
    err = q[:, 0] - y
    grad, _ = mlp_backward(critic, cache, (2.0 / err.size) * err[:, None])
    return float(np.mean(err * err)), grad


def actor_loss_grad(agent: Agent, s: np.ndarray) -> tuple[float, FlatParams]:
    """``-mean Q1(s, pi(s))`` and its gradient with respect to the actor."""
    out, a_cache = mlp_forward(agent.actor, s)
    a = agent.action_center + agent.action_scale * out
    critic = agent.critics[0]
    q, c_cache = mlp_forward(critic, np.concatenate([s, a], axis=1))
    _, dx = mlp_backward(critic, c_cache, np.full_like(q, -1.0 / len(q)))
    d_out = dx[:, s.shape[1]:] * agent.action_scale
    grad, _ = mlp_backward(agent.actor, a_cache, d_out)
    return float(-q.mean()), grad


def _fit_critics(agent: Agent, batch: Batch, y: np.ndarray) -> None:
    lr = agent.config.critic_lr
    for i, critic in enumerate(agent.critics):
        _, grad = critic_loss_grad(critic, batch.s, batch.a, y)
        agent.critic_opts[i] = apply_adam(critic, grad, agent.critic_opts[i], lr)


def _improve_actor_and_targets(agent: Agent, batch: Batch) -> None:
    _, grad = actor_loss_grad(agent, batch.s)
    agent.actor_opt = apply_adam(agent.actor, grad, agent.actor_opt, agent.config.actor_lr)
    tau = agent.config.tau
    soft_update(agent.actor_target, agent.actor, tau)
    for target, critic in zip(agent.critic_targets, agent.critics):
        soft_update(target, critic, tau)


def ddpg_update(agent: Agent, batch: Batch, rng: np.random.Generator | None = None) -> Agent:
    if agent.algo != "ddpg":
        raise ValueError(f"ddpg_update called on a {agent.algo} agent")
    _fit_critics(agent, batch, critic_targets(agent, batch))
    _improve_actor_and_targets(agent, batch)
    agent.update_counter += 1
    return agent


def td3_update(agent: Agent, batch: Batch, rng: np.random.Generator) -> Agent:
    if agent.algo != "td3":
        raise ValueError(f"td3_update called on a {agent.algo} agent")
    _fit_critics(agent, batch, critic_targets(agent, batch, rng))
    agent.update_counter += 1
    if agent.update_counter % agent.config.policy_delay == 0:
        _improve_actor_and_targets(agent, batch)
    return agent


def update(agent: Agent, batch: Batch, rng: np.random.Generator) -> Agent:
    if agent.algo == "td3":
        return td3_update(agent, batch, rng)
    return ddpg_update(agent, batch, rng)


def train_from_buffer(agent: Agent, buffer: ReplayBuffer, n_updates: int, batch_size: int,
                      rng: np.random.Generator) -> Agent:
    """Run ``n_updates`` off-policy updates on fresh uniform minibatches."""
    if len(buffer) == 0:
        raise ValueError("cannot train from an empty replay buffer")
    for _ in range(n_updates):
        update(agent, buffer.sample(batch_size, rng), rng)
    return agent


# interaction --------------------------------------------------------------

def run_episode(agent: Agent, env_seed: int, noise_scale: float = 0.0,
                rng: np.random.Generator | None = None, random_actions: bool = False) -> EpisodeSequence:
    """Roll out one full episode; nothing is stored or counted."""
    spec = agent.env_spec
    state = env_reset(spec, env_seed)
    obs = state.observation
    H, n, m = spec.max_time_step, spec.state_dim, spec.action_dim
    states, actions, next_states, rewards = np.empty((H, n)), np.empty((H, m)), np.empty((H, n)), np.empty(H)
    for t in range(H):
        if random_actions:
            a = rng.uniform(spec.low, spec.high)
        else:
            a = select_action(agent, obs, noise_scale, rng)
        state, result = env_step(state, a)
        states[t], actions[t], next_states[t], rewards[t] = obs, a, result.next_state, result.reward
        obs = result.next_state
    return EpisodeSequence(states, actions, next_states, rewards)


def explore_and_learn(agent: Agent, n_episodes: int, rng: np.random.Generator,
                      updates_per_step: int = 1) -> list[EpisodeSequence]:
    """Collect ``n_episodes`` exploration episodes, learning after each one.

    The first ``config.warmup_steps`` environment steps of the agent's life
    use uniformly random actions.  After each episode the agent performs
    ``H * updates_per_step`` updates on its own replay buffer.
    """
    cfg = agent.config
    H = agent.env_spec.max_time_step
    noise = cfg.explore_noise * float(np.mean(agent.action_scale))
    episodes = []
    for _ in range(n_episodes):
        warm = agent.env_steps < cfg.warmup_steps
        ep = run_episode(agent, int(rng.integers(2**31)), noise, rng, random_actions=warm)
        agent.buffer.store(ep)
        agent.env_steps += H
        episodes.append(ep)
        train_from_buffer(agent, agent.buffer, H * updates_per_step, cfg.batch_size, rng)
    return episodes
