"""Goal-conditioned DDPG learner built on :mod:`evoddpg.nn`."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Tuple

import numpy as np

from .errors import NumericError
from .nn import AdamState, Mlp, adam_step, mlp_backward, mlp_forward, mlp_init

# closed search box of every learning parameter
HYPERPARAM_BOUNDS = {
    "gamma": (0.8, 0.999),
    "polyak": (0.9, 0.9999),
    "actor_lr": (1e-5, 1e-2),
    "critic_lr": (1e-5, 1e-2),
    "random_eps": (0.0, 0.5),
    "noise_eps": (0.0, 0.5),
}


@dataclass
class Hyperparams:
    gamma: float = 0.98
    polyak: float = 0.95
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    random_eps: float = 0.3
    noise_eps: float = 0.2

    def validate(self) -> "Hyperparams":
        for f in fields(self):
            lo, hi = HYPERPARAM_BOUNDS[f.name]
            value = getattr(self, f.name)
            if not (lo <= value <= hi):
                raise ValueError(f"{f.name}={value!r} outside [{lo}, {hi}]")
        return self

    def as_dict(self) -> dict:
        return asdict(self)

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=np.float64)

    @classmethod
    def from_vector(cls, values) -> "Hyperparams":
        return cls(*(float(v) for v in values))


BASELINE = Hyperparams()


@dataclass
class Normalizer:
    """Running per-component mean/std from sum and sum-of-squares accumulators.

    ``eps`` floors the variance, so the reported std is at least ``sqrt(eps)``.
    """

    size: int
    clip_range: float = 5.0
    eps: float = 1e-4
    count: float = 0.0
    sum: np.ndarray = None
    sum_sq: np.ndarray = None

    def __post_init__(self):
        if self.sum is None:
            self.sum = np.zeros(self.size)
        if self.sum_sq is None:
            self.sum_sq = np.zeros(self.size)

    def update(self, x) -> None:
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.size)
        self.sum += x.sum(axis=0)
        self.sum_sq += (x * x).sum(axis=0)
        self.count += x.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.sum / max(self.count, 1.0)

    @property
    def std(self) -> np.ndarray:
        mean = self.mean
        var = self.sum_sq / max(self.count, 1.0) - mean * mean
        return np.sqrt(np.maximum(var, self.eps))

    def normalize(self, x) -> np.ndarray:
        return np.clip((np.asarray(x, dtype=np.float64) - self.mean) / self.std,
                       -self.clip_range, self.clip_range)


def normalizer_update(norm: Normalizer, observations) -> Normalizer:
    norm.update(observations)
    return norm


def normalize(norm: Normalizer, x) -> np.ndarray:
    return norm.normalize(x)


class Agent:
    """Actor, critic, their targets, optimizers and input normalizers.

    The actor maps ``(obs, goal)`` to a tanh action in ``[-1, 1]``; the critic
    maps ``(obs, goal, action)`` to a scalar. Targets start as exact copies.
    """

    def __init__(self, obs_dim, goal_dim, action_dim, hp: Hyperparams = BASELINE,
                 hidden=(256, 256), seed=0, action_l2=1.0, clip_range=5.0):
        self.obs_dim, self.goal_dim, self.action_dim = obs_dim, goal_dim, action_dim
        self.hp = hp
        self.action_l2 = action_l2
        actor_seed, critic_seed = np.random.SeedSequence(seed).generate_state(2)
        self.actor = mlp_init([obs_dim + goal_dim, *hidden, action_dim], "relu", "tanh",
                              seed=int(actor_seed))
        self.critic = mlp_init([obs_dim + goal_dim + action_dim, *hidden, 1], "relu", "identity",
                               seed=int(critic_seed))
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.actor_opt = AdamState.for_net(self.actor)
        self.critic_opt = AdamState.for_net(self.critic)
        self.o_norm = Normalizer(obs_dim, clip_range)
        self.g_norm = Normalizer(goal_dim, clip_range)

    def policy_input(self, obs, goal) -> np.ndarray:
        return np.concatenate([self.o_norm.normalize(obs), self.g_norm.normalize(goal)], axis=-1)

    def act(self, obs, goal) -> np.ndarray:
        """Greedy actions for a single observation or a batch."""
        return mlp_forward(self.actor, self.policy_input(obs, goal))[0]


def select_action(agent: Agent, obs, explore: bool, rng=None) -> np.ndarray:
    """Actor output, optionally with Gaussian noise and uniform-random replacement."""
    o = np.asarray(obs.observation, dtype=np.float64)
    g = np.asarray(obs.desired_goal, dtype=np.float64)
    if o.shape != (agent.obs_dim,) or g.shape != (agent.goal_dim,):
        raise ValueError(f"observation/goal shapes {o.shape}/{g.shape} do not match agent")
    u = agent.act(o, g)
    if explore:
        hp = agent.hp
        u = u + hp.noise_eps * rng.standard_normal(agent.action_dim)
        if rng.random() < hp.random_eps:
            u = rng.uniform(-1.0, 1.0, size=agent.action_dim)
    return np.clip(u, -1.0, 1.0)


def _normalized_batch(agent: Agent, batch):
    o = agent.o_norm.normalize(batch.obs)
    o2 = agent.o_norm.normalize(batch.next_obs)
    g = agent.g_norm.normalize(batch.desired_goal)
    return np.concatenate([o, g], axis=1), np.concatenate([o2, g], axis=1)


def critic_targets(agent: Agent, batch) -> np.ndarray:
    """Clamped one-step TD targets ``r + gamma * Q'(s', pi'(s'))``."""
    _, x2 = _normalized_batch(agent, batch)
    a2, _ = mlp_forward(agent.actor_target, x2)
    q2, _ = mlp_forward(agent.critic_target, np.concatenate([x2, a2], axis=1))
    gamma = agent.hp.gamma
    y = batch.reward + gamma * q2[:, 0]
    return np.clip(y, -1.0 / (1.0 - gamma), 0.0)


def critic_loss_and_grads(agent: Agent, batch, y=None):
    """Mean squared TD error and its gradient w.r.t. the critic parameters."""
    if y is None:
        y = critic_targets(agent, batch)
    x, _ = _normalized_batch(agent, batch)
    q, cache = mlp_forward(agent.critic, np.concatenate([x, batch.action], axis=1))
    err = q[:, 0] - y
    loss = float(np.mean(err * err))
    dq = (2.0 / len(err)) * err[:, None]
    return loss, mlp_backward(agent.critic, cache, dq, input_grad=False)


def actor_loss_and_grads(agent: Agent, batch):
    """``-mean Q(s, pi(s)) + action_l2 * mean ||pi(s)||^2`` and its actor gradient."""
    x, _ = _normalized_batch(agent, batch)
    pi, a_cache = mlp_forward(agent.actor, x)
    q, c_cache = mlp_forward(agent.critic, np.concatenate([x, pi], axis=1))
    n = len(pi)
    loss = float(-np.mean(q) + agent.action_l2 * np.mean(np.sum(pi * pi, axis=1)))
    dq = np.full_like(q, -1.0 / n)
    dx = mlp_backward(agent.critic, c_cache, dq, param_grads=False).input
    dpi = dx[:, -agent.action_dim:] + (2.0 * agent.action_l2 / n) * pi
    return loss, mlp_backward(agent.actor, a_cache, dpi, input_grad=False)


def update_step(agent: Agent, batch) -> Tuple[float, float]:
    """One critic step then one actor step; returns ``(critic_loss, actor_loss)``."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    c_loss, c_grads = critic_loss_and_grads(agent, batch)
    if not np.isfinite(c_loss):
        raise NumericError("non-finite critic loss")
    adam_step(agent.critic, c_grads, agent.critic_opt, agent.hp.critic_lr)
    a_loss, a_grads = actor_loss_and_grads(agent, batch)
    if not np.isfinite(a_loss):
        raise NumericError("non-finite actor loss")
    adam_step(agent.actor, a_grads, agent.actor_opt, agent.hp.actor_lr)
    return c_loss, a_loss


def _blend(target: Mlp, main: Mlp, polyak: float) -> None:
    for k in range(target.n_layers):
        target.weights[k] = polyak * target.weights[k] + (1.0 - polyak) * main.weights[k]
        target.biases[k] = polyak * target.biases[k] + (1.0 - polyak) * main.biases[k]
    target.version += 1


def polyak_update(agent: Agent) -> Agent:
    _blend(agent.actor_target, agent.actor, agent.hp.polyak)
    _blend(agent.critic_target, agent.critic, agent.hp.polyak)
    return agent


@dataclass
class AgentConfig:
    """Network and replay settings that are not searched by the GA."""

    hidden: Tuple[int, ...] = (256, 256)
    action_l2: float = 1.0
    clip_range: float = 5.0
    buffer_episodes: int = 1000
    replay_k: float = 4.0

    def validate(self) -> "AgentConfig":
        if not self.hidden or any(int(h) < 1 for h in self.hidden):
            raise ValueError("hidden sizes must be positive")
        if self.action_l2 < 0 or self.clip_range <= 0:
            raise ValueError("action_l2 must be >= 0 and clip_range > 0")
        if self.buffer_episodes < 1 or self.replay_k < 0:
            raise ValueError("buffer_episodes must be >= 1 and replay_k >= 0")
        return self


def make_agent(spec, hp: Hyperparams, cfg: AgentConfig = AgentConfig(), seed=0) -> Agent:
    return Agent(spec.obs_dim, spec.goal_dim, spec.action_dim, hp, hidden=tuple(cfg.hidden),
                 seed=seed, action_l2=cfg.action_l2, clip_range=cfg.clip_range)
