"""Epoch / cycle / episode training loop and greedy evaluation."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .agent import Agent, AgentConfig, Hyperparams, make_agent, polyak_update, select_action, update_step
from .envs import GoalEnv
from .errors import NumericError
from .replay import Episode, ReplayBuffer


@dataclass
class TrainConfig:
    epochs_max: int = 50
    cycles_per_epoch: int = 10
    episodes_per_cycle: int = 2
    updates_per_cycle: int = 40
    batch_size: int = 256
    eval_episodes: int = 10
    success_stop_threshold: float = 0.9
    seed: int = 0

    @property
    def episodes_per_epoch(self) -> int:
        return self.cycles_per_epoch * self.episodes_per_cycle

    def validate(self) -> "TrainConfig":
        for name in ("epochs_max", "cycles_per_epoch", "episodes_per_cycle",
                     "updates_per_cycle", "batch_size", "eval_episodes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not 0 < self.success_stop_threshold <= 1:
            raise ValueError("success_stop_threshold must lie in (0, 1]")
        return self


@dataclass
class EpochRecord:
    epoch: int
    episodes: int
    steps: int
    wall_clock_s: float
    eval_success_rate: float
    eval_median_total_reward: float
    critic_loss: float
    actor_loss: float


@dataclass
class RunMetrics:
    records: List[EpochRecord]
    horizon: int
    episodes_per_epoch: int
    epochs_max: int
    eval_seed: int
    reached: bool = False
    failed: bool = False
    epochs_to_goal: Optional[int] = None
    episodes_to_goal: Optional[int] = None
    steps_to_goal: Optional[int] = None
    time_to_goal_s: Optional[float] = None
    wall_time_s: float = 0.0
    agent: Optional[Agent] = field(default=None, repr=False, compare=False)

    @property
    def fitness_epochs(self) -> int:
        """Epochs to goal, or ``epochs_max + 1`` for runs that never got there."""
        return self.epochs_to_goal if self.reached else self.epochs_max + 1

    @property
    def final_success_rate(self) -> float:
        return self.records[-1].eval_success_rate if self.records else 0.0

    @property
    def final_median_reward(self) -> float:
        return self.records[-1].eval_median_total_reward if self.records else -float(self.horizon)

    def summary(self) -> dict:
        last = self.records[-1] if self.records else None
        return {
            "reached": self.reached,
            "failed": self.failed,
            "epochs_to_goal": self.epochs_to_goal,
            "episodes_to_goal": self.episodes_to_goal,
            "steps_to_goal": self.steps_to_goal,
            "time_to_goal_s": self.time_to_goal_s,
            "epochs_run": last.epoch if last else 0,
            "episodes_total": last.episodes if last else 0,
            "steps_total": last.steps if last else 0,
            "wall_time_s": self.wall_time_s,
            "fitness_epochs": self.fitness_epochs,
            "final_success_rate": self.final_success_rate,
            "final_median_reward": self.final_median_reward,
            "horizon": self.horizon,
            "episodes_per_epoch": self.episodes_per_epoch,
            "eval_seed": self.eval_seed,
        }


def rollout(env: GoalEnv, policy: Callable, seed) -> tuple:
    """Run one full episode; return ``(Episode, step_results)``."""
    obs = env.reset(seed)
    T = env.spec.max_episode_steps
    o = [obs.observation]
    ag = [obs.achieved_goal]
    g, u, r, results = [], [], [], []
    for _ in range(T):
        action = policy(obs)
        res = env.step(action)
        g.append(obs.desired_goal)
        u.append(np.clip(action, -1.0, 1.0))
        r.append(res.reward)
        obs = res.obs
        o.append(obs.observation)
        ag.append(obs.achieved_goal)
        results.append(res)
    ep = Episode(np.array(o), np.array(ag), np.array(g), np.array(u), np.array(r))
    return ep, results


def _eval_seeds(seed, episodes):
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(episodes)]


def evaluate(env: GoalEnv, agent, episodes: int, seed=0):
    """Greedy rollouts; return ``(success_rate, median_total_reward)``.

    ``agent`` may be an :class:`Agent` or any callable mapping a
    :class:`GoalObservation` to an action. An episode counts as a success
    when its final step is a success.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if isinstance(agent, Agent):
        policy = lambda obs: select_action(agent, obs, explore=False)
    else:
        policy = agent
    successes, totals = [], []
    for s in _eval_seeds(seed, episodes):
        _, results = rollout(env, policy, s)
        successes.append(results[-1].is_success)
        totals.append(sum(res.reward for res in results))
    return float(np.mean(successes)), float(np.median(totals))


def train_run(env: GoalEnv, hp: Hyperparams, cfg: TrainConfig,
              agent_cfg: AgentConfig = AgentConfig(),
              on_epoch: Optional[Callable[[EpochRecord], None]] = None) -> RunMetrics:
    """Train one agent until greedy success reaches the stop threshold or epochs run out."""
    cfg.validate()
    start = time.perf_counter()
    seq = np.random.SeedSequence(cfg.seed)
    init_seed, buf_seed, explore_seed, env_seed, eval_seed = (
        int(s) for s in seq.generate_state(5))
    spec = env.spec
    agent = make_agent(spec, hp, agent_cfg, seed=init_seed)
    buffer = ReplayBuffer(agent_cfg.buffer_episodes, seed=buf_seed)
    explore_rng = np.random.default_rng(explore_seed)
    env_rng = np.random.default_rng(env_seed)
    reward_fn = env.compute_reward
    explore = lambda obs: select_action(agent, obs, explore=True, rng=explore_rng)

    metrics = RunMetrics([], spec.max_episode_steps, cfg.episodes_per_epoch, cfg.epochs_max,
                         eval_seed, agent=agent)
    episodes = 0
    try:
        for epoch in range(1, cfg.epochs_max + 1):
            c_losses, a_losses = [], []
            for _ in range(cfg.cycles_per_epoch):
                for _ in range(cfg.episodes_per_cycle):
                    ep, _ = rollout(env, explore, int(env_rng.integers(2 ** 31)))
                    buffer.store(ep)
                    agent.o_norm.update(ep.obs)
                    agent.g_norm.update(ep.desired_goals)
                    agent.g_norm.update(ep.achieved_goals)
                    episodes += 1
                for _ in range(cfg.updates_per_cycle):
                    batch = buffer.sample(cfg.batch_size, agent_cfg.replay_k, reward_fn)
                    c, a = update_step(agent, batch)
                    c_losses.append(c)
                    a_losses.append(a)
                polyak_update(agent)
            success, median_reward = evaluate(env, agent, cfg.eval_episodes, eval_seed)
            rec = EpochRecord(epoch, episodes, episodes * spec.max_episode_steps,
                              time.perf_counter() - start, success, median_reward,
                              float(np.mean(c_losses)), float(np.mean(a_losses)))
            metrics.records.append(rec)
            if on_epoch is not None:
                on_epoch(rec)
            if success >= cfg.success_stop_threshold:
                metrics.reached = True
                metrics.epochs_to_goal = epoch
                metrics.episodes_to_goal = rec.episodes
                metrics.steps_to_goal = rec.steps
                metrics.time_to_goal_s = rec.wall_clock_s
                break
    except (NumericError, FloatingPointError):
        metrics.failed = True
        metrics.reached = False
    metrics.wall_time_s = time.perf_counter() - start
    return metrics


def record_dict(rec: EpochRecord) -> dict:
    return asdict(rec)
