"""Episode replay buffer with "future" hindsight relabeling."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Sequence, Union

import numpy as np

from .errors import EmptyBufferError


@dataclass
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    achieved_goal: np.ndarray
    next_achieved_goal: np.ndarray
    desired_goal: np.ndarray


@dataclass
class Episode:
    """One fixed-horizon rollout stored as arrays.

    ``obs`` and ``achieved_goals`` hold ``T + 1`` rows (the initial state plus
    one per step); ``actions``, ``desired_goals`` and ``rewards`` hold ``T``.
    Transition ``t`` runs from row ``t`` to row ``t + 1``, which makes the
    next-state chaining hold by construction.
    """

    obs: np.ndarray
    achieved_goals: np.ndarray
    desired_goals: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray

    def __post_init__(self):
        T = len(self.actions)
        if T < 1:
            raise ValueError("episode has no transitions")
        if (len(self.obs) != T + 1 or len(self.achieved_goals) != T + 1
                or len(self.desired_goals) != T or len(self.rewards) != T):
            raise ValueError("episode arrays have inconsistent lengths")

    def __len__(self):
        return len(self.actions)

    def transition(self, t: int) -> Transition:
        return Transition(self.obs[t].copy(), self.actions[t].copy(), float(self.rewards[t]),
                          self.obs[t + 1].copy(), self.achieved_goals[t].copy(),
                          self.achieved_goals[t + 1].copy(), self.desired_goals[t].copy())

    def transitions(self) -> List[Transition]:
        return [self.transition(t) for t in range(len(self))]

    @classmethod
    def from_transitions(cls, transitions: Sequence[Transition], atol: float = 0.0) -> "Episode":
        """Pack transitions, rejecting any break in obs / achieved-goal chaining."""
        if not transitions:
            raise ValueError("episode has no transitions")
        for t, (cur, nxt) in enumerate(zip(transitions[:-1], transitions[1:])):
            if not np.allclose(cur.next_obs, nxt.obs, rtol=0.0, atol=atol):
                raise ValueError(f"next_obs of step {t} does not match obs of step {t + 1}")
            if not np.allclose(cur.next_achieved_goal, nxt.achieved_goal, rtol=0.0, atol=atol):
                raise ValueError(f"next_achieved_goal of step {t} does not match step {t + 1}")
        obs = np.array([tr.obs for tr in transitions] + [transitions[-1].next_obs], dtype=np.float64)
        ag = np.array([tr.achieved_goal for tr in transitions] + [transitions[-1].next_achieved_goal],
                      dtype=np.float64)
        return cls(obs, ag,
                   np.array([tr.desired_goal for tr in transitions], dtype=np.float64),
                   np.array([tr.action for tr in transitions], dtype=np.float64),
                   np.array([tr.reward for tr in transitions], dtype=np.float64))


@dataclass
class TransitionBatch:
    """A sampled minibatch plus provenance of every row.

    ``episode_index`` counts stored episodes oldest-first, ``t`` is the
    sampled timestep and ``goal_t`` the timestep whose achieved goal became
    the desired goal (``-1`` where the original goal was kept).
    """

    obs: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_obs: np.ndarray
    achieved_goal: np.ndarray
    next_achieved_goal: np.ndarray
    desired_goal: np.ndarray
    relabeled: np.ndarray
    episode_index: np.ndarray
    t: np.ndarray
    goal_t: np.ndarray

    def __len__(self):
        return len(self.reward)

    @classmethod
    def from_transitions(cls, transitions: Sequence[Transition]) -> "TransitionBatch":
        n = len(transitions)
        stack = lambda name: np.array([getattr(tr, name) for tr in transitions], dtype=np.float64)
        return cls(stack("obs"), stack("action"), stack("reward"), stack("next_obs"),
                   stack("achieved_goal"), stack("next_achieved_goal"), stack("desired_goal"),
                   np.zeros(n, dtype=bool), np.full(n, -1), np.full(n, -1), np.full(n, -1))


class ReplayBuffer:
    """Ring of whole episodes; the oldest is evicted once ``capacity_episodes`` is hit."""

    def __init__(self, capacity_episodes: int = 1000, seed=None):
        if capacity_episodes < 1:
            raise ValueError("capacity_episodes must be positive")
        self.capacity_episodes = int(capacity_episodes)
        self.rng = np.random.default_rng(seed)
        self._arrays = None
        self._next = 0
        self.count = 0
        self.horizon = None

    def __len__(self):
        return self.count

    def _allocate(self, ep: Episode):
        T = len(ep)
        cap = self.capacity_episodes
        self.horizon = T
        self._arrays = {
            "obs": np.zeros((cap, T + 1, ep.obs.shape[1])),
            "ag": np.zeros((cap, T + 1, ep.achieved_goals.shape[1])),
            "g": np.zeros((cap, T, ep.desired_goals.shape[1])),
            "u": np.zeros((cap, T, ep.actions.shape[1])),
            "r": np.zeros((cap, T)),
        }

    def store(self, ep: Union[Episode, Sequence[Transition]]) -> "ReplayBuffer":
        if not isinstance(ep, Episode):
            ep = Episode.from_transitions(ep)
        if self._arrays is None:
            self._allocate(ep)
        a = self._arrays
        if (len(ep) != self.horizon or ep.obs.shape[1] != a["obs"].shape[2]
                or ep.achieved_goals.shape[1] != a["ag"].shape[2]
                or ep.actions.shape[1] != a["u"].shape[2]):
            raise ValueError("episode shape does not match episodes already stored")
        i = self._next
        a["obs"][i] = ep.obs
        a["ag"][i] = ep.achieved_goals
        a["g"][i] = ep.desired_goals
        a["u"][i] = ep.actions
        a["r"][i] = ep.rewards
        self._next = (i + 1) % self.capacity_episodes
        self.count = min(self.count + 1, self.capacity_episodes)
        return self

    def _slots(self) -> np.ndarray:
        # storage slots ordered oldest first
        start = (self._next - self.count) % self.capacity_episodes
        return (start + np.arange(self.count)) % self.capacity_episodes

    def episodes(self) -> List[Episode]:
        a = self._arrays
        return [Episode(a["obs"][s].copy(), a["ag"][s].copy(), a["g"][s].copy(),
                        a["u"][s].copy(), a["r"][s].copy()) for s in self._slots()]

    def sample(self, batch_size: int, replay_k: float,
               reward_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> TransitionBatch:
        """Draw ``batch_size`` transitions with "future" relabeling.

        Each row is relabeled with probability ``replay_k / (replay_k + 1)``:
        its desired goal becomes the achieved goal of a uniformly chosen
        later transition ``t' in (t, T)`` of the same episode. The final
        transition has no later one and always keeps its goal. Rewards of
        every row are recomputed with ``reward_fn``.
        """
        if self.count == 0:
            raise EmptyBufferError("cannot sample from an empty replay buffer")
        if batch_size < 1:
            raise ValueError("batch_size must be positive")
        if replay_k < 0:
            raise ValueError("replay_k must be non-negative")
        a, T, rng = self._arrays, self.horizon, self.rng
        ep_idx = rng.integers(0, self.count, size=batch_size)
        t = rng.integers(0, T, size=batch_size)
        coin = rng.random(batch_size)
        offset = rng.random(batch_size)
        slots = self._slots()[ep_idx]

        future_p = replay_k / (replay_k + 1.0)
        n_later = T - 1 - t
        relabel = (coin < future_p) & (n_later > 0)
        goal_t = np.where(relabel, t + 1 + np.floor(offset * n_later).astype(int), -1)

        g = a["g"][slots, t].copy()
        g[relabel] = a["ag"][slots[relabel], goal_t[relabel]]
        next_ag = a["ag"][slots, t + 1].copy()
        reward = np.asarray(reward_fn(next_ag, g), dtype=np.float64)
        return TransitionBatch(
            obs=a["obs"][slots, t].copy(), action=a["u"][slots, t].copy(), reward=reward,
            next_obs=a["obs"][slots, t + 1].copy(), achieved_goal=a["ag"][slots, t].copy(),
            next_achieved_goal=next_ag, desired_goal=g, relabeled=relabel,
            episode_index=ep_idx, t=t, goal_t=goal_t)


def buffer_store(buf: ReplayBuffer, ep) -> ReplayBuffer:
    return buf.store(ep)


def her_sample(buf: ReplayBuffer, batch_size: int, replay_k: float, reward_fn) -> TransitionBatch:
    return buf.sample(batch_size, replay_k, reward_fn)
