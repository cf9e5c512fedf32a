"""Goal-conditioned toy environments with sparse rewards.

Three fixed-horizon tasks share one interface:

* ``point-reach``: a 2-D point moved directly by the action.
* ``arm-reach``: a 3-joint planar arm; goals are joint configurations.
* ``planar-push``: an agent disk must shove a block disk onto a target.

Actions live in ``[-1, 1]^action_dim`` and are clamped by the env. The
reward is ``0`` when the achieved goal lies within
``success_threshold_distance`` of the desired goal and ``-1`` otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SUCCESS_THRESHOLD = 0.05
HORIZON = 50


@dataclass(frozen=True)
class EnvSpec:
    name: str
    obs_dim: int
    goal_dim: int
    action_dim: int
    max_episode_steps: int = HORIZON
    success_threshold_distance: float = SUCCESS_THRESHOLD
    # displacement (workspace units) produced by a unit action
    action_scale: float = 0.1


@dataclass
class GoalObservation:
    observation: np.ndarray
    achieved_goal: np.ndarray
    desired_goal: np.ndarray

    def copy(self) -> "GoalObservation":
        return GoalObservation(self.observation.copy(), self.achieved_goal.copy(),
                               self.desired_goal.copy())


@dataclass
class StepResult:
    obs: GoalObservation
    reward: float
    done: bool
    is_success: bool


def compute_reward(achieved_goal, desired_goal, spec: EnvSpec):
    """Sparse reward: 0 within the success radius, else -1.

    Works on single goals or on batches (leading axes broadcast); a batch
    returns an array of rewards.
    """
    ag = np.asarray(achieved_goal, dtype=np.float64)
    dg = np.asarray(desired_goal, dtype=np.float64)
    if ag.shape != dg.shape:
        raise ValueError(f"goal shapes differ: {ag.shape} vs {dg.shape}")
    d = np.linalg.norm(ag - dg, axis=-1)
    r = np.where(d > spec.success_threshold_distance, -1.0, 0.0)
    return float(r) if r.ndim == 0 else r


class GoalEnv:
    spec: EnvSpec

    def __init__(self):
        self._t = 0
        self.goal = np.zeros(self.spec.goal_dim)

    def reset(self, seed=None) -> GoalObservation:
        rng = np.random.default_rng(seed)
        self._t = 0
        self._sample_state(rng)
        return self.observe()

    def step(self, action) -> StepResult:
        a = np.asarray(action, dtype=np.float64)
        if a.shape != (self.spec.action_dim,):
            raise ValueError(f"action must have shape ({self.spec.action_dim},), got {a.shape}")
        a = np.clip(a, -1.0, 1.0)
        self._apply(a)
        self._t += 1
        obs = self.observe()
        reward = compute_reward(obs.achieved_goal, obs.desired_goal, self.spec)
        return StepResult(obs, reward, self._t >= self.spec.max_episode_steps, reward == 0.0)

    def compute_reward(self, achieved_goal, desired_goal):
        return compute_reward(achieved_goal, desired_goal, self.spec)

    def observe(self) -> GoalObservation:
        return GoalObservation(self._observation(), self._achieved(), self.goal.copy())

    def scripted_action(self) -> np.ndarray:
        """Proportional controller toward the current goal; used for reachability checks."""
        raise NotImplementedError

    # subclass hooks
    def _sample_state(self, rng):
        raise NotImplementedError

    def _apply(self, a):
        raise NotImplementedError

    def _observation(self):
        raise NotImplementedError

    def _achieved(self):
        raise NotImplementedError


class PointReach(GoalEnv):
    """Point in ``[-1, 1]^2``; obs = (position, velocity), goal = position.

    The start is uniform in ``[-0.5, 0.5]^2`` and the goal is the start plus
    a uniform offset in ``[-goal_range, goal_range]^2``.
    """

    spec = EnvSpec("point-reach", obs_dim=4, goal_dim=2, action_dim=2)
    bound = 1.0
    goal_range = 0.5

    def __init__(self):
        super().__init__()
        self.position = np.zeros(2)
        self.velocity = np.zeros(2)

    def _sample_state(self, rng):
        self.position = rng.uniform(-0.5, 0.5, size=2)
        self.velocity = np.zeros(2)
        self.goal = self.position + rng.uniform(-self.goal_range, self.goal_range, size=2)

    def _apply(self, a):
        new = np.clip(self.position + self.spec.action_scale * a, -self.bound, self.bound)
        self.velocity = new - self.position
        self.position = new

    def _observation(self):
        return np.concatenate([self.position, self.velocity])

    def _achieved(self):
        return self.position.copy()

    def scripted_action(self):
        return np.clip((self.goal - self.position) / self.spec.action_scale, -1.0, 1.0)


class ArmReach(GoalEnv):
    """Planar 3-link arm reaching a joint-space target.

    Joint angles are kept in ``[-pi/2, pi/2]`` and exposed normalized to
    ``[-1, 1]`` (angle divided by pi/2); goals and the success radius use the
    normalized coordinates. obs = (normalized joints, end-effector xy).
    Starts are uniform in ``[-0.5, 0.5]^3`` (normalized) and goals add a
    uniform offset in ``[-goal_range, goal_range]^3``, clipped to the limits.
    """

    spec = EnvSpec("arm-reach", obs_dim=5, goal_dim=3, action_dim=3)
    link_lengths = (0.4, 0.3, 0.2)
    joint_limit = np.pi / 2
    goal_range = 0.5

    def __init__(self):
        super().__init__()
        self.joints = np.zeros(3)

    def _sample_state(self, rng):
        self.joints = rng.uniform(-0.5, 0.5, size=3)
        self.goal = np.clip(self.joints + rng.uniform(-self.goal_range, self.goal_range, size=3),
                            -1.0, 1.0)

    def _apply(self, a):
        self.joints = np.clip(self.joints + self.spec.action_scale * a, -1.0, 1.0)

    def end_effector(self):
        return forward_kinematics(self.joints * self.joint_limit, self.link_lengths)

    def _observation(self):
        return np.concatenate([self.joints, self.end_effector()])

    def _achieved(self):
        return self.joints.copy()

    def scripted_action(self):
        return np.clip((self.goal - self.joints) / self.spec.action_scale, -1.0, 1.0)


def forward_kinematics(angles, link_lengths):
    """End-effector position of a planar serial chain with relative joint angles."""
    cum = np.cumsum(angles)
    lengths = np.asarray(link_lengths)
    return np.array([np.sum(lengths * np.cos(cum)), np.sum(lengths * np.sin(cum))])


class PlanarPush(GoalEnv):
    """Agent disk pushes a block disk; the goal is the block position.

    Each step moves the agent by ``action_scale * action`` in ``substeps``
    equal increments. After every increment, if the centers are closer than
    ``agent_radius + block_radius``, the block is moved along the line of
    centers until the disks just touch. Both disks are clamped to the
    workspace ``[-1, 1]^2``. obs = (agent xy, block xy, block - agent).
    """

    spec = EnvSpec("planar-push", obs_dim=6, goal_dim=2, action_dim=2)
    agent_radius = 0.05
    block_radius = 0.05
    substeps = 4
    bound = 1.0

    def __init__(self):
        super().__init__()
        self.agent = np.zeros(2)
        self.block = np.zeros(2)

    @property
    def contact_distance(self):
        return self.agent_radius + self.block_radius

    def _sample_state(self, rng):
        # resample until the scripted pusher can solve it within the horizon
        while True:
            self.block = rng.uniform(-0.5, 0.5, size=2)
            angle = rng.uniform(0, 2 * np.pi)
            dist = rng.uniform(0.1, 0.35)
            self.goal = self.block + dist * np.array([np.cos(angle), np.sin(angle)])
            while True:
                self.agent = rng.uniform(-0.7, 0.7, size=2)
                if np.linalg.norm(self.agent - self.block) > 2 * self.contact_distance:
                    break
            if self._scripted_solves():
                return

    def _scripted_solves(self):
        saved = self.agent.copy(), self.block.copy()
        for _ in range(self.spec.max_episode_steps):
            self._apply(self.scripted_action())
        ok = np.linalg.norm(self.block - self.goal) <= self.spec.success_threshold_distance
        self.agent, self.block = saved
        return bool(ok)

    def _apply(self, a):
        inc = self.spec.action_scale * a / self.substeps
        for _ in range(self.substeps):
            self.agent = np.clip(self.agent + inc, -self.bound, self.bound)
            gap = self.block - self.agent
            d = np.linalg.norm(gap)
            if d < self.contact_distance:
                direction = gap / d if d > 1e-12 else inc / (np.linalg.norm(inc) + 1e-12)
                self.block = np.clip(self.agent + self.contact_distance * direction,
                                     -self.bound, self.bound)

    def _observation(self):
        return np.concatenate([self.agent, self.block, self.block - self.agent])

    def _achieved(self):
        return self.block.copy()

    def scripted_action(self):
        to_goal = self.goal - self.block
        dist = np.linalg.norm(to_goal)
        if dist < 1e-9:
            return np.zeros(2)
        u = to_goal / dist
        cd = self.contact_distance
        rel = self.agent - self.block
        along = rel @ u
        lateral = rel - along * u
        if along < -0.8 * cd and np.linalg.norm(lateral) < 0.01:
            # lined up behind the block: push, stopping when it reaches the goal
            step = min(dist + max(0.0, -along - cd), self.spec.action_scale)
            target = self.agent + step * u - lateral
        else:
            behind = self.block - (cd + 0.02) * u
            if _segment_clearance(self.agent, behind, self.block) > cd + 0.005:
                target = behind
            else:
                # orbit the block toward the pre-push side
                orbit = cd + 0.04
                theta = np.arctan2(rel[1], rel[0])
                want = np.arctan2(-u[1], -u[0])
                delta = (want - theta + np.pi) % (2 * np.pi) - np.pi
                theta += np.clip(delta, -0.6, 0.6)
                target = self.block + orbit * np.array([np.cos(theta), np.sin(theta)])
        return np.clip((target - self.agent) / self.spec.action_scale, -1.0, 1.0)


def _segment_clearance(a, b, c):
    """Smallest distance from point ``c`` to the segment ``a``-``b``."""
    ab = b - a
    denom = ab @ ab
    s = 0.0 if denom < 1e-18 else np.clip((c - a) @ ab / denom, 0.0, 1.0)
    return float(np.linalg.norm(a + s * ab - c))


ENVS = {"point-reach": PointReach, "arm-reach": ArmReach, "planar-push": PlanarPush}


def make_env(name: str) -> GoalEnv:
    try:
        return ENVS[name]()
    except KeyError:
        raise ValueError(f"unknown env {name!r}; choose from {sorted(ENVS)}") from None


def run_scripted_episode(env: GoalEnv, seed) -> list:
    env.reset(seed)
    return [env.step(env.scripted_action()) for _ in range(env.spec.max_episode_steps)]
