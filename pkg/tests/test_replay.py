import numpy as np
import pytest

from evoddpg.envs import compute_reward, make_env
from evoddpg.errors import EmptyBufferError
from evoddpg.replay import Episode, ReplayBuffer, buffer_store, her_sample

SPEC = make_env("point-reach").spec


def reward_fn(ag, g):
    return compute_reward(ag, g, SPEC)


def test_empty_buffer_raises():
    with pytest.raises(EmptyBufferError):
        ReplayBuffer(5, seed=0).sample(4, 4.0, reward_fn)


def test_ring_keeps_newest_in_order(episode_factory):
    buf = ReplayBuffer(2, seed=0)
    eps = [episode_factory(seed=s) for s in range(3)]
    counts = [buffer_store(buf, ep).count for ep in eps]
    assert counts == [1, 2, 2]
    stored = buf.episodes()
    assert len(stored) == 2
    for got, want in zip(stored, eps[1:]):
        assert np.array_equal(got.obs, want.obs) and np.array_equal(got.actions, want.actions)


def test_store_from_transitions_round_trip(episode_factory):
    ep = episode_factory(seed=3)
    buf = ReplayBuffer(2).store(ep.transitions())
    back = buf.episodes()[0]
    for name in ("obs", "achieved_goals", "desired_goals", "actions", "rewards"):
        assert np.array_equal(getattr(back, name), getattr(ep, name))


def test_chaining_break_rejected(episode_factory):
    trs = episode_factory(seed=1).transitions()
    trs[5].obs = trs[5].obs + 1.0
    with pytest.raises(ValueError):
        Episode.from_transitions(trs)


def test_store_rejects_shape_mismatch(episode_factory):
    buf = ReplayBuffer(4).store(episode_factory(seed=0))
    with pytest.raises(ValueError):
        buf.store(episode_factory(seed=0, horizon=10))


def test_k_zero_returns_unmodified_transitions(episode_factory):
    ep = episode_factory(seed=2)
    buf = ReplayBuffer(4, seed=1).store(ep)
    b = her_sample(buf, 500, 0.0, reward_fn)
    assert not b.relabeled.any()
    assert np.array_equal(b.desired_goal, ep.desired_goals[b.t])
    assert np.array_equal(b.reward, ep.rewards[b.t])
    assert np.array_equal(b.obs, ep.obs[b.t]) and np.array_equal(b.next_obs, ep.obs[b.t + 1])


def test_relabel_fraction_and_provenance(episode_factory):
    eps = [episode_factory(seed=s) for s in range(20)]
    buf = ReplayBuffer(50, seed=4)
    for ep in eps:
        buf.store(ep)
    b = buf.sample(10_000, 4.0, reward_fn)
    # 0.8 of rows with a later transition; the last step never has one
    assert abs(b.relabeled.mean() - 0.8) <= 0.02
    r = b.relabeled
    assert np.all(b.goal_t[r] > b.t[r]) and np.all(b.goal_t[r] <= 49)
    assert np.all(b.goal_t[~r] == -1)
    for i in np.flatnonzero(r)[:500]:
        ep = eps[b.episode_index[i]]
        assert np.array_equal(b.desired_goal[i], ep.achieved_goals[b.goal_t[i]])
    assert np.array_equal(b.reward, compute_reward(b.next_achieved_goal, b.desired_goal, SPEC))
    assert np.array_equal(b.next_achieved_goal, np.array(
        [eps[e].achieved_goals[t + 1] for e, t in zip(b.episode_index, b.t)]))


def test_sampling_is_seed_deterministic(episode_factory):
    def draw():
        buf = ReplayBuffer(10, seed=9)
        for s in range(4):
            buf.store(episode_factory(seed=s))
        return buf.sample(64, 4.0, reward_fn)
    a, b = draw(), draw()
    assert np.array_equal(a.desired_goal, b.desired_goal) and np.array_equal(a.t, b.t)


def test_sampling_does_not_mutate_buffer(episode_factory):
    buf = ReplayBuffer(4, seed=0)
    for s in range(3):
        buf.store(episode_factory(seed=s))
    before = buf.episodes()
    batch = buf.sample(256, 4.0, reward_fn)
    batch.desired_goal[:] = 99.0
    for x, y in zip(before, buf.episodes()):
        assert np.array_equal(x.desired_goals, y.desired_goals)
        assert np.array_equal(x.rewards, y.rewards)


def test_bad_arguments():
    buf = ReplayBuffer(2)
    with pytest.raises(ValueError):
        ReplayBuffer(0)
    with pytest.raises(ValueError):
        Episode(np.zeros((3, 2)), np.zeros((3, 2)), np.zeros((2, 2)), np.zeros((2, 2)), np.zeros(3))
    assert len(buf) == 0
