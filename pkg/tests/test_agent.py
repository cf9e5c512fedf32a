import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evoddpg.agent import (Agent, AgentConfig, Hyperparams, Normalizer, actor_loss_and_grads,
                           critic_loss_and_grads, critic_targets, make_agent, normalize,
                           normalizer_update, polyak_update, select_action, update_step)
from evoddpg.envs import GoalObservation, make_env
from evoddpg.nn import finite_diff_grad
from evoddpg.replay import TransitionBatch


def small_agent(hp=Hyperparams(), seed=0, **kw):
    return Agent(4, 2, 2, hp, hidden=(16, 16), seed=seed, **kw)


def batch_of(n, seed=0, reward=None):
    rng = np.random.default_rng(seed)
    r = rng.choice([-1.0, 0.0], size=n) if reward is None else np.full(n, reward)
    return TransitionBatch(rng.normal(size=(n, 4)), rng.uniform(-1, 1, (n, 2)), r,
                           rng.normal(size=(n, 4)), rng.normal(size=(n, 2)), rng.normal(size=(n, 2)),
                           rng.normal(size=(n, 2)), np.zeros(n, bool), np.zeros(n, int),
                           np.zeros(n, int), np.full(n, -1))


def obs_of(seed=0):
    rng = np.random.default_rng(seed)
    return GoalObservation(rng.normal(size=4), rng.normal(size=2), rng.normal(size=2))


def test_hyperparam_validation():
    Hyperparams().validate()
    with pytest.raises(ValueError):
        Hyperparams(gamma=1.0).validate()
    with pytest.raises(ValueError):
        Hyperparams(actor_lr=0.5).validate()
    hp = Hyperparams(0.95, 0.9, 2e-4, 3e-3, 0.1, 0.05)
    assert Hyperparams.from_vector(hp.as_vector()) == hp


def test_greedy_action_in_box_and_deterministic():
    agent = small_agent()
    o = obs_of()
    a = select_action(agent, o, explore=False)
    assert np.all(np.abs(a) <= 1.0)
    assert np.array_equal(a, select_action(agent, o, explore=False))
    with pytest.raises(ValueError):
        select_action(agent, GoalObservation(np.zeros(3), np.zeros(2), np.zeros(2)), False)


def test_zero_noise_exploration_equals_greedy():
    agent = small_agent(Hyperparams(noise_eps=0.0, random_eps=0.0))
    o = obs_of(1)
    rng = np.random.default_rng(0)
    assert np.array_equal(select_action(agent, o, True, rng), select_action(agent, o, False))


def test_full_random_eps_is_uniform():
    agent = small_agent(Hyperparams(random_eps=1.0))
    rng = np.random.default_rng(0)
    o = obs_of()
    acts = np.array([select_action(agent, o, True, rng) for _ in range(100_000)])
    assert np.all(np.abs(acts) <= 1.0)
    assert np.allclose(acts.mean(axis=0), 0.0, atol=0.01)
    assert np.allclose(acts.var(axis=0), 1 / 3, atol=0.01)


@settings(max_examples=25, deadline=None)
@given(noise=st.floats(0.0, 1.0), eps=st.floats(0.0, 1.0), seed=st.integers(0, 1000))
def test_exploration_stays_in_box(noise, eps, seed):
    agent = small_agent(Hyperparams(noise_eps=noise, random_eps=eps))
    a = select_action(agent, obs_of(seed), True, np.random.default_rng(seed))
    assert a.shape == (2,) and np.all(np.abs(a) <= 1.0)


def test_targets_with_gamma_zero_are_rewards():
    agent = small_agent(Hyperparams(gamma=0.0 + 1e-12))
    b = batch_of(32)
    assert np.allclose(critic_targets(agent, b), b.reward, atol=1e-9)


def test_targets_clamped_to_return_range():
    agent = small_agent(Hyperparams(gamma=0.9))
    agent.critic_target.biases[-1][:] = 100.0
    assert np.all(critic_targets(agent, batch_of(16)) == 0.0)
    agent.critic_target.biases[-1][:] = -1e3
    assert np.allclose(critic_targets(agent, batch_of(16, reward=-1.0)), -10.0)


def test_critic_gradient_matches_finite_differences():
    agent = small_agent(seed=3)
    b = batch_of(1, seed=3)
    y = critic_targets(agent, b)
    _, grads = critic_loss_and_grads(agent, b, y)

    def loss(net):
        saved, agent.critic = agent.critic, net
        try:
            return critic_loss_and_grads(agent, b, y)[0]
        finally:
            agent.critic = saved
    numeric = finite_diff_grad(agent.critic, loss, h=1e-6)
    assert np.allclose(grads.flat(), numeric.flat(), atol=1e-7, rtol=1e-5)


def test_actor_gradient_matches_finite_differences():
    agent = small_agent(seed=5)
    b = batch_of(8, seed=5)
    _, grads = actor_loss_and_grads(agent, b)

    def loss(net):
        saved, agent.actor = agent.actor, net
        try:
            return actor_loss_and_grads(agent, b)[0]
        finally:
            agent.actor = saved
    numeric = finite_diff_grad(agent.actor, loss, h=1e-6)
    assert np.allclose(grads.flat(), numeric.flat(), atol=1e-7, rtol=1e-5)


def test_update_step_moves_both_networks_only():
    agent = small_agent()
    targets = (agent.actor_target.get_flat(), agent.critic_target.get_flat())
    a0, c0 = agent.actor.get_flat(), agent.critic.get_flat()
    c_loss, a_loss = update_step(agent, batch_of(32))
    assert np.isfinite(c_loss) and np.isfinite(a_loss)
    assert not np.array_equal(a0, agent.actor.get_flat())
    assert not np.array_equal(c0, agent.critic.get_flat())
    assert np.array_equal(targets[0], agent.actor_target.get_flat())
    assert np.array_equal(targets[1], agent.critic_target.get_flat())


def test_polyak_identities_and_contraction():
    agent = small_agent(Hyperparams(polyak=1.0 - 1e-12))
    update_step(agent, batch_of(32))
    frozen = agent.actor_target.get_flat()
    polyak_update(agent)
    assert np.allclose(agent.actor_target.get_flat(), frozen, atol=1e-9)

    agent = small_agent(Hyperparams(polyak=0.9))
    agent.actor.set_flat(agent.actor.get_flat() + 1.0)
    before = np.linalg.norm(agent.actor_target.get_flat() - agent.actor.get_flat())
    polyak_update(agent)
    after = np.linalg.norm(agent.actor_target.get_flat() - agent.actor.get_flat())
    assert np.isclose(after, 0.9 * before)

    agent.hp = Hyperparams(polyak=0.5)
    t, m = agent.critic_target.get_flat(), agent.critic.get_flat()
    polyak_update(agent)
    assert np.allclose(agent.critic_target.get_flat(), 0.5 * t + 0.5 * m)


def test_polyak_zero_copies_main():
    agent = small_agent(Hyperparams(polyak=0.0))
    agent.actor.set_flat(agent.actor.get_flat() * 2)
    polyak_update(agent)
    assert np.array_equal(agent.actor_target.get_flat(), agent.actor.get_flat())


def test_normalizer_matches_sample_statistics():
    rng = np.random.default_rng(0)
    x = rng.normal(5.0, 2.0, size=(100_000, 3))
    norm = normalizer_update(Normalizer(3), x)
    assert np.allclose(norm.mean, 5.0, atol=0.02)
    assert np.allclose(norm.std, 2.0, atol=0.02)
    z = normalize(norm, x)
    assert np.all(np.abs(z) <= 5.0)
    assert np.allclose(z.mean(axis=0), 0.0, atol=0.01)


def test_fresh_normalizer_is_finite():
    z = Normalizer(3).normalize(np.array([1e300, -1e300, 0.0]))
    assert np.all(np.isfinite(z)) and np.array_equal(z, [5.0, -5.0, 0.0])


def test_normalizer_constant_input_and_clipping():
    norm = Normalizer(2)
    norm.update(np.ones((10, 2)))
    assert np.all(norm.std >= 0.01)
    assert np.all(norm.normalize(np.array([100.0, -100.0])) == [5.0, -5.0])
    # order of updates does not matter
    rng = np.random.default_rng(1)
    data = rng.normal(size=(40, 2))
    a, b = Normalizer(2), Normalizer(2)
    a.update(data)
    for row in data[::-1]:
        b.update(row)
    assert np.allclose(a.mean, b.mean) and np.allclose(a.std, b.std)


def test_make_agent_uses_env_dims():
    spec = make_env("arm-reach").spec
    agent = make_agent(spec, Hyperparams(), AgentConfig(hidden=(8,)), seed=1)
    assert agent.actor.layer_sizes == [spec.obs_dim + spec.goal_dim, 8, spec.action_dim]
    assert agent.critic.layer_sizes[0] == spec.obs_dim + spec.goal_dim + spec.action_dim
    with pytest.raises(ValueError):
        AgentConfig(replay_k=-1).validate()
