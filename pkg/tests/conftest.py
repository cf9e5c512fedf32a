import numpy as np
import pytest

from evoddpg.envs import make_env
from evoddpg.replay import Episode


def random_episode(env_name="point-reach", seed=0, horizon=None):
    """Roll a uniform-random policy and pack the result into an Episode."""
    env = make_env(env_name)
    rng = np.random.default_rng(seed)
    obs = env.reset(seed)
    T = horizon or env.spec.max_episode_steps
    os_, ags, gs, us, rs = [obs.observation], [obs.achieved_goal], [], [], []
    for _ in range(T):
        u = rng.uniform(-1, 1, env.spec.action_dim)
        res = env.step(u)
        gs.append(obs.desired_goal)
        us.append(u)
        rs.append(res.reward)
        obs = res.obs
        os_.append(obs.observation)
        ags.append(obs.achieved_goal)
    return Episode(np.array(os_), np.array(ags), np.array(gs), np.array(us), np.array(rs))


@pytest.fixture
def episode_factory():
    return random_episode


VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[VERDICTS] = []


@pytest.fixture(scope="session")
def verdict(request):
    """Record one acceptance line; the lines are echoed at the end of the run."""
    lines = request.config.stash[VERDICTS]

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        lines.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
