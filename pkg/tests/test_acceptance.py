"""Acceptance checks, one test per criterion.

Criteria 1-3 train real agents and take roughly half an hour on a single
core; they share one session fixture so each GA search and comparison runs
once. Every test records a PASS/FAIL line that is echoed in the terminal
summary.
"""
import json
import time
from pathlib import Path

import numpy as np
import pytest

from evoddpg.agent import (Agent, AgentConfig, Hyperparams, actor_loss_and_grads,
                           critic_loss_and_grads, critic_targets, polyak_update)
from evoddpg.cli import main
from evoddpg.envs import compute_reward, make_env
from evoddpg.ga import GENE_SPECS, Chromosome, Fitness, GaConfig, TrainFitness, fitness_key, ga_run
from evoddpg.nn import finite_diff_grad
from evoddpg.replay import ReplayBuffer, TransitionBatch
from evoddpg.report import compare, run_arm
from evoddpg.rundir import RunDirectory, check_summary_counters, read_jsonl, strip_wall_clock
from evoddpg.trainer import TrainConfig

from conftest import random_episode

ENVS = ("point-reach", "arm-reach")
# 64-unit nets keep the GA affordable on one core; see the README
SEARCH_AGENT = AgentConfig(hidden=(64, 64))
GA_TRAIN = TrainConfig(epochs_max=20, seed=0)
COMPARE_TRAIN = TrainConfig(epochs_max=50, seed=1)
N_SEEDS = 3


@pytest.fixture(scope="session")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="session")
def efficiency(workdir):
    """GA search (defaults) then baseline-vs-tuned comparison on held-out seeds, per env."""
    out = {}
    start = time.perf_counter()
    for env in ENVS:
        t0 = time.perf_counter()
        result = ga_run(TrainFitness(env, GA_TRAIN, SEARCH_AGENT), GaConfig(seed=0))
        t_ga = time.perf_counter() - t0
        report = compare(env, Hyperparams(), result.best.chromosome.to_hyperparams(), N_SEEDS,
                         COMPARE_TRAIN, SEARCH_AGENT, workdir / env)
        out[env] = {"ga": result, "report": report, "ga_s": t_ga,
                    "total_s": time.perf_counter() - t0}
        (workdir / env / "ga_history.json").write_text(
            json.dumps([r.to_json() for r in result.history], indent=1))
    out["elapsed_s"] = time.perf_counter() - start
    return out


def _arm_values(report, metric):
    base, tuned = report["arms"].values()
    return base[f"{metric}_penalized"], tuned[f"{metric}_penalized"]


@pytest.mark.slow
def test_criterion_1_ga_best_needs_no_more_epochs(efficiency, verdict):
    parts, ok_all, strict = [], True, []
    for env in ENVS:
        base, tuned = _arm_values(efficiency[env]["report"], "epochs")
        ok_all &= tuned <= base
        if tuned < base:
            strict.append(env)
        parts.append(f"{env} epochs baseline {base:.2f} vs GA {tuned:.2f}")
    minutes = efficiency["elapsed_s"] / 60
    ok = ok_all and bool(strict) and minutes <= 90
    verdict(1, ok, "; ".join(parts) + f"; strict on {strict or 'none'}; {minutes:.1f} min")
    assert ok


@pytest.mark.slow
def test_criterion_2_wall_time_reduction(efficiency, verdict):
    best = None
    for env in ENVS:
        base_e, tuned_e = _arm_values(efficiency[env]["report"], "epochs")
        if tuned_e < base_e:
            base_t, tuned_t = _arm_values(efficiency[env]["report"], "time_s")
            red = 100.0 * (base_t - tuned_t) / base_t
            if best is None or red > best[1]:
                best = (env, red, base_t, tuned_t)
    if best is None:
        verdict(2, False, "no env with strictly fewer epochs")
        pytest.fail("criterion 1 not strict on any env")
    env, red, base_t, tuned_t = best
    ok = red >= 10.0
    verdict(2, ok, f"{env} mean wall time {base_t:.1f}s -> {tuned_t:.1f}s ({red:.1f}% reduction)")
    assert ok


@pytest.mark.slow
def test_criterion_3_baseline_learns_point_reach(workdir, verdict):
    t0 = time.perf_counter()
    summaries = run_arm("point-reach", "baseline-256", Hyperparams(), range(N_SEEDS),
                        TrainConfig(epochs_max=50), AgentConfig(), workdir / "baseline")
    minutes = (time.perf_counter() - t0) / 60
    reached = [s["epochs_to_goal"] for s in summaries]
    n = sum(s["reached"] for s in summaries)
    ok = n >= 2 and minutes <= 10
    verdict(3, ok, f"{n}/3 seeds reached 0.9 (epochs {reached}) in {minutes:.1f} min")
    assert ok


def _instance(seed):
    rng = np.random.default_rng(seed)
    agent = Agent(3, 2, 2, Hyperparams(gamma=0.9), hidden=(8, 8), seed=seed)
    for norm in (agent.o_norm, agent.g_norm):
        norm.update(rng.normal(size=(20, norm.size)))
    n = 4
    batch = TransitionBatch(rng.normal(size=(n, 3)), rng.uniform(-1, 1, (n, 2)),
                            rng.choice([-1.0, 0.0], n), rng.normal(size=(n, 3)),
                            rng.normal(size=(n, 2)), rng.normal(size=(n, 2)),
                            rng.normal(size=(n, 2)), np.zeros(n, bool), np.zeros(n, int),
                            np.zeros(n, int), np.full(n, -1))
    return agent, batch


def _max_rel_err(a, b, floor=1e-6):
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), floor)))


def _swap_loss(agent, attr, loss_fn):
    def loss(net):
        saved = getattr(agent, attr)
        setattr(agent, attr, net)
        try:
            return loss_fn()
        finally:
            setattr(agent, attr, saved)
    return loss


def test_criterion_4_gradients_match_finite_differences(verdict):
    worst = {"actor": 0.0, "critic": 0.0}
    sizes = set()
    for seed in range(20):
        agent, batch = _instance(seed)
        sizes.update({agent.actor.n_params, agent.critic.n_params})
        y = critic_targets(agent, batch)
        _, g = critic_loss_and_grads(agent, batch, y)
        num = finite_diff_grad(agent.critic, _swap_loss(
            agent, "critic", lambda: critic_loss_and_grads(agent, batch, y)[0]), h=1e-5)
        worst["critic"] = max(worst["critic"], _max_rel_err(g.flat(), num.flat()))
        _, g = actor_loss_and_grads(agent, batch)
        num = finite_diff_grad(agent.actor, _swap_loss(
            agent, "actor", lambda: actor_loss_and_grads(agent, batch)[0]), h=1e-5)
        worst["actor"] = max(worst["actor"], _max_rel_err(g.flat(), num.flat()))
    ok = max(sizes) <= 200 and max(worst.values()) <= 1e-4
    verdict(4, ok, f"20 instances, nets of {sorted(sizes)} params, max rel err "
                   f"actor {worst['actor']:.1e} critic {worst['critic']:.1e}")
    assert ok


def test_criterion_5_her_relabeling(verdict):
    spec = make_env("point-reach").spec
    episodes = [random_episode("point-reach", seed=s) for s in range(50)]
    buf = ReplayBuffer(100, seed=0)
    for ep in episodes:
        buf.store(ep)
    b = buf.sample(100_000, 4.0, lambda ag, g: compute_reward(ag, g, spec))
    frac = float(b.relabeled.mean())
    r = b.relabeled
    rewards_ok = np.array_equal(b.reward[r], compute_reward(b.next_achieved_goal[r],
                                                            b.desired_goal[r], spec))
    later_ok = bool(np.all(b.goal_t[r] > b.t[r]))
    src = np.array([episodes[e].achieved_goals[gt]
                    for e, gt in zip(b.episode_index[r], b.goal_t[r])])
    trace_ok = np.array_equal(src, b.desired_goal[r])
    ok = abs(frac - 0.80) <= 0.02 and rewards_ok and later_ok and trace_ok
    verdict(5, ok, f"relabel fraction {frac:.4f} over 1e5 draws; rewards recomputed {rewards_ok}; "
                   f"goals from strictly later steps {later_ok and trace_ok}")
    assert ok


def test_criterion_6_polyak_identities(verdict):
    def blended(tau):
        agent = Agent(4, 2, 2, Hyperparams(polyak=tau), hidden=(16,), seed=1)
        agent.actor.set_flat(agent.actor.get_flat() + np.random.default_rng(0).normal(
            size=agent.actor.n_params))
        t, m = agent.actor_target.get_flat(), agent.actor.get_flat()
        polyak_update(agent)
        return agent.actor_target.get_flat(), t, m
    new, t, m = blended(1.0)
    keep = np.array_equal(new, t)
    new, t, m = blended(0.0)
    copy = np.array_equal(new, m)
    new, t, m = blended(0.95)
    err = float(np.max(np.abs(new - (0.95 * t + 0.05 * m))))
    ok = keep and copy and err <= np.finfo(float).eps
    verdict(6, ok, f"tau=1 keeps target {keep}; tau=0 copies main {copy}; tau=0.95 max err {err:.1e}")
    assert ok


def test_criterion_7_ga_properties(verdict):
    lo = np.array([s.search_low for s in GENE_SPECS])
    hi = np.array([s.search_high for s in GENE_SPECS])
    stub = lambda c: Fitness(float(np.mean((c.array() - lo) / (hi - lo))), 0.0, 0.0)
    seen = []
    res = ga_run(stub, GaConfig(seed=0), on_generation=lambda g, pop: seen.extend(pop))
    keys = [fitness_key(r) for r in res.best_per_generation]
    monotone = all(b <= a for a, b in zip(keys, keys[1:]))
    in_bounds = all(c.in_bounds() for c in seen)
    indices = [r.eval_index for r in res.history] == list(range(1, len(res.history) + 1))
    corner = ga_run(stub, GaConfig(population_size=8, generations=20, mutation_rate=0.5,
                                   mutation_sigma=0.2, tournament_size=4, seed=0))
    gap, n_eval = corner.best.epochs_to_goal, len(corner.history)
    ok = monotone and in_bounds and indices and gap <= 0.05 and n_eval <= 160
    verdict(7, ok, f"monotone best {monotone}; in bounds {in_bounds}; eval_index 1..N {indices}; "
                   f"stub optimum gap {gap:.3f} after {n_eval} evaluations")
    assert ok


TINY = """\
[train]
epochs_max = 2
cycles_per_epoch = 2
episodes_per_cycle = 2
updates_per_cycle = 2
batch_size = 16
eval_episodes = 2

[agent]
hidden = 16

[ga]
population_size = 4
generations = 2
"""


def test_criterion_8_cli_determinism(tmp_path, verdict):
    cfg = tmp_path / "tiny.ini"
    cfg.write_text(TINY)
    same = {}
    for cmd, stream in (("train", "metrics.jsonl"), ("ga", "ga_history.jsonl")):
        runs = []
        for name in ("a", "b"):
            out = tmp_path / f"{cmd}-{name}"
            main([cmd, "--config", str(cfg), "--seed", "7", "--out-dir", str(out), "--quiet"])
            runs.append([strip_wall_clock(r) for r in read_jsonl(out / stream)])
        same[cmd] = runs[0] == runs[1] and len(runs[0]) > 0
    ok = all(same.values())
    verdict(8, ok, f"train --seed 7 identical {same['train']}; ga --seed 7 identical {same['ga']}")
    assert ok


def test_criterion_9_bookkeeping(tmp_path, workdir, verdict):
    cfg = tmp_path / "tiny.ini"
    cfg.write_text(TINY)
    main(["train", "--config", str(cfg), "--out-dir", str(tmp_path / "t"), "--quiet"])
    # also check whatever the long-running criteria left behind
    paths = sorted(Path(workdir).rglob("summary.json")) + [tmp_path / "t" / "summary.json"]
    bad = []
    for p in paths:
        try:
            check_summary_counters(json.loads(p.read_text()))
        except AssertionError as exc:
            bad.append(f"{p}: {exc}")
    ok = not bad
    verdict(9, ok, f"{len(paths)} summary files checked, {len(bad)} violations")
    assert ok, bad
