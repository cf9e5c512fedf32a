"""Command-line entry point: ``evoddpg <command> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .agent import Hyperparams
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, apply_overrides, load_config, load_hyperparams
from .envs import ENVS, make_env
from .errors import ConfigError
from .ga import TrainFitness, ga_run, worker_count
from .report import compare, export_plots, render_table
from .rundir import RunDirectory
from .trainer import evaluate, record_dict, train_run

log = logging.getLogger("evoddpg")

EXIT_OK, EXIT_ERROR, EXIT_NOT_REACHED = 0, 1, 2


def resolve_config(args, seed_ga=False) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = list(args.set or [])
    if args.env:
        overrides.append(f"env.name={args.env}")
    if args.seed is not None:
        overrides.append(f"train.seed={args.seed}")
        if seed_ga:
            overrides.append(f"ga.seed={args.seed}")
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg.validate()


def _out_dir(args, cfg: RunConfig, command: str) -> Path:
    if args.out_dir:
        return Path(args.out_dir)
    return Path("runs") / f"{command}-{cfg.env.name}-seed{cfg.train.seed}"


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    if args.hyperparams:
        cfg.hp = load_hyperparams(args.hyperparams)
    rd = RunDirectory(_out_dir(args, cfg, "train"))
    rd.reset_streams()
    rd.write_config(cfg)
    env = make_env(cfg.env.name)

    def on_epoch(rec):
        rd.append_metric(record_dict(rec))
        log.info("epoch %d: success=%.2f median_reward=%.1f (%.1fs)", rec.epoch,
                 rec.eval_success_rate, rec.eval_median_total_reward, rec.wall_clock_s)

    metrics = train_run(env, cfg.hp, cfg.train, cfg.agent, on_epoch=on_epoch)
    save_checkpoint(rd.checkpoint_path, metrics.agent, cfg.env.name, metrics.eval_seed)
    summary = {**metrics.summary(), "label": args.label or rd.path.name, "env": cfg.env.name,
               "seed": cfg.train.seed, "eval_episodes": cfg.train.eval_episodes,
               "hyperparams": cfg.hp.as_dict()}
    rd.write_summary(summary)
    print(f"{rd.path}: reached={metrics.reached} epochs_to_goal={metrics.epochs_to_goal} "
          f"final_success={metrics.final_success_rate:.2f}")
    return EXIT_OK if metrics.reached else EXIT_NOT_REACHED


def cmd_ga(args) -> int:
    cfg = resolve_config(args, seed_ga=True)
    rd = RunDirectory(_out_dir(args, cfg, "ga"))
    rd.reset_streams()
    rd.write_config(cfg)
    fitness = TrainFitness(cfg.env.name, cfg.train, cfg.agent)
    result = ga_run(fitness, cfg.ga, run_seed=cfg.train.seed, workers=worker_count(),
                    on_record=lambda rec: rd.append_history(rec.to_json()))
    best = result.best
    best_hp = best.chromosome.to_hyperparams()
    rd.write_best_hyperparams(best_hp)
    rd.write_summary({
        "env": cfg.env.name,
        "label": args.label or rd.path.name,
        "n_evaluations": len(result.history),
        "best": best.to_json(),
        "best_hyperparams": best_hp.as_dict(),
        "best_epochs_per_generation": [r.epochs_to_goal for r in result.best_per_generation],
        "ga": asdict(cfg.ga),
    })
    print(f"{rd.path}: best epochs_to_goal={best.epochs_to_goal} after "
          f"{len(result.history)} evaluations -> {rd.best_hyperparams_path}")
    return EXIT_OK if best.reached else EXIT_NOT_REACHED


def cmd_compare(args) -> int:
    cfg = resolve_config(args)
    baseline = load_hyperparams(args.baseline) if args.baseline else Hyperparams()
    tuned = load_hyperparams(args.tuned)
    out = _out_dir(args, cfg, "compare")
    report = compare(cfg.env.name, baseline, tuned, args.n_seeds, cfg.train, cfg.agent, out)
    print(render_table(report), end="")
    print(f"report written to {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    rd = RunDirectory(args.run_dir, create=False)
    if not rd.checkpoint_path.is_file():
        raise ConfigError(f"no checkpoint in {rd.path}")
    agent, meta = load_checkpoint(rd.checkpoint_path)
    episodes = args.episodes
    if episodes is None:
        episodes = load_config(rd.config_path).train.eval_episodes if rd.config_path.is_file() else 10
    success, reward = evaluate(make_env(meta.env_name), agent, episodes, meta.eval_seed)
    print(f"env={meta.env_name} episodes={episodes} success_rate={success:.4f} "
          f"median_total_reward={reward:.2f}")
    return EXIT_OK


def cmd_export_plots(args) -> int:
    if not args.run_dirs:
        print("export-plots: no run directories given", file=sys.stderr)
        return EXIT_ERROR
    out = Path(args.out_dir) if args.out_dir else Path("plots")
    written, problems = export_plots(args.run_dirs, out)
    for p in written:
        print(p)
    return EXIT_ERROR if problems or not written else EXIT_OK


def cmd_describe_env(args) -> int:
    names = [args.env] if args.env else sorted(ENVS)
    for name in names:
        spec = make_env(name).spec
        print(name)
        for key, value in asdict(spec).items():
            if key != "name":
                print(f"  {key}: {value}")
        print("  action_box: [-1, 1]^%d" % spec.action_dim)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--seed", type=int, help="training seed (and GA seed for `ga`)")
    common.add_argument("--out-dir", help="output directory")
    common.add_argument("--env", choices=sorted(ENVS), help="environment name")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one config key; repeatable")
    common.add_argument("--quiet", action="store_true", help="only print warnings and results")

    parser = argparse.ArgumentParser(prog="evoddpg", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train one agent")
    p.add_argument("--hyperparams", help="INI file with an [agent] section of learning parameters")
    p.add_argument("--label", help="method label used in reports and plots")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ga", parents=[common], help="search learning parameters with the GA")
    p.add_argument("--label", help="label used in plots")
    p.set_defaults(func=cmd_ga)

    p = sub.add_parser("compare", parents=[common], help="baseline vs tuned over several seeds")
    p.add_argument("--baseline", help="hyperparameter file for the baseline arm (default: built-in)")
    p.add_argument("--tuned", required=True, help="hyperparameter file for the tuned arm")
    p.add_argument("--n-seeds", type=int, default=3)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("eval", parents=[common], help="greedy evaluation of a saved checkpoint")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--episodes", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-plots", parents=[common], help="CSV + PNG plot data from run dirs")
    p.add_argument("run_dirs", nargs="*")
    p.set_defaults(func=cmd_export_plots)

    p = sub.add_parser("describe-env", parents=[common], help="print environment constants")
    p.set_defaults(func=cmd_describe_env)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"evoddpg: config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"evoddpg: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
