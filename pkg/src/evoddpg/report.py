"""Baseline-versus-tuned comparisons and plot-data export."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import plotting
from .agent import AgentConfig, Hyperparams
from .envs import make_env
from .rundir import RunDirectory, read_jsonl
from .trainer import TrainConfig, record_dict, train_run

log = logging.getLogger(__name__)

METRICS = ("episodes", "steps", "epochs", "time_s")
_SUMMARY_KEYS = {"episodes": "episodes_to_goal", "steps": "steps_to_goal",
                 "epochs": "epochs_to_goal", "time_s": "time_to_goal_s"}


def _penalized(summary: dict, metric: str) -> float:
    # unreached runs count as epochs_max + 1 epochs and their full wall time
    epochs = summary["fitness_epochs"]
    if metric == "epochs":
        return float(epochs)
    if metric == "episodes":
        return float(epochs * summary["episodes_per_epoch"])
    if metric == "steps":
        return float(epochs * summary["episodes_per_epoch"] * summary["horizon"])
    return float(summary["time_to_goal_s"] if summary["reached"] else summary["wall_time_s"])


def aggregate(env_name: str, seeds: Sequence[int], summaries: Dict[str, List[dict]]) -> dict:
    """Mean efficiency metrics per arm and percent reductions of the second arm vs the first.

    A metric mean is reported only when every run of the arm reached the
    goal; ``*_penalized`` means always exist and rank the arms.
    """
    arms = {}
    for label, runs in summaries.items():
        n_reached = sum(1 for s in runs if s["reached"])
        entry = {"n_runs": len(runs), "n_reached": n_reached}
        for m in METRICS:
            entry[m] = (float(np.mean([s[_SUMMARY_KEYS[m]] for s in runs]))
                        if runs and n_reached == len(runs) else None)
            entry[f"{m}_penalized"] = float(np.mean([_penalized(s, m) for s in runs]))
        arms[label] = entry
    labels = list(arms)
    best = {m: min(labels, key=lambda k: arms[k][f"{m}_penalized"]) for m in METRICS}
    reduction = {}
    if len(labels) >= 2:
        base, tuned = arms[labels[0]], arms[labels[1]]
        for m in METRICS:
            b, t = base[m], tuned[m]
            reduction[m] = 100.0 * (b - t) / b if b is not None and t is not None and b > 0 else None
    return {"env": env_name, "seeds": list(seeds), "arms": arms, "best": best,
            "percent_reduction": reduction}


def _cell(report, label, metric):
    arm = report["arms"][label]
    if arm[metric] is None:
        if arm["n_reached"] == 0:
            return "not reached"
        return f"not reached ({arm['n_reached']}/{arm['n_runs']})"
    value = arm[metric]
    text = f"{value:,.3f}" if metric == "time_s" else f"{value:,.1f}"
    return f"**{text}**" if report["best"][metric] == label else text


def render_table(report: dict) -> str:
    """Markdown table; the best arm per metric is in bold."""
    head = "| Method | Episodes | Steps | Epochs | Time (s) |"
    rows = [head, "|" + "---|" * 5]
    for label in report["arms"]:
        rows.append("| " + " | ".join([label] + [_cell(report, label, m) for m in METRICS]) + " |")
    red = report.get("percent_reduction") or {}
    if red:
        parts = [f"{m}: {'n/a' if red[m] is None else f'{red[m]:.1f}%'}" for m in METRICS]
        rows.append("")
        rows.append("Reduction vs first arm: " + ", ".join(parts))
    return "\n".join(rows) + "\n"


def write_report(report: dict, out_dir) -> List[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "report.json", out / "report.csv", out / "report.md", out / "comparison.png"]
    paths[0].write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with open(paths[1], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["env", "method", "n_runs", "n_reached", *METRICS,
                    *[f"{m}_penalized" for m in METRICS]])
        for label, arm in report["arms"].items():
            w.writerow([report["env"], label, arm["n_runs"], arm["n_reached"],
                        *["" if arm[m] is None else arm[m] for m in METRICS],
                        *[arm[f"{m}_penalized"] for m in METRICS]])
    paths[2].write_text(render_table(report), encoding="utf-8")
    plotting.comparison_bars(report, paths[3])
    return paths


def run_arm(env_name: str, label: str, hp: Hyperparams, seeds: Sequence[int],
            train_cfg: TrainConfig, agent_cfg: AgentConfig, out_dir) -> List[dict]:
    summaries = []
    for seed in seeds:
        rd = RunDirectory(Path(out_dir) / label / f"seed_{seed}")
        rd.reset_streams()
        cfg = replace(train_cfg, seed=int(seed))
        metrics = train_run(make_env(env_name), hp, cfg, agent_cfg,
                            on_epoch=lambda rec: rd.append_metric(record_dict(rec)))
        summary = {**metrics.summary(), "label": label, "env": env_name, "seed": int(seed),
                   "hyperparams": hp.as_dict()}
        rd.write_summary(summary)
        summaries.append(summary)
        log.info("%s seed %d: reached=%s epochs=%s", label, seed, metrics.reached,
                 metrics.epochs_to_goal)
    return summaries


def compare(env_name: str, baseline: Hyperparams, tuned: Hyperparams, n_seeds: int,
            train_cfg: TrainConfig, agent_cfg: AgentConfig, out_dir,
            labels=("DDPG+HER", "GA+DDPG+HER")) -> dict:
    """Run both arms on seeds ``train_cfg.seed .. train_cfg.seed + n_seeds - 1``."""
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    seeds = [train_cfg.seed + i for i in range(n_seeds)]
    summaries = {label: run_arm(env_name, label, hp, seeds, train_cfg, agent_cfg, out_dir)
                 for label, hp in zip(labels, (baseline, tuned))}
    report = aggregate(env_name, seeds, summaries)
    write_report(report, out_dir)
    return report


def _method_label(run_dir: Path, summary: Optional[dict]) -> str:
    if summary and summary.get("label"):
        return str(summary["label"])
    return run_dir.name


def export_plots(run_dirs: Sequence, out_dir) -> tuple:
    """Write ``reward_vs_episodes`` and ``ga_progress`` CSVs plus PNG figures.

    Returns ``(written_paths, n_problems)``; directories lacking the needed
    files are skipped with a warning.
    """
    out = Path(out_dir)
    problems = 0
    reward_rows, progress_rows = [], []
    reward_series, progress_series = {}, {}
    for d in run_dirs:
        rd = RunDirectory(d, create=False)
        summary = rd.read_summary() if rd.summary_path.is_file() else None
        method = _method_label(rd.path, summary)
        found = False
        if rd.metrics_path.is_file():
            found = True
            recs = read_jsonl(rd.metrics_path)
            for r in recs:
                reward_rows.append([method, r["epoch"], r["episodes"],
                                    r["eval_median_total_reward"], r["eval_success_rate"]])
            reward_series[method] = ([r["episodes"] for r in recs],
                                     [r["eval_median_total_reward"] for r in recs])
        if rd.history_path.is_file():
            found = True
            hist = sorted(read_jsonl(rd.history_path), key=lambda h: h["eval_index"])
            best = float("inf")
            cols = {k: [] for k in ("eval_index", "epochs", "best_epochs", "success", "reward")}
            for h in hist:
                best = min(best, h["epochs_to_goal"])
                progress_rows.append([method, h["eval_index"], h["epochs_to_goal"], best,
                                      h["final_success_rate"], h["final_median_reward"]])
                for k, v in zip(cols, (h["eval_index"], h["epochs_to_goal"], best,
                                       h["final_success_rate"], h["final_median_reward"])):
                    cols[k].append(v)
            progress_series[method] = cols
        if not found:
            log.warning("%s: no metrics.jsonl or ga_history.jsonl, skipped", rd.path)
            problems += 1
    written = []
    if reward_rows or progress_rows:
        out.mkdir(parents=True, exist_ok=True)
    if reward_rows:
        p = out / "reward_vs_episodes.csv"
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "epoch", "episodes", "eval_median_total_reward",
                        "eval_success_rate"])
            w.writerows(reward_rows)
        written += [p, plotting.reward_vs_episodes(reward_series, out / "reward_vs_episodes.png")]
    if progress_rows:
        p = out / "ga_progress.csv"
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "eval_index", "epochs", "best_so_far_epochs",
                        "median_success_rate", "median_reward"])
            w.writerows(progress_rows)
        written += [p, plotting.ga_progress(progress_series, out / "ga_progress.png")]
    return written, problems
