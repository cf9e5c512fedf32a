"""Run-directory layout and line-delimited JSON helpers.

A run directory holds::

    config/resolved.ini         full resolved configuration
    config/best_hyperparams.ini GA runs only; feed to ``train --hyperparams``
    metrics.jsonl               one epoch record per line
    ga_history.jsonl            one fitness evaluation per line (GA runs)
    checkpoint.bin              trained networks, normalizers, hyperparameters
    summary.json                terminal summary
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Iterator, List

from .config import RunConfig, hyperparams_text, write_config

log = logging.getLogger(__name__)

# fields that legitimately differ between otherwise identical runs
WALL_CLOCK_FIELDS = ("wall_clock_s", "wall_time_s", "time_to_goal_s")


def append_jsonl(path, record: dict) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
        fh.flush()


def read_jsonl(path) -> List[dict]:
    """Parse every complete line; a trailing partial line from an interrupted write is skipped."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                if not line.endswith("\n"):
                    log.warning("%s:%d: ignoring truncated final line", path, lineno)
                    break
                raise
    return records


def iter_jsonl(path) -> Iterator[dict]:
    yield from read_jsonl(path)


def strip_wall_clock(record: dict) -> dict:
    return {k: v for k, v in record.items() if k not in WALL_CLOCK_FIELDS}


class RunDirectory:
    def __init__(self, path, create=True):
        self.path = Path(path)
        if create:
            self.path.mkdir(parents=True, exist_ok=True)

    @property
    def config_dir(self) -> Path:
        return self.path / "config"

    @property
    def config_path(self) -> Path:
        return self.config_dir / "resolved.ini"

    @property
    def best_hyperparams_path(self) -> Path:
        return self.config_dir / "best_hyperparams.ini"

    @property
    def metrics_path(self) -> Path:
        return self.path / "metrics.jsonl"

    @property
    def history_path(self) -> Path:
        return self.path / "ga_history.jsonl"

    @property
    def checkpoint_path(self) -> Path:
        return self.path / "checkpoint.bin"

    @property
    def summary_path(self) -> Path:
        return self.path / "summary.json"

    def reset_streams(self) -> None:
        """Remove line-delimited outputs of a previous run in the same directory."""
        for p in (self.metrics_path, self.history_path):
            if p.exists():
                p.unlink()

    def write_config(self, cfg: RunConfig) -> Path:
        return write_config(cfg, self.config_path)

    def write_best_hyperparams(self, hp) -> Path:
        self.config_dir.mkdir(parents=True, exist_ok=True)
        self.best_hyperparams_path.write_text(hyperparams_text(hp), encoding="utf-8")
        return self.best_hyperparams_path

    def append_metric(self, record: dict) -> None:
        append_jsonl(self.metrics_path, record)

    def append_history(self, record: dict) -> None:
        append_jsonl(self.history_path, record)

    def write_summary(self, summary: dict) -> Path:
        self.summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
        return self.summary_path

    def read_summary(self) -> dict:
        return json.loads(self.summary_path.read_text(encoding="utf-8"))

    def read_metrics(self) -> List[dict]:
        return read_jsonl(self.metrics_path)

    def read_history(self) -> List[dict]:
        return read_jsonl(self.history_path)


def check_summary_counters(summary: dict) -> None:
    """Raise ``AssertionError`` unless the step/episode/epoch identities hold."""
    horizon = summary["horizon"]
    per_epoch = summary["episodes_per_epoch"]
    pairs = [("epochs_run", "episodes_total", "steps_total")]
    if summary.get("reached"):
        pairs.append(("epochs_to_goal", "episodes_to_goal", "steps_to_goal"))
    for e, ep, st in pairs:
        assert summary[ep] == summary[e] * per_epoch, f"{ep} != {e} * episodes_per_epoch"
        assert summary[st] == summary[ep] * horizon, f"{st} != {ep} * horizon"
