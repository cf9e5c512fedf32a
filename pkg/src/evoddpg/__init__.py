"""Genetic-algorithm tuning of goal-conditioned DDPG+HER learners on toy reaching tasks."""

from .agent import AgentConfig, Hyperparams
from .envs import make_env
from .ga import GaConfig, ga_run
from .trainer import TrainConfig, evaluate, train_run

__all__ = ["AgentConfig", "GaConfig", "Hyperparams", "TrainConfig", "evaluate", "ga_run",
           "make_env", "train_run"]
__version__ = "0.1.0"
