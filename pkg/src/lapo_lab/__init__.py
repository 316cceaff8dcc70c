"""Simulation lab for two-stage length-adaptive policy optimisation."""

from .pipeline import LapoConfig, render_budget_prefix, run_lapo
from .types import Problem, Rollout, RolloutGroup

__version__ = "0.1.0"

__all__ = ["LapoConfig", "Problem", "Rollout", "RolloutGroup", "render_budget_prefix", "run_lapo"]
