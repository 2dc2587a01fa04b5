"""Seedable multi-UAV task collection/processing simulator with a distributed
learned allocator, information-sharing coordination, and classical baselines."""

__version__ = "0.1.0"

from .scenario import (  # noqa: F401
    ScenarioConfig, Scenario, Task, TaskClass, TaskStatus,
    generate_scenario, load_config, load_scenario, save_scenario,
)
from .env import Env, rollout_assignment  # noqa: F401
