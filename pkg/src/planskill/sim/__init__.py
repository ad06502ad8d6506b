from .core import EEF_ID, SimConfig, SimWorld, step
from .envs import (ENV_NAMES, ScenarioSpec, goal_check, make_env, sample_task,
                   split_combos)
from .expert import expert_rollout

__all__ = ["EEF_ID", "SimConfig", "SimWorld", "step", "ENV_NAMES",
           "ScenarioSpec", "goal_check", "make_env", "sample_task",
           "split_combos", "expert_rollout"]
