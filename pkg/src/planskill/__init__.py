"""Neuro-symbolic imitation learning for tabletop manipulation.

Learns symbolic predicates and STRIPS operators from demonstrations,
pairs each operator with a neural skill, and solves new tasks by
abstract planning plus skill execution.
"""

from .artifacts import LearnedArtifacts, load_artifacts, save_artifacts
from .demoio import load_demos, save_demos
from .errors import PlanskillError
from .operators import Operator, induce_operators
from .pddl import emit_pddl, parse_pddl
from .pipeline import (EpisodeRecord, EvalReport, PipelineConfig, evaluate,
                       generate_demos, run_pipeline, solve_task)
from .planner import (levenshtein, make_problem, select_plan, shortest_plan,
                      topk_plans)
from .predicates import (Predicate, abstract_state, agglomerate,
                         generate_candidates)
from .selection import BeamConfig, beam_search, check_constraint
from .skills import Skill, execute_skill, train_skills
from .worldmodel import Action, DemoSet, EnvState, TaskSpec, Trajectory

__version__ = "0.1.0"

__all__ = [
    "Action", "BeamConfig", "DemoSet", "EnvState", "EpisodeRecord",
    "EvalReport", "LearnedArtifacts", "Operator", "PipelineConfig",
    "PlanskillError", "Predicate", "Skill", "TaskSpec", "Trajectory",
    "abstract_state", "agglomerate", "beam_search", "check_constraint",
    "emit_pddl", "evaluate", "execute_skill", "generate_candidates",
    "generate_demos", "induce_operators", "levenshtein", "load_artifacts",
    "load_demos", "make_problem", "parse_pddl", "run_pipeline",
    "save_artifacts", "save_demos", "select_plan", "shortest_plan",
    "solve_task", "topk_plans", "train_skills", "__version__",
]
