"""Pipeline orchestration: demo generation, learning, solving, evaluation.

Every stage reads its hyperparameters from one PipelineConfig; reports
embed a hash of that config so runs are attributable. All randomness is
derived from the three seeds (demo, train, eval), making the pipeline
deterministic end to end.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import asdict, dataclass

import numpy as np

from .artifacts import LearnedArtifacts
from .errors import EmptyGoal, ExpertFailure, InsufficientData, \
    ParseError, PreconditionViolated, SkillTimeout
from .mlp import TrainConfig
from .operators import match_operator
from .pddl import emit_pddl
from .planner import abstract_goal, make_problem, select_plan, topk_plans
from .predicates import CandidateConfig, abstract_state, generate_candidates
from .selection import BeamConfig, Scorer, beam_search
from .sim import ScenarioSpec, expert_rollout, make_env, split_combos
from .sim import sample_task as sim_sample_task
from .skills import execute_skill, train_skills
from .worldmodel import DemoSet

log = logging.getLogger(__name__)

FAILURE_STAGES = ("no-plan", "skill-timeout", "goal-fail", "abstract-drift")


@dataclass
class PipelineConfig:
    """Single source of hyperparameters for every learning stage."""
    env_name: str = "stacking"
    n_demos: int = 300
    noise_scale: float = 0.1
    epsilon_position: float = 0.04
    epsilon_scalar: float = 0.1
    min_cluster_frac: float = 0.02
    alpha: float = 2.0
    beam_width: int = 8
    top_k: int = 5
    planner_node_budget: int = 200_000
    constraint_timeout: float = 30.0
    hidden: tuple = (64, 64)
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 64
    max_skill_steps: int = 200
    n_episodes: int = 20
    demo_seed: int = 0
    train_seed: int = 0
    eval_seed: int = 0
    out_dir: str = "out"

    def candidate_config(self):
        from .worldmodel import FeatureKind
        return CandidateConfig(
            epsilons={FeatureKind.POSITION3: self.epsilon_position,
                      FeatureKind.SCALAR: self.epsilon_scalar},
            min_cluster_frac=self.min_cluster_frac)

    def beam_config(self):
        return BeamConfig(beam_width=self.beam_width, alpha=self.alpha,
                          planner_node_budget=self.planner_node_budget,
                          constraint_timeout=self.constraint_timeout)

    def train_config(self):
        return TrainConfig(hidden=tuple(self.hidden),
                           learning_rate=self.learning_rate,
                           epochs=self.epochs, batch_size=self.batch_size,
                           seed=self.train_seed)


def config_hash(cfg):
    """Stable hash over the canonical key=value rendering."""
    doc = asdict(cfg)
    text = "\n".join(f"{k}={doc[k]!r}" for k in sorted(doc))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def parse_config(text):
    """Key-value config text: 'key = value' lines, '#' comments."""
    values = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value'", i)
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip().strip('"').strip("'")
        values[key] = val
    cfg = PipelineConfig()
    for key, val in values.items():
        if not hasattr(cfg, key):
            raise ParseError(f"unknown config key '{key}'")
        current = getattr(cfg, key)
        if isinstance(current, bool):
            parsed = val.lower() in ("1", "true", "yes")
        elif isinstance(current, int):
            parsed = int(val)
        elif isinstance(current, float):
            parsed = float(val)
        elif isinstance(current, tuple):
            parsed = tuple(int(x) for x in val.strip("()").split(",") if x)
        else:
            parsed = val
        setattr(cfg, key, parsed)
    return cfg


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def scenario_n_objects(env_name, scenario):
    """Object count per scenario: III adds one object over training."""
    n = make_env(env_name).training_n
    return n + 1 if scenario == "III" else n


def generate_demos(cfg):
    """Scripted-expert demos on Scenario I tasks, with a sidecar manifest.

    Seeds advance past expert failures so the demo count is exact; the
    manifest records which seeds produced trajectories and the training
    goal-combination list that Scenario II sampling holds out.
    """
    if cfg.n_demos < 1:
        raise InsufficientData("n_demos must be >= 1")
    env = make_env(cfg.env_name)
    n = env.training_n
    trajectories = []
    used_seeds = []
    seed = cfg.demo_seed
    while len(trajectories) < cfg.n_demos:
        spec = ScenarioSpec("I", cfg.env_name, n, seed)
        try:
            task = sim_sample_task(cfg.env_name, spec, seed)
            trajectories.append(
                expert_rollout(task, seed, noise_scale=cfg.noise_scale))
            used_seeds.append(seed)
        except ExpertFailure as exc:
            log.warning("expert failed on seed %d: %s", seed, exc)
        seed += 1
    types = {}
    for traj in trajectories:
        for obj in traj.states[0].objects.values():
            types.setdefault(obj.type.name, obj.type)
    demos = DemoSet(tuple(types.values()), tuple(trajectories))
    training_combos, _ = split_combos(n)
    manifest = {"env": cfg.env_name, "scenario": "I", "n_objects": n,
                "n_demos": cfg.n_demos, "seeds": used_seeds,
                "noise_scale": cfg.noise_scale,
                "training_combos": [list(c) for c in training_combos],
                "config_hash": config_hash(cfg)}
    return demos, manifest


def demo_abstract_plans(demos, preds, ops, tables):
    """Operator schema-name sequence for every training demo."""
    key = tuple(sorted(p.id for p in preds))
    plans = []
    for table in tables.tables:
        abs_traj = table.abstract_trajectory(key)
        labels = []
        for a, b in zip(abs_traj, abs_traj[1:]):
            labels.append(match_operator(ops, a, b).operator.name)
        plans.append(tuple(labels))
    return plans


def run_pipeline(cfg, demos=None, demo_manifest=None):
    """Full learning pass: candidates -> selection -> operators -> skills.

    Returns LearnedArtifacts; stage wall-clock timings and the selection
    report land in the artifact manifest.
    """
    timings = {}
    if demos is None:
        t0 = time.monotonic()
        demos, demo_manifest = generate_demos(cfg)
        timings["gen_demos"] = time.monotonic() - t0

    t0 = time.monotonic()
    candidates = generate_candidates(demos, cfg.candidate_config())
    timings["candidates"] = time.monotonic() - t0
    log.info("%d candidate predicates", len(candidates))

    t0 = time.monotonic()
    preds, ops, report = beam_search(candidates, demos, cfg.beam_config())
    timings["selection"] = time.monotonic() - t0
    log.info("selected %d predicates, %d operators", len(preds), len(ops))

    t0 = time.monotonic()
    scorer = Scorer(demos, preds, cfg.alpha)
    skills = train_skills(demos, preds, ops, hp=cfg.train_config(),
                          tables=scorer.tables)
    ops = [op for op in ops if op.name in skills]
    timings["skills"] = time.monotonic() - t0

    t0 = time.monotonic()
    demo_plans = demo_abstract_plans(demos, preds, ops, scorer.tables)
    timings["demo_plans"] = time.monotonic() - t0

    manifest = {"config_hash": config_hash(cfg), "env": cfg.env_name,
                "n_demos": len(demos.trajectories),
                "n_predicates": len(preds), "n_operators": len(ops),
                "stage_seconds": {k: round(v, 3) for k, v in timings.items()},
                "selection_report": report}
    if demo_manifest is not None:
        manifest["demos"] = {k: v for k, v in demo_manifest.items()
                             if k != "seeds"}
    return LearnedArtifacts(cfg.env_name, demos.type_registry, preds, ops,
                            skills, demo_plans,
                            emit_pddl(preds, ops), manifest)


@dataclass
class EpisodeRecord:
    episode: int
    seed: int
    success: bool
    failure_stage: str | None  # one of FAILURE_STAGES, None on success
    plan_found: bool
    plan_length: int
    levenshtein: int | None  # distance to the nearest demo plan
    skill_steps: int
    empty_goal: bool = False
    drift: bool = False

    def to_json(self):
        return asdict(self)


def solve_task(art, task, cfg, seed=0):
    """Plan abstractly, execute skills, judge with the ground-truth goal.

    Never raises: every failure mode is a recorded outcome. Success is
    decided by the simulator's own goal checker, so abstraction errors
    count against the agent.
    """
    from .planner import levenshtein

    env = make_env(task.env_name)
    world = env.make_world(task)
    obj_types = {oid: task.initial_state.objects[oid].type.name
                 for oid in task.initial_state.object_ids()}
    init = abstract_state(task.initial_state, art.predicates)
    empty_goal = False
    try:
        goal = abstract_goal(task.goal_samples, art.predicates)
    except EmptyGoal:
        # trivially satisfied goal: planning yields the empty plan and
        # the episode stands or falls on the ground-truth check
        log.warning("empty abstract goal for task '%s'", task.goal_checker_id)
        goal = frozenset()
        empty_goal = True

    prob = make_problem(obj_types, init, goal, art.operators)
    plans = topk_plans(prob, cfg.top_k, budget=cfg.planner_node_budget)
    if not plans:
        return EpisodeRecord(0, seed, False, "no-plan", False, 0, None, 0,
                             empty_goal=empty_goal)
    plan = select_plan(plans, art.demo_plans)
    dist = min(levenshtein(plan.labels(), dp) for dp in art.demo_plans) \
        if art.demo_plans else None

    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    steps = 0
    drift = False
    stage = None
    for gop in plan.steps:
        try:
            world, outcome = execute_skill(
                world, art.skills[gop.operator.name], gop, art.predicates,
                rng, max_steps=cfg.max_skill_steps)
            steps += outcome.steps
            drift = drift or outcome.drift
        except SkillTimeout as exc:
            world = exc.world
            stage = "skill-timeout"
            break
        except PreconditionViolated:
            # a precondition can only fail mid-plan if execution drifted
            # off the abstract trajectory earlier
            stage = "abstract-drift"
            drift = True
            break
    success = stage is None and env.goal_check(task, world.state)
    if not success and stage is None:
        stage = "abstract-drift" if drift else "goal-fail"
    return EpisodeRecord(0, seed, success, None if success else stage,
                         True, plan.cost, dist, steps,
                         empty_goal=empty_goal, drift=drift)


@dataclass
class EvalReport:
    env: str
    scenario: str
    n_episodes: int
    success_rate: float
    records: list  # EpisodeRecord
    wall_clock: float
    seed: int
    config_hash: str

    def to_json(self):
        return {"env": self.env, "scenario": self.scenario,
                "n_episodes": self.n_episodes,
                "success_rate": self.success_rate,
                "seed": self.seed, "seed_count": 1,
                "config_hash": self.config_hash,
                "wall_clock": round(self.wall_clock, 3),
                "records": [r.to_json() for r in self.records]}


def episode_seed(base_seed, episode):
    """Per-episode seed split from the evaluation seed."""
    return int(np.random.SeedSequence([base_seed, episode])
               .generate_state(1)[0])


def evaluate(art, env_name, scenario, n_episodes, seed, cfg=None):
    """Run n_episodes sampled tasks and aggregate episode records."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    cfg = cfg or PipelineConfig(env_name=env_name)
    n = scenario_n_objects(env_name, scenario)
    t0 = time.monotonic()
    records = []
    for ep in range(n_episodes):
        ep_seed = episode_seed(seed, ep)
        spec = ScenarioSpec(scenario, env_name, n, ep_seed)
        task = sim_sample_task(env_name, spec, ep_seed)
        record = solve_task(art, task, cfg, seed=ep_seed)
        record.episode = ep
        records.append(record)
    rate = sum(r.success for r in records) / n_episodes
    return EvalReport(env_name, scenario, n_episodes, rate, records,
                      time.monotonic() - t0, seed, config_hash(cfg))


def write_report(report, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    name = f"eval_{report.env}_{report.scenario}.json"
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path
