"""Command-line entry point.

Subcommands cover the full workflow: gen-demos, learn, dump-predicates,
plan, rollout, eval, report. All outputs go under --out with fixed
filenames; exit code 0 on success, 2 when a pipeline stage fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .artifacts import dump_predicates, load_artifacts, save_artifacts
from .demoio import load_demos, save_demos
from .errors import PlanskillError
from .pddl import emit_problem
from .pipeline import (PipelineConfig, evaluate, load_config,
                       scenario_n_objects, solve_task, write_report,
                       generate_demos, run_pipeline)
from .planner import abstract_goal, make_problem, select_plan, topk_plans
from .predicates import abstract_state
from .sim import ENV_NAMES, ScenarioSpec, sample_task

DEMOS_FILE = "demos.jsonl"
DEMOS_MANIFEST = "demos_manifest.json"


def _add_config_flags(sub):
    sub.add_argument("--config", help="key = value config file")
    sub.add_argument("--env", choices=ENV_NAMES)
    sub.add_argument("--n-demos", type=int, dest="n_demos")
    sub.add_argument("--noise-scale", type=float, dest="noise_scale")
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--beam-width", type=int, dest="beam_width")
    sub.add_argument("--top-k", type=int, dest="top_k")
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--epsilon-position", type=float,
                     dest="epsilon_position")
    sub.add_argument("--epsilon-scalar", type=float, dest="epsilon_scalar")
    sub.add_argument("--min-cluster-frac", type=float,
                     dest="min_cluster_frac")
    sub.add_argument("--max-skill-steps", type=int, dest="max_skill_steps")
    sub.add_argument("--n-episodes", type=int, dest="n_episodes")
    sub.add_argument("--demo-seed", type=int, dest="demo_seed")
    sub.add_argument("--train-seed", type=int, dest="train_seed")
    sub.add_argument("--eval-seed", type=int, dest="eval_seed")


def _build_config(args):
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {"env": "env_name"}
    for key in ("env", "n_demos", "noise_scale", "alpha", "beam_width",
                "top_k", "epochs", "epsilon_position", "epsilon_scalar",
                "min_cluster_frac", "max_skill_steps", "n_episodes",
                "demo_seed", "train_seed", "eval_seed"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, overrides.get(key, key), value)
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    return cfg


def _demo_paths(out_dir):
    return (os.path.join(out_dir, DEMOS_FILE),
            os.path.join(out_dir, DEMOS_MANIFEST))


def cmd_gen_demos(args):
    cfg = _build_config(args)
    demos, manifest = generate_demos(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    demo_path, manifest_path = _demo_paths(cfg.out_dir)
    save_demos(demos, demo_path)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(demos.trajectories)} demos to {demo_path}")
    return 0


def cmd_learn(args):
    cfg = _build_config(args)
    demo_path, manifest_path = _demo_paths(cfg.out_dir)
    if args.demos:
        demo_path = args.demos
    demos = manifest = None
    if os.path.exists(demo_path):
        demos = load_demos(demo_path)
        if os.path.exists(manifest_path):
            with open(manifest_path, "r", encoding="utf-8") as fh:
                manifest = json.load(fh)
    art = run_pipeline(cfg, demos=demos, demo_manifest=manifest)
    save_artifacts(art, cfg.out_dir)
    print(f"learned {len(art.predicates)} predicates, "
          f"{len(art.operators)} operators, {len(art.skills)} skills; "
          f"artifacts in {cfg.out_dir}")
    return 0


def cmd_dump_predicates(args):
    art = load_artifacts(args.out)
    pred_dir = dump_predicates(art, args.out)
    print(f"wrote {len(art.predicates)} predicate files to {pred_dir}")
    return 0


def _sample(args, art):
    env_name = art.env_name
    n = scenario_n_objects(env_name, args.scenario)
    spec = ScenarioSpec(args.scenario, env_name, n, args.seed)
    return sample_task(env_name, spec, args.seed)


def cmd_plan(args):
    art = load_artifacts(args.out)
    cfg = _build_config(args)
    task = _sample(args, art)
    obj_types = {oid: task.initial_state.objects[oid].type.name
                 for oid in task.initial_state.object_ids()}
    init = abstract_state(task.initial_state, art.predicates)
    goal = abstract_goal(task.goal_samples, art.predicates)
    prob = make_problem(obj_types, init, goal, art.operators)
    plans = topk_plans(prob, cfg.top_k, budget=cfg.planner_node_budget)
    if not plans:
        print("no plan found", file=sys.stderr)
        return 2
    plan = select_plan(plans, art.demo_plans)
    doc = {"task_seed": args.seed, "scenario": args.scenario,
           "plan": list(plan.names()),
           "problem_pddl": emit_problem(prob, art.predicates)}
    print(json.dumps(doc, indent=1))
    return 0


def cmd_rollout(args):
    art = load_artifacts(args.out)
    cfg = _build_config(args)
    task = _sample(args, art)
    record = solve_task(art, task, cfg, seed=args.seed)
    print(json.dumps(record.to_json(), indent=1))
    return 0 if record.success else 2


def cmd_eval(args):
    art = load_artifacts(args.out)
    cfg = _build_config(args)
    report = evaluate(art, art.env_name, args.scenario, cfg.n_episodes,
                      cfg.eval_seed, cfg)
    path = write_report(report, args.out)
    print(f"{report.env} scenario {report.scenario}: "
          f"success rate {report.success_rate:.2f} "
          f"({report.n_episodes} episodes) -> {path}")
    return 0


def cmd_report(args):
    rows = []
    for name in sorted(os.listdir(args.out)):
        if name.startswith("eval_") and name.endswith(".json"):
            with open(os.path.join(args.out, name), "r",
                      encoding="utf-8") as fh:
                doc = json.load(fh)
            stages = {}
            for rec in doc["records"]:
                stage = rec["failure_stage"] or "success"
                stages[stage] = stages.get(stage, 0) + 1
            rows.append({"env": doc["env"], "scenario": doc["scenario"],
                         "n_episodes": doc["n_episodes"],
                         "success_rate": doc["success_rate"],
                         "seed_count": doc.get("seed_count", 1),
                         "outcomes": stages})
    if not rows:
        print("no eval reports found", file=sys.stderr)
        return 2
    print(json.dumps(rows, indent=1))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="planskill",
        description="Neuro-symbolic imitation learning on tabletop tasks")
    parser.add_argument("-v", "--verbose", action="store_true")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("gen-demos", help="generate expert demonstrations")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_demos)

    p = subs.add_parser("learn", help="run the full learning pipeline")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--demos", help="demo JSONL path (default: OUT/demos.jsonl)")
    p.set_defaults(func=cmd_learn)

    p = subs.add_parser("dump-predicates",
                        help="export learned predicate clusters as CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump_predicates)

    for name, func, help_text in (
            ("plan", cmd_plan, "plan a sampled task, print the plan"),
            ("rollout", cmd_rollout, "plan and execute one episode")):
        p = subs.add_parser(name, help=help_text)
        _add_config_flags(p)
        p.add_argument("--out", required=True)
        p.add_argument("--scenario", default="I", choices=("I", "II", "III"))
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=func)

    p = subs.add_parser("eval", help="evaluate over sampled episodes")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--scenario", default="I", choices=("I", "II", "III"))
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("report", help="summarize eval reports")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PlanskillError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
