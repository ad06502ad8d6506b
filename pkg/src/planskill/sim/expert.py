"""Scripted waypoint experts for demo generation.

Each environment builds a phase list (move / grip / hold); the executor
drives the end effector toward each phase target with clipped deltas
plus uniform noise, records the trajectory, and verifies the goal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ExpertFailure
from ..worldmodel import Action, Trajectory
from .core import EEF_HOME, EEF_ID, step
from .envs import make_env

HOVER = 0.16
PHASE_BUDGET = 300
TOTAL_BUDGET = 4000


@dataclass
class Phase:
    kind: str  # "move", "grip", "hold"
    target_fn: "object" = None  # world -> eef target (evaluated at entry)
    tol: float = 0.01
    gripper: float = 0.0
    steps: int = 1


def _move(target_fn, tol=0.01, gripper=0.0):
    return Phase("move", target_fn, tol, gripper)


def _grip(value, steps=2):
    return Phase("grip", None, 0.0, value, steps)


def _hold(gripper, steps=2):
    return Phase("hold", None, 0.0, gripper, steps)


def _above(oid, dz=HOVER):
    return lambda w: w.state.get(oid, "pos") + np.array([0.0, 0.0, dz])


def _at(oid):
    return lambda w: np.array(w.state.get(oid, "pos"))


def _carry_to(obj_target_fn, dz=0.0):
    """eef target so the held object reaches obj_target + (0, 0, dz)."""
    def fn(world):
        target = np.asarray(obj_target_fn(world), dtype=float)
        off = world.held_offset if world.held_offset is not None else 0.0
        return target + np.array([0.0, 0.0, dz]) - off
    return fn


def _lift(dz=HOVER):
    return lambda w: w.state.get(EEF_ID, "pos") + np.array([0.0, 0.0, dz])


# Gripper commands below 0.5 keep the gripper open and above 0.5 keep it
# closed, so the expert can bias the *recorded* action labels toward the
# upcoming toggle without changing the simulated state.  Skill segments
# that end at a gripper toggle start a few steps early (the preceding
# cluster atom flips when the hand enters the epsilon ball, before the
# approach finishes); biasing those lead-in labels keeps the segment's
# mean gripper command on the correct side of 0.5, which matters because
# the toggle skills see a constant feature vector and can only reproduce
# the mean.
PRE_CLOSE = 0.45
PRE_OPEN = 0.55


# grasp-point spread across demonstrations; carry and place phases
# compensate through the recorded held offset, so placements stay exact
# while downstream skills see (and learn to handle) the whole range of
# in-hand offsets they will encounter at execution time
GRASP_JITTER_XY = 0.012
GRASP_JITTER_Z = 0.02


def _pick(oid, rng=None):
    off = np.zeros(3)
    if rng is not None:
        off = np.array([rng.uniform(-GRASP_JITTER_XY, GRASP_JITTER_XY),
                        rng.uniform(-GRASP_JITTER_XY, GRASP_JITTER_XY),
                        rng.uniform(0.0, GRASP_JITTER_Z)])

    def grasp_at(w):
        return w.state.get(oid, "pos") + off

    return [_move(_above(oid), tol=0.01, gripper=0.0),
            _move(grasp_at, tol=0.006, gripper=PRE_CLOSE),
            _grip(1.0),
            _move(_lift(), tol=0.01, gripper=1.0)]


def _place(obj_target, release_tol=0.005):
    return [_move(_carry_to(obj_target, dz=HOVER), tol=0.01, gripper=1.0),
            _move(_carry_to(obj_target), tol=release_tol, gripper=PRE_OPEN),
            _grip(0.0),
            _move(_lift(), tol=0.01, gripper=0.0)]


def _stacking_phases(env, task, rng):
    n = task.metadata["n"]
    anchor = np.array(task.initial_state.get("block0", "pos")[:2])
    targets = env.structure_positions(n, anchor)
    pillars, crossbars = env.roles(n)
    phases = []
    for i in pillars[1:] + crossbars:
        oid = f"block{i}"
        phases += _pick(oid, rng)
        phases += _place(lambda w, t=targets[oid]: t)
    return phases


def _dispense(target_oid, height):
    """Hover over the target, then lower until the transfer event fires."""
    return [_move(_carry_to(_above(target_oid)), tol=0.01, gripper=1.0),
            _move(_carry_to(_at(target_oid), dz=height),
                  tol=0.004, gripper=1.0),
            _hold(1.0, steps=2)]


def _pouring_phases(env, task, rng):
    combo = task.metadata["combo"]
    # one teapot trip per distinct tea, serving its cups along the way;
    # the trip order is shuffled so no fixed serving order leaks into
    # the demonstrations
    phases = []
    teas = sorted(set(combo))
    for tea in (teas if rng is None else [int(t) for t in rng.permutation(teas)]):
        k = tea - 1
        home = np.array([*env.TEAPOT_HOMES[k], env.rest_z("teapot")])
        phases += _pick(f"teapot{k}", rng)
        cups = [i for i, c in enumerate(combo) if c == tea]
        if rng is not None:
            cups = [int(i) for i in rng.permutation(cups)]
        for i in cups:
            phases += _dispense(f"cup{i}", env.POUR_HEIGHT)
        phases += [_move(_lift(), tol=0.01, gripper=1.0)]
        phases += _place(lambda w, t=home: t)
    return phases


def _painting_phases(env, task, rng):
    combo = task.metadata["combo"]
    phases = []
    # park the lid first so the brushes can reach into the box
    phases += _pick("lid0", rng)
    phases += _place(lambda w, t=env.lid_open_pos(): t)
    colors = sorted(set(combo))
    for color in (colors if rng is None
                  else [int(c) for c in rng.permutation(colors)]):
        k = color - 1
        home = np.array([*env.BRUSH_HOMES[k], env.rest_z("brush")])
        phases += _pick(f"brush{k}", rng)
        blocks = [i for i, c in enumerate(combo) if c == color]
        if rng is not None:
            blocks = [int(i) for i in rng.permutation(blocks)]
        for i in blocks:
            phases += _dispense(f"block{i}", env.PAINT_HEIGHT)
        phases += [_move(_lift(), tol=0.01, gripper=1.0)]
        phases += _place(lambda w, t=home: t)
    return phases


_PHASE_BUILDERS = {"stacking": _stacking_phases,
                   "pouring": _pouring_phases,
                   "painting": _painting_phases}


def expert_actions(world, phases, rng, noise_scale):
    """Execute phases; yields (action, world) pairs."""
    cfg = world.config
    noise = noise_scale * cfg.max_step
    total = 0
    for phase in phases:
        if phase.kind == "move":
            target = np.asarray(phase.target_fn(world), dtype=float)
            for _ in range(PHASE_BUDGET):
                eef = world.state.get(EEF_ID, "pos")
                err = target - eef
                if np.linalg.norm(err) <= phase.tol:
                    break
                # cap the step without changing its direction: per-axis
                # clipping would bend long moves into axis-aligned legs
                # whose tails sweep straight through landmark regions
                biggest = float(np.max(np.abs(err)))
                delta = err * min(1.0, cfg.max_step / max(biggest, 1e-12))
                if noise > 0:
                    delta = delta + rng.uniform(-noise, noise, size=3)
                action = Action(np.clip(delta, -cfg.max_step, cfg.max_step),
                                phase.gripper)
                world = step(world, action)
                total += 1
                yield action, world
            else:
                raise ExpertFailure("phase step budget exhausted")
        else:  # grip / hold: stay put
            for _ in range(phase.steps):
                delta = (rng.uniform(-noise, noise, size=3) if noise > 0
                         else np.zeros(3))
                action = Action(delta, phase.gripper)
                world = step(world, action)
                total += 1
                yield action, world
        if total > TOTAL_BUDGET:
            raise ExpertFailure("total step budget exhausted")


def expert_rollout(task, seed, noise_scale=0.25, config=None):
    """Scripted solution of a task; deterministic in seed.

    Raises ExpertFailure if the goal check fails at the end (callers
    retry with a new seed).
    """
    env = make_env(task.env_name, config)
    world = env.make_world(task)
    rng = np.random.default_rng(seed)
    phases = _PHASE_BUILDERS[task.env_name](env, task, rng)
    # parking keeps the final state consistent across demonstrations
    phases = phases + [_move(lambda w: EEF_HOME.copy(), tol=0.01, gripper=0.0)]
    states = [world.state]
    actions = []
    for action, world in expert_actions(world, phases, rng, noise_scale):
        actions.append(action)
        states.append(world.state)
    if not env.goal_check(task, world.state):
        raise ExpertFailure(f"expert missed the goal for seed {seed}")
    return Trajectory(tuple(states), tuple(actions),
                      task_id=f"{task.env_name}-{seed}")
