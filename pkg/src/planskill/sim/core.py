"""Deterministic kinematic tabletop world.

Pure-function stepping: the end effector moves by clipped offsets, a
closing gripper rigidly attaches the nearest graspable object within
reach, an opening gripper drops the held object onto the highest
support surface beneath it. Pour/paint events trigger on geometric
proximity, one-shot and irreversible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..worldmodel import EnvState, ObjectState

EEF_ID = "eef"

# shared end-effector parking pose, reached at the end of every episode
EEF_HOME = np.array([0.0, -0.3, 0.3])
# episodes begin with the hand raised above the parking pose.  The two
# poses must differ: demonstrations end *near* home (tracking noise),
# so landmarks relative to home are learned from slightly scattered
# samples.  If episodes also began exactly at home, landmarks that are
# visible at the start (but not the end, or vice versa) would get
# different sample sets and could flip one step apart on arrival.
EEF_START = EEF_HOME + np.array([0.0, 0.0, 0.12])


@dataclass(frozen=True)
class SimConfig:
    max_step: float = 0.02
    grasp_radius: float = 0.05
    table_height: float = 0.0
    workspace_min: tuple = (-0.35, -0.35, 0.0)
    workspace_max: tuple = (0.35, 0.35, 0.5)
    event_radius: float = 0.04
    lid_open_offset: float = 0.10
    settle_radius: float = 0.02
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_step <= 0 or self.grasp_radius <= 0 or self.event_radius <= 0:
            raise ValueError("radii and max_step must be positive")


@dataclass(frozen=True)
class SimWorld:
    state: EnvState
    env: "object"  # EnvSpec; provides geometry and event rules
    config: SimConfig
    held_object: str | None = None
    held_offset: np.ndarray | None = None  # object pos - eef pos at attach


def _with_updates(state, updates, timestamp):
    """New EnvState with some objects' feature values replaced."""
    objects = {}
    for oid, obj in state.objects.items():
        if oid in updates:
            values = dict(obj.values)
            values.update(updates[oid])
            objects[oid] = ObjectState(oid, obj.type, values)
        else:
            objects[oid] = obj
    return EnvState(objects, timestamp=timestamp)


def _support_height(env, cfg, state, oid, exclude):
    """Resting z for object oid dropped at its current xy."""
    cfg_z = cfg.table_height
    hx, hy, hz = env.half_extents(state.objects[oid].type.name)
    pos = state.get(oid, "pos")
    best_top = cfg_z
    for other, obj in state.objects.items():
        if other in (oid, EEF_ID) or other in exclude:
            continue
        ohx, ohy, ohz = env.half_extents(obj.type.name)
        opos = obj.get("pos")
        if (abs(pos[0] - opos[0]) < hx + ohx
                and abs(pos[1] - opos[1]) < hy + ohy):
            top = opos[2] + ohz
            if top > best_top:
                best_top = top
    return best_top + hz


def step(world, action):
    """One kinematic step; pure function of (world, action)."""
    cfg = world.config
    env = world.env
    state = world.state
    t = state.timestamp + 1

    delta = np.clip(action.delta_position, -cfg.max_step, cfg.max_step)
    eef_pos = state.get(EEF_ID, "pos") + delta
    eef_pos = np.clip(eef_pos, cfg.workspace_min, cfg.workspace_max)
    grip = 1.0 if action.gripper >= 0.5 else 0.0

    updates = {EEF_ID: {"pos": eef_pos, "grip": np.array([grip])}}
    held = world.held_object
    offset = world.held_offset

    if held is not None:
        updates[held] = {"pos": eef_pos + offset}

    if grip >= 0.5 and held is None:
        best = None
        for oid, obj in state.objects.items():
            if oid == EEF_ID or obj.type.name not in env.graspable_types:
                continue
            dist = float(np.linalg.norm(obj.get("pos") - eef_pos))
            if dist <= cfg.grasp_radius and (best is None or dist < best[0]):
                best = (dist, oid)
        if best is not None:
            held = best[1]
            offset = state.get(held, "pos") - eef_pos
            updates[held] = {"pos": eef_pos + offset}

    new_state = _with_updates(state, updates, t)

    if grip < 0.5 and held is not None:
        pos = new_state.get(held, "pos").copy()
        # shallow divots at designated rest spots: an object released
        # close enough settles exactly onto the spot
        for spot in env.rest_spots(new_state.objects[held].type.name):
            if np.linalg.norm(pos[:2] - np.asarray(spot)) <= cfg.settle_radius:
                pos[:2] = spot
                break
        pos[2] = _support_height(env, cfg, new_state, held, exclude=())
        new_state = _with_updates(new_state, {held: {"pos": pos}}, t)
        held, offset = None, None

    event_updates = env.events(new_state, held)
    if event_updates:
        new_state = _with_updates(new_state, event_updates, t)

    return SimWorld(new_state, env, cfg, held,
                    None if offset is None else np.asarray(offset))


def rollout_from(world, actions):
    """Apply an action sequence; returns (final world, state list)."""
    states = [world.state]
    for a in actions:
        world = step(world, a)
        states.append(world.state)
    return world, states
