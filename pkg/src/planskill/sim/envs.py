"""The three tabletop environments: stacking, pouring, painting.

Each environment owns its type registry, object geometry, event rules,
scenario-specific task sampling, and a ground-truth goal checker.
Scenario I draws unseen initial poses, Scenario II unseen goal
combinations (pouring/painting), Scenario III adds objects.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import ObjectSetMismatch, SchemaError, UnknownEnv
from ..worldmodel import (EnvState, FeatureKind, FeatureSchema, ObjectState,
                          ObjectType, TaskSpec)
from .core import EEF_HOME, EEF_ID, EEF_START, SimConfig, SimWorld

ENV_NAMES = ("stacking", "pouring", "painting")
N_GOAL_SAMPLES = 10

POS = FeatureSchema("pos", FeatureKind.POSITION3)
GRIP = FeatureSchema("grip", FeatureKind.SCALAR)

# long-lived landmarks (homes, tray, box, parking spots) are exact and
# shared across all tasks: every resting pose then falls into a tight,
# reusable cluster, and relative-to-landmark features stay congruent
# with the absolute ones instead of racing them at segment boundaries


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: str  # "I", "II", "III"
    env_name: str
    n_objects: int
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in ("I", "II", "III"):
            raise ValueError(f"unknown scenario '{self.scenario}'")


def _combos(n, k=3):
    return list(itertools.product(range(1, k + 1), repeat=n))


def split_combos(n, k=3):
    """Deterministic held-out split: the cyclic-shift combos.

    Holding out exactly the combos whose entries step by one (mod k)
    keeps every (slot, value) pair represented in some multi-valued
    training combo, so the held-out combos are genuinely novel
    combinations rather than novel single-slot assignments.
    """
    combos = sorted(_combos(n, k))
    held_out = [c for c in combos
                if all((b - a) % k == 1 for a, b in zip(c, c[1:]))
                and len(set(c)) > 1]
    training = [c for c in combos if c not in held_out]
    return training, held_out


def _obj(oid, otype, **feats):
    values = {k: np.asarray(v, dtype=float).reshape(-1)
              for k, v in feats.items()}
    return ObjectState(oid, otype, values)


class EnvSpec:
    name = None
    training_n = None
    graspable_types = frozenset()

    def __init__(self, config=None):
        self.config = config or SimConfig()

    def half_extents(self, type_name):
        return self._half_extents[type_name]

    def events(self, state, held):
        return {}

    def rest_spots(self, type_name):
        """Exact xy spots (divots) an object of this type settles onto
        when released nearby."""
        return ()

    def make_world(self, task):
        return SimWorld(task.initial_state, self, self.config)

    def goal_check(self, task, state):
        if set(state.object_ids()) != set(task.initial_state.object_ids()):
            raise ObjectSetMismatch("state objects differ from the task's")
        return self._check(task, state)

    def sample_task(self, scenario, seed):
        raise NotImplementedError

    def rest_z(self, type_name):
        return self.config.table_height + self.half_extents(type_name)[2]

    def _eef(self, rng, grip=0.0, start=False):
        # exact poses: the raised start pose for initial states (so
        # leaving it is a visible, plannable transition) and the home
        # pose for goal states (episodes end parked there)
        pos = EEF_START if start else EEF_HOME
        return _obj(EEF_ID, self.eef_type, pos=pos.copy(), grip=[grip])


class StackingEnv(EnvSpec):
    """Assemble blocks into a bridge: a pillar row plus crossbars."""

    name = "stacking"
    training_n = 3
    graspable_types = frozenset({"block"})

    PILLAR_SEP = 0.12
    # bricks are long along x so a crossbar dropped midway between two
    # pillars overlaps both of their footprints and rests on top
    BLOCK_HALF = (0.04, 0.025, 0.025)
    XY_TOL = 0.02
    Z_TOL = 0.01

    eef_type = ObjectType(EEF_ID, (POS, GRIP))
    block_type = ObjectType("block", (POS,))
    _half_extents = {"block": BLOCK_HALF, EEF_ID: (0.0, 0.0, 0.0)}

    @property
    def type_registry(self):
        return (self.eef_type, self.block_type)

    @staticmethod
    def roles(n):
        """(pillar ids, crossbar id list) for an n-block bridge.

        Blocks 0 and 1 are always the first two pillars and block 2 is
        always the crossbar over them; any further blocks extend the
        pillar row.  Keeping each block's role independent of n lets
        relations learned at one size transfer verbatim to larger ones.
        """
        return [0, 1] + list(range(3, n)), [2]

    def structure_offsets(self, n):
        """Required relative offsets {(block_a, block_b): delta} with
        delta = pos(a) - pos(b), anchored logically at pillar 0."""
        pillars, _ = self.roles(n)
        sep = self.PILLAR_SEP
        h = 2 * self.BLOCK_HALF[2]
        pairs = {}
        for a, b in zip(pillars[1:], pillars):
            pairs[(f"block{a}", f"block{b}")] = np.array([sep, 0.0, 0.0])
        pairs[("block2", "block0")] = np.array([sep / 2, 0.0, h])
        pairs[("block2", "block1")] = np.array([-sep / 2, 0.0, h])
        return pairs

    def structure_positions(self, n, anchor_xy):
        pillars, _ = self.roles(n)
        sep = self.PILLAR_SEP
        z = self.rest_z("block")
        pos = {}
        for row_idx, i in enumerate(pillars):
            pos[f"block{i}"] = np.array([anchor_xy[0] + row_idx * sep,
                                         anchor_xy[1], z])
        pos["block2"] = np.array([anchor_xy[0] + sep / 2, anchor_xy[1],
                                  z + 2 * self.BLOCK_HALF[2]])
        return pos

    # discrete, well-separated spots (plus a little jitter) keep every
    # resting position in a tight cluster, so nothing sweeps through a
    # foreign cluster region while being carried or lowered into place
    ANCHOR_SPOTS = ((-0.30, -0.14), (-0.30, 0.14))
    # spot-to-spot differences must stay clear of the structure offsets
    # (PILLAR_SEP and the crossbar offsets), or resting spawn pairs would
    # fall inside the learned adjacency clusters; a single spawn column
    # keeps spawn-pair offsets far from the pillar-row offset as well
    SPAWN_SPOTS = tuple((0.30, y) for y in (-0.24, -0.08, 0.08, 0.24))
    SPOT_JITTER = 0.005

    def _spot(self, rng, spots, idx):
        base = np.asarray(spots[idx])
        return base + rng.uniform(-self.SPOT_JITTER, self.SPOT_JITTER, size=2)

    def _anchor(self, rng, n):
        # only anchors whose full structure keeps every block clear of
        # the other discrete spots (> cluster eps + jitter), so finished
        # structures never light up foreign resting-spot predicates
        clear = []
        for idx, spot in enumerate(self.ANCHOR_SPOTS):
            pts = [p[:2] for p in self.structure_positions(n, spot).values()]
            foreign = [s for j, s in enumerate(self.ANCHOR_SPOTS) if j != idx]
            foreign += list(self.SPAWN_SPOTS)
            if all(np.linalg.norm(np.asarray(p) - np.asarray(f)) >= 0.06
                   for p in pts for f in foreign):
                clear.append(idx)
        if not clear:
            raise SchemaError(f"no anchor fits a {n}-block structure")
        return self._spot(rng, self.ANCHOR_SPOTS,
                          clear[int(rng.integers(len(clear)))])

    def _initial_state(self, rng, n):
        # the structure grows left of x ~ 0, spare blocks wait on the
        # right; keeping the zones apart stops carried blocks from
        # sweeping through foreign resting-position clusters
        anchor = self._anchor(rng, n)
        picks = rng.permutation(len(self.SPAWN_SPOTS))[:n - 1]
        others = [self._spot(rng, self.SPAWN_SPOTS, int(i)) for i in picks]
        z = self.rest_z("block")
        objects = {EEF_ID: self._eef(rng, start=True)}
        xy = [anchor] + others
        for i in range(n):
            objects[f"block{i}"] = _obj(f"block{i}", self.block_type,
                                        pos=[xy[i][0], xy[i][1], z])
        return EnvState(objects, timestamp=0)

    def _goal_state(self, rng, n):
        anchor = self._anchor(rng, n)
        positions = self.structure_positions(n, anchor)
        objects = {EEF_ID: self._eef(rng)}
        for i in range(n):
            oid = f"block{i}"
            jitter = rng.uniform(-0.003, 0.003, size=3)
            objects[oid] = _obj(oid, self.block_type,
                                pos=positions[oid] + jitter)
        return EnvState(objects, timestamp=0)

    def sample_task(self, scenario, seed):
        n = scenario.n_objects
        if scenario.scenario == "III" and n <= self.training_n:
            raise SchemaError("Scenario III requires more objects than training")
        rng = np.random.default_rng(seed)
        initial = self._initial_state(rng, n)
        goals = tuple(self._goal_state(rng, n) for _ in range(N_GOAL_SAMPLES))
        return TaskSpec("stacking", initial, goals, "stacking",
                        metadata={"n": n})

    def _check(self, task, state):
        for (a, b), delta in self.structure_offsets(task.metadata["n"]).items():
            d = state.get(a, "pos") - state.get(b, "pos")
            if np.linalg.norm(d[:2] - delta[:2]) > self.XY_TOL:
                return False
            if abs(d[2] - delta[2]) > self.Z_TOL:
                return False
        return True


def _pick_combo(scenario, n, rng):
    """Deterministic combo choice from the training or held-out pool."""
    training, held_out = split_combos(n)
    pool = held_out if scenario == "II" else training
    if not pool:
        raise SchemaError(f"no combos available for scenario {scenario}")
    return list(pool[int(rng.integers(len(pool)))])


class PouringEnv(EnvSpec):
    """Pour each cup its goal tea.

    Cups rest at fixed slots on the tray and never move; the robot
    carries a teapot over a cup and lowers it until tea transfers.  A
    cup's per-tea fill gauges start at a cup-specific baseline and jump
    to full when the matching tea lands, so "cup i holds tea k" is one
    shared landmark value while the baselines stay cup-local; the teas
    differ only in which teapot they come from.
    """

    name = "pouring"
    training_n = 2  # cups
    graspable_types = frozenset({"teapot"})
    n_teas = 3

    # exact landmarks: teapot parking spots and cup slots never vary, so
    # every relative-to-landmark feature is an exact translation of the
    # matching absolute one and their predicates flip in the same step
    TEAPOT_HOMES = ((-0.26, -0.27), (-0.26, 0.0), (-0.26, 0.27))
    TRAY_POS = (0.16, 0.0)
    # slots sit 0.18 apart: wider than any sweep of the gripper between
    # landmarks can graze (a path toward one slot stays > eps away from
    # the same feature translated to a neighbouring slot)
    CUP_SLOT_Y = (-0.18, 0.0, 0.18)
    FILL_BASE = (0.0, 0.25, 0.25)  # per-cup gauge baselines, full = 1.0
    POUR_HEIGHT = 0.055  # teapot center above cup center while pouring
    POUR_MAX = 0.075     # vertical window in which tea transfers

    eef_type = ObjectType(EEF_ID, (POS, GRIP))
    teapot_type = ObjectType("teapot", (POS,))
    cup_type = ObjectType("cup", (POS,) + tuple(
        FeatureSchema(f"fill{k}", FeatureKind.SCALAR) for k in (1, 2, 3)))
    tray_type = ObjectType("tray", (POS,))
    _half_extents = {"teapot": (0.03, 0.03, 0.035), "cup": (0.025, 0.025, 0.03),
                     "tray": (0.055, 0.24, 0.01), EEF_ID: (0.0, 0.0, 0.0)}

    @property
    def type_registry(self):
        return (self.eef_type, self.teapot_type, self.cup_type, self.tray_type)

    @staticmethod
    def tea_of(teapot_id):
        return int(teapot_id[len("teapot"):]) + 1

    def rest_spots(self, type_name):
        # parking divots: a teapot put back near its home settles onto
        # the exact spot, so resting poses repeat precisely across demos
        return self.TEAPOT_HOMES if type_name == "teapot" else ()

    def events(self, state, held):
        if held is None or state.objects[held].type.name != "teapot":
            return {}
        tp = state.get(held, "pos")
        tea = self.tea_of(held)
        for cid in state.by_type("cup"):
            if any(state.get(cid, f"fill{k}")[0] == 1.0
                   for k in range(1, self.n_teas + 1)):
                continue  # already served
            cp = state.get(cid, "pos")
            dz = tp[2] - cp[2]
            if (np.linalg.norm(tp[:2] - cp[:2]) <= self.config.event_radius
                    and 0.0 < dz <= self.POUR_MAX):
                return {cid: {f"fill{tea}": np.array([1.0])}}
        return {}

    def cup_slot(self, i):
        z = self.rest_z("tray") + self._half_extents["tray"][2] \
            + self._half_extents["cup"][2]
        return np.array([self.TRAY_POS[0], self.CUP_SLOT_Y[i], z])

    def _fills(self, i, tea):
        return {f"fill{k}": [1.0 if k == tea else self.FILL_BASE[i]]
                for k in range(1, self.n_teas + 1)}

    def _base_state(self, rng, n_cups, cup_teas, start=False):
        objects = {EEF_ID: self._eef(rng, start=start)}
        for k, (hx, hy) in enumerate(self.TEAPOT_HOMES):
            objects[f"teapot{k}"] = _obj(
                f"teapot{k}", self.teapot_type,
                pos=[hx, hy, self.rest_z("teapot")])
        objects["tray0"] = _obj("tray0", self.tray_type,
                                pos=[*self.TRAY_POS, self.rest_z("tray")])
        for i in range(n_cups):
            objects[f"cup{i}"] = _obj(f"cup{i}", self.cup_type,
                                      pos=self.cup_slot(i),
                                      **self._fills(i, cup_teas[i]))
        return EnvState(objects, timestamp=0)

    def sample_task(self, scenario, seed):
        n = scenario.n_objects
        if scenario.scenario == "III" and n <= self.training_n:
            raise SchemaError("Scenario III requires more objects than training")
        if n > len(self.CUP_SLOT_Y):
            raise SchemaError(f"at most {len(self.CUP_SLOT_Y)} cups fit the tray")
        rng = np.random.default_rng(seed)
        combo = _pick_combo(scenario.scenario, n, rng)
        initial = self._base_state(rng, n, [0] * n, start=True)
        goals = tuple(self._base_state(rng, n, combo)
                      for _ in range(N_GOAL_SAMPLES))
        return TaskSpec("pouring", initial, goals, "pouring",
                        metadata={"n": n, "combo": combo})

    def _check(self, task, state):
        for i, tea in enumerate(task.metadata["combo"]):
            cid = f"cup{i}"
            for k in range(1, self.n_teas + 1):
                full = state.get(cid, f"fill{k}")[0] == 1.0
                if full != (k == tea):
                    return False
            if np.linalg.norm(state.get(cid, "pos") - self.cup_slot(i)) > 0.02:
                return False
        return True


class PaintingEnv(EnvSpec):
    """Paint each block its goal color inside the box.

    Blocks rest at fixed slots in the box and never move; the robot
    parks the lid aside (the brushes cannot reach through it), then
    carries a brush down to a block until paint transfers.  A block's
    per-color coats start at a block-specific baseline and jump to full
    when the matching brush touches, mirroring the pouring gauges; the
    colors differ only in which brush applies them.
    """

    name = "painting"
    training_n = 2  # blocks
    graspable_types = frozenset({"brush", "lid"})
    n_colors = 3

    # exact landmarks, as in pouring: brush parking spots, block slots,
    # the box, and the lid's closed pose never vary across tasks
    BRUSH_HOMES = ((-0.26, -0.27), (-0.26, 0.0), (-0.26, 0.27))
    BOX_POS = (0.16, 0.0)
    # the same wide spacing as the pouring cup slots, for the same
    # sweep-clearance reason
    BLOCK_SLOT_Y = (-0.18, 0.0, 0.18)
    # the lid parks beside the box along x; its displacement must not be
    # congruent with the spacing of any other landmark family, or a
    # feature measured against the open lid would land in the same
    # cluster as the one measured against the closed lid
    LID_PARK = (0.33, 0.0)
    COLOR_BASE = (0.0, 0.25, 0.25)  # per-block coat baselines, full = 1.0
    PAINT_HEIGHT = 0.03  # brush above block center at the bottom of a dab

    eef_type = ObjectType(EEF_ID, (POS, GRIP))
    brush_type = ObjectType("brush", (POS,))
    block_type = ObjectType("block", (POS,) + tuple(
        FeatureSchema(f"color{k}", FeatureKind.SCALAR) for k in (1, 2, 3)))
    box_type = ObjectType("box", (POS,))
    lid_type = ObjectType("lid", (POS,))
    _half_extents = {"brush": (0.01, 0.01, 0.03), "block": (0.02, 0.02, 0.02),
                     "box": (0.07, 0.24, 0.04), "lid": (0.075, 0.25, 0.008),
                     EEF_ID: (0.0, 0.0, 0.0)}

    @property
    def type_registry(self):
        return (self.eef_type, self.brush_type, self.block_type,
                self.box_type, self.lid_type)

    @staticmethod
    def color_of(brush_id):
        return int(brush_id[len("brush"):]) + 1

    def rest_spots(self, type_name):
        # parking divots for brushes and the lid, as for the teapots in
        # pouring: resting poses repeat precisely across demos
        if type_name == "brush":
            return self.BRUSH_HOMES
        if type_name == "lid":
            return (self.LID_PARK,)
        return ()

    def events(self, state, held):
        if held is None or state.objects[held].type.name != "brush":
            return {}
        bp = state.get(held, "pos")
        color = self.color_of(held)
        for oid in state.by_type("block"):
            if any(state.get(oid, f"color{k}")[0] == 1.0
                   for k in range(1, self.n_colors + 1)):
                continue  # already painted
            if np.linalg.norm(state.get(oid, "pos") - bp) \
                    <= self.config.event_radius:
                return {oid: {f"color{color}": np.array([1.0])}}
        return {}

    def box_pos(self):
        return np.array([*self.BOX_POS, self.rest_z("box")])

    def lid_closed_pos(self):
        box = self.box_pos()
        z = box[2] + self._half_extents["box"][2] \
            + self._half_extents["lid"][2]
        return np.array([box[0], box[1], z])

    def lid_open_pos(self):
        return np.array([self.LID_PARK[0], self.LID_PARK[1],
                         self.rest_z("lid")])

    def block_slot(self, i):
        # blocks rest on the table inside the box walls, well below the
        # closed lid, so grasping the lid never brings the gripper near
        # a block
        box = self.box_pos()
        return np.array([box[0], box[1] + self.BLOCK_SLOT_Y[i],
                         self.rest_z("block")])

    def _colors(self, i, color):
        return {f"color{k}": [1.0 if k == color else self.COLOR_BASE[i]]
                for k in range(1, self.n_colors + 1)}

    def _base_state(self, rng, n_blocks, colors, lid_open, start=False):
        objects = {EEF_ID: self._eef(rng, start=start)}
        for k, (hx, hy) in enumerate(self.BRUSH_HOMES):
            objects[f"brush{k}"] = _obj(f"brush{k}", self.brush_type,
                                        pos=[hx, hy, self.rest_z("brush")])
        objects["box0"] = _obj("box0", self.box_type, pos=self.box_pos())
        lid_pos = self.lid_open_pos() if lid_open else self.lid_closed_pos()
        objects["lid0"] = _obj("lid0", self.lid_type, pos=lid_pos)
        for i in range(n_blocks):
            objects[f"block{i}"] = _obj(f"block{i}", self.block_type,
                                        pos=self.block_slot(i),
                                        **self._colors(i, colors[i]))
        return EnvState(objects, timestamp=0)

    def sample_task(self, scenario, seed):
        n = scenario.n_objects
        if scenario.scenario == "III" and n <= self.training_n:
            raise SchemaError("Scenario III requires more objects than training")
        if n > len(self.BLOCK_SLOT_Y):
            raise SchemaError(f"at most {len(self.BLOCK_SLOT_Y)} blocks fit")
        rng = np.random.default_rng(seed)
        combo = _pick_combo(scenario.scenario, n, rng)
        initial = self._base_state(rng, n, [0] * n, lid_open=False,
                                   start=True)
        goals = tuple(self._base_state(rng, n, combo, lid_open=True)
                      for _ in range(N_GOAL_SAMPLES))
        return TaskSpec("painting", initial, goals, "painting",
                        metadata={"n": n, "combo": combo})

    def _check(self, task, state):
        for i, color in enumerate(task.metadata["combo"]):
            oid = f"block{i}"
            for k in range(1, self.n_colors + 1):
                full = state.get(oid, f"color{k}")[0] == 1.0
                if full != (k == color):
                    return False
            if np.linalg.norm(state.get(oid, "pos")
                              - self.block_slot(i)) > 0.02:
                return False
        lid = state.get("lid0", "pos")
        if np.linalg.norm(lid[:2] - np.asarray(self.LID_PARK)) > 0.03:
            return False
        return True


_ENV_CLASSES = {cls.name: cls
                for cls in (StackingEnv, PouringEnv, PaintingEnv)}


def make_env(name, config=None):
    if name not in _ENV_CLASSES:
        raise UnknownEnv(f"unknown environment '{name}'")
    return _ENV_CLASSES[name](config)


def sample_task(env_name, scenario, seed, config=None):
    """Deterministic task sampling for an evaluation scenario."""
    env = make_env(env_name, config)
    task = env.sample_task(scenario, seed)
    for g in task.goal_samples:
        if not env.goal_check(task, g):
            raise SchemaError("goal sample fails the ground-truth checker")
    return task


def goal_check(task, state, config=None):
    env = make_env(task.env_name, config)
    return env.goal_check(task, state)
