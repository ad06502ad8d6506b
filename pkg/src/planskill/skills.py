"""Per-operator skills: relevance transform, controller, subgoal sampler.

Demonstrations are cut at abstract state changes; each constant run
becomes a training segment for the operator explaining its transition.
States are projected through a transform that keeps only the features
the operator's effects mention, plus the end effector's relation to the
objects it manipulates.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (InsufficientData, NoMatch, PreconditionViolated,
                     SkillTimeout)
from .kde import Sampler, fit_sampler
from .mlp import Controller, TrainConfig, train_controller_arrays
from .operators import applicable, apply_op, match_operator
from .predicates import abstract_state, eval_predicate
from .worldmodel import EEF_TYPE, FeatureKind, batch_distance, relative_feature

log = logging.getLogger(__name__)

EEF_SLOT = "eef"
NEAREST_SLOT = "~nearest"  # resolved to the object closest to the eef
GRIPPER_FEATURE = "grip"
DEFAULT_MAX_SKILL_STEPS = 200
SUBGOAL_TRIES = 50
# corrective augmentation: virtual eef displacements up to AUG_RADIUS,
# labelled with the recorded action plus a pull back onto the data
# manifold; widens the band where closed-loop rollouts stay recoverable
AUG_COPIES = 3
AUG_RADIUS = 0.04
HELD_RADIUS = 0.05  # matches the simulator's grasp radius
GRIP_GATE = 0.02  # max distance to the subgoal before the grip may flip


@dataclass(frozen=True)
class TransformEntry:
    feature: str
    kind: FeatureKind
    slots: tuple  # one slot (absolute) or two (relative, a minus b)

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(self.slots))

    @property
    def dim(self):
        return self.kind.dim


@dataclass(frozen=True)
class TransformSpec:
    operator_id: str
    entries: tuple
    includes_eef: bool

    @property
    def output_dim(self):
        return sum(e.dim for e in self.entries)

    def slices(self):
        """Per-entry index ranges into the output vector."""
        out = []
        start = 0
        for e in self.entries:
            out.append((start, start + e.dim))
            start += e.dim
        return out

    def apply(self, state, binding):
        """Project a world state to the relevant feature vector."""
        parts = []
        for e in self.entries:
            oids = [binding.get(s, s) for s in e.slots]
            if len(oids) == 1:
                parts.append(np.asarray(state.get(oids[0], e.feature),
                                        dtype=float))
            else:
                parts.append(relative_feature(
                    e.kind, state.get(oids[0], e.feature),
                    state.get(oids[1], e.feature)))
        return np.concatenate(parts) if parts else np.zeros(0)


def build_transform(op, preds):
    """Transform spec from an operator's effect atoms.

    One entry per distinct (feature, slots) pair among the effects,
    then the eef augmentation: relative position of the eef to each
    distinct effect object and the gripper scalar.
    """
    by_id = {p.id: p for p in preds}
    entries = []
    seen = set()
    effect_objects = []
    for atom in sorted(op.eff_plus) + sorted(op.eff_minus):
        p = by_id[atom.predicate_id]
        key = (p.feature, atom.args)
        if key not in seen:
            seen.add(key)
            entries.append(TransformEntry(p.feature, p.kind, atom.args))
        types = op.param_types()
        for arg in atom.args:
            if types.get(arg) != EEF_TYPE and arg not in effect_objects:
                effect_objects.append(arg)
    for slot in effect_objects:
        entry = TransformEntry("pos", FeatureKind.POSITION3, (EEF_SLOT, slot))
        if (entry.feature, entry.slots) not in seen:
            seen.add((entry.feature, entry.slots))
            entries.append(entry)
    if not any(e.kind is FeatureKind.POSITION3 for e in entries):
        # pure gripper toggles mention no position at all, yet which
        # pose they should fire at depends on the object a grasp or
        # release would affect; condition them on the nearest object
        entries.append(TransformEntry("pos", FeatureKind.POSITION3,
                                      (EEF_SLOT, NEAREST_SLOT)))
    entries.append(TransformEntry(GRIPPER_FEATURE, FeatureKind.SCALAR,
                                  (EEF_SLOT,)))
    return TransformSpec(op.name, tuple(entries), includes_eef=True)


def _nearest_object(state):
    """Object id closest to the end effector."""
    eef = state.get(EEF_SLOT, "pos")
    best = None
    for oid in state.object_ids():
        if oid == EEF_SLOT:
            continue
        d = float(np.linalg.norm(state.get(oid, "pos") - eef))
        if best is None or d < best[0]:
            best = (d, oid)
    return best[1]


def _resolve_nearest(spec, binding, state):
    """Bind the nearest-object slot when the transform uses it."""
    if any(NEAREST_SLOT in e.slots for e in spec.entries):
        binding = dict(binding)
        binding[NEAREST_SLOT] = _nearest_object(state)
    return binding


@dataclass
class SkillDataset:
    operator_id: str
    phis: list = field(default_factory=list)  # phi(s) per timestep
    actions: list = field(default_factory=list)  # 4-vectors
    goals: list = field(default_factory=list)  # phi(goal) per timestep
    segment_goals: list = field(default_factory=list)  # one per segment

    def __len__(self):
        return len(self.phis)

    @property
    def samples(self):
        return list(zip(self.phis, self.actions, self.goals))


def _action_vector(action):
    return np.array([*action.delta_position, action.gripper])


def _skill_binding(gop):
    binding = dict(gop.binding)
    binding.setdefault(EEF_SLOT, EEF_SLOT)
    return binding


def _held_object(state):
    """Infer the grasped object id from a raw state, or None.

    Mirrors the simulator's grasp rule: gripper closed and the nearest
    object within the grasp radius of the end effector.
    """
    if float(state.get(EEF_SLOT, GRIPPER_FEATURE)) < 0.5:
        return None
    eef = state.get(EEF_SLOT, "pos")
    best = None
    for oid in state.object_ids():
        if oid == EEF_SLOT:
            continue
        d = float(np.linalg.norm(state.get(oid, "pos") - eef))
        if d <= HELD_RADIUS and (best is None or d < best[0]):
            best = (d, oid)
    return best[1] if best else None


def _eef_jacobian(spec, binding, held):
    """Per-entry weight of a virtual eef displacement on phi.

    The held object moves rigidly with the eef; all other objects stay
    put, so each position entry shifts by a signed multiple of the
    displacement and everything else is unaffected.
    """
    weights = []
    for e in spec.entries:
        if e.kind is not FeatureKind.POSITION3:
            weights.append(0.0)
            continue
        oids = [binding.get(s, s) for s in e.slots]
        mv = [1.0 if (o == EEF_SLOT or o == held) else 0.0 for o in oids]
        weights.append(mv[0] - (mv[1] if len(mv) > 1 else 0.0))
    return weights


def _augment(ds, spec, phi, action, goal, weights, rng, max_step):
    """Corrective copies: displace the eef, pull the action back."""
    for _ in range(AUG_COPIES):
        delta = rng.uniform(-AUG_RADIUS, AUG_RADIUS, size=3)
        parts = [np.full(e.dim, 0.0) if w == 0.0 else w * delta
                 for e, w in zip(spec.entries, weights)]
        offset = np.concatenate(parts) if parts else np.zeros(0)
        act = action.copy()
        v = act[:3] - delta
        biggest = float(np.max(np.abs(v)))
        if biggest > max_step:
            v *= max_step / biggest
        act[:3] = v
        ds.phis.append(phi + offset)
        ds.actions.append(act)
        ds.goals.append(goal)


def segment(demos, preds, ops, tables=None):
    """Cut demos at abstract boundaries, route segments to operators.

    Returns a dict operator name -> SkillDataset. A trailing run with
    no successor state carries no transition and is dropped.
    """
    from .truth import TrajTable

    transforms = {op.name: build_transform(op, preds) for op in ops}
    datasets = {op.name: SkillDataset(op.name) for op in ops}
    pred_ids = [p.id for p in preds]
    aug_rng = np.random.default_rng(0)
    max_step = max((float(np.max(np.abs(a.delta_position)))
                    for t in demos.trajectories for a in t.actions),
                   default=0.02)
    for ti, traj in enumerate(demos.trajectories):
        table = (tables.tables[ti] if tables is not None
                 else TrajTable(traj, preds))
        bounds = table.boundaries(pred_ids)
        for si in range(len(bounds) - 1):
            j, nxt = bounds[si], bounds[si + 1]
            s_abs = table.abstract_at(pred_ids, j)
            g_abs = table.abstract_at(pred_ids, nxt)
            try:
                gop = match_operator(ops, s_abs, g_abs)
            except NoMatch as exc:
                raise NoMatch(
                    f"trajectory {ti} ('{traj.task_id}'), segment {si} "
                    f"(states {j}..{nxt}): {exc}") from exc
            spec = transforms[gop.operator.name]
            binding = _resolve_nearest(spec, _skill_binding(gop),
                                       traj.states[j])
            goal = spec.apply(traj.states[nxt], binding)
            ds = datasets[gop.operator.name]
            for l in range(j, nxt):
                phi = spec.apply(traj.states[l], binding)
                action = _action_vector(traj.actions[l])
                # skip no-op padding (gripper holds): a rollout entering
                # at such a state would imitate the idle and deadlock
                state_grip = float(traj.states[l].get(
                    EEF_SLOT, GRIPPER_FEATURE)) >= 0.5
                if (np.max(np.abs(action[:3])) <= 0.25 * max_step
                        and (action[3] >= 0.5) == state_grip):
                    continue
                ds.phis.append(phi)
                ds.actions.append(action)
                ds.goals.append(goal)
                weights = _eef_jacobian(spec, binding,
                                        _held_object(traj.states[l]))
                _augment(ds, spec, phi, action, goal, weights, aug_rng,
                         max_step)
            ds.segment_goals.append(goal)
    return datasets


def controller_input(phi, goal):
    """Goal conditioning as concat(phi, phi - goal).

    The difference parameterization keeps proportional move-toward-goal
    behavior nearly linear in the inputs, which closed-loop rollouts
    need far more than the raw goal coordinates.
    """
    return np.concatenate([phi, phi - goal], axis=-1)


def train_controller(ds, hp=None):
    """Behavior cloning on controller_input(phi(s), phi(goal)) -> action."""
    x = controller_input(np.asarray(ds.phis), np.asarray(ds.goals))
    y = np.asarray(ds.actions)
    controller, _ = train_controller_arrays(x, y, hp)
    return controller


@dataclass
class Skill:
    operator_id: str
    transform: TransformSpec
    controller: Controller
    sampler: Sampler

    def __post_init__(self):
        d = self.transform.output_dim
        if self.sampler.dim != d or self.controller.layer_sizes[0] != 2 * d:
            raise ValueError(
                f"skill '{self.operator_id}': inconsistent dims")


def train_skill(op, ds, preds, hp=None):
    spec = build_transform(op, preds)
    controller = train_controller(ds, hp)
    sampler = fit_sampler(np.asarray(ds.segment_goals))
    return Skill(op.name, spec, controller, sampler)


def train_skills(demos, preds, ops, hp=None, tables=None):
    """One skill per operator; independent, seed-deterministic runs.

    Operators whose segments cover too few steps to fit a controller
    are skipped (callers drop them from the domain).
    """
    datasets = segment(demos, preds, ops, tables=tables)
    skills = {}
    for op in ops:
        cfg = hp or TrainConfig()
        try:
            skills[op.name] = train_skill(op, datasets[op.name], preds, cfg)
        except InsufficientData as exc:
            log.warning("skipping skill for %s: %s", op.name, exc)
    return skills


def effect_checker(spec, op, preds):
    """Predicate-level acceptance test for sampled subgoal vectors.

    Each effect atom is located in the transform output; the sampled
    slice must fall inside (eff_plus) or outside (eff_minus) the
    predicate's cluster.
    """
    by_id = {p.id: p for p in preds}
    slot_index = {(e.feature, e.slots): sl
                  for e, sl in zip(spec.entries, spec.slices())}
    checks = []
    for atom, want in ([(a, True) for a in op.eff_plus]
                       + [(a, False) for a in op.eff_minus]):
        p = by_id[atom.predicate_id]
        start, stop = slot_index[(p.feature, atom.args)]
        checks.append((p, start, stop, want))

    def accept(vec):
        for p, start, stop, want in checks:
            dists = batch_distance(p.kind, vec[None, start:stop],
                                   p.cluster_points)
            if (float(dists.min()) <= p.epsilon) != want:
                return False
        return True

    return accept


def sample_subgoal(sampler, rng, accept=None, frozen=None, phi=None,
                   max_tries=SUBGOAL_TRIES):
    """Draw from the KDE; rejection against accept, with a fallback.

    When frozen dimension indices and the current phi are given, the
    accepted draw closest to phi on those dimensions wins: the skill
    cannot move them (e.g. the in-hand grasp offset), so the subgoal
    must take their current values as given.

    After max_tries rejections the raw data point nearest the last
    draw is returned, so the call always terminates.
    """
    if accept is None:
        return sampler.draw(rng)
    drawn = [sampler.draw(rng) for _ in range(max_tries)]
    accepted = [s for s in drawn if accept(s)]
    if accepted:
        if frozen is not None and len(frozen) and phi is not None:
            key = lambda s: float(np.sum((s[frozen] - phi[frozen]) ** 2))
            return min(accepted, key=key)
        return accepted[0]
    sq = np.sum((sampler.points - drawn[-1]) ** 2, axis=1)
    return sampler.points[int(np.argmin(sq))].copy()


@dataclass
class SkillOutcome:
    steps: int
    drift: bool  # atoms outside the operator's effects changed too


def _effects_hold(state, gop, by_id):
    for atom in gop.ground(gop.operator.eff_plus):
        if not eval_predicate(by_id[atom.predicate_id], state, atom.args):
            return False
    for atom in gop.ground(gop.operator.eff_minus):
        if eval_predicate(by_id[atom.predicate_id], state, atom.args):
            return False
    return True


def execute_skill(world, skill, gop, preds, rng,
                  max_steps=DEFAULT_MAX_SKILL_STEPS):
    """Run one skill until its grounded effects hold in the world.

    The subgoal is sampled once. Raises SkillTimeout (with the last
    world attached) when the effects are still unsatisfied after
    max_steps.
    """
    from .sim.core import step
    from .worldmodel import Action

    by_id = {p.id: p for p in preds}
    entry_abs = abstract_state(world.state, preds)
    if not applicable(gop, entry_abs):
        raise PreconditionViolated(
            f"'{gop.name}' is not applicable at skill entry")
    expected = apply_op(gop, entry_abs)
    binding = _resolve_nearest(skill.transform, _skill_binding(gop),
                               world.state)
    if _effects_hold(world.state, gop, by_id):
        return world, SkillOutcome(steps=0, drift=False)
    weights = _eef_jacobian(skill.transform, binding, world.held_object)
    frozen = np.array([i for (e, w), (start, stop)
                       in zip(zip(skill.transform.entries, weights),
                              skill.transform.slices())
                       if e.kind is FeatureKind.POSITION3 and w == 0.0
                       for i in range(start, stop)], dtype=int)
    # relative position dims the controller can actually drive; absolute
    # positions are episode-specific and never match a demo subgoal
    gate = np.array([i for (e, w), (start, stop)
                     in zip(zip(skill.transform.entries, weights),
                            skill.transform.slices())
                     if e.kind is FeatureKind.POSITION3 and w != 0.0
                     and len(e.slots) == 2
                     for i in range(start, stop)], dtype=int)
    phi = skill.transform.apply(world.state, binding)
    subgoal = sample_subgoal(
        skill.sampler, rng,
        accept=effect_checker(skill.transform, gop.operator, preds),
        frozen=frozen, phi=phi)
    max_step = world.config.max_step
    grip = float(world.state.get(EEF_SLOT, GRIPPER_FEATURE) >= 0.5)
    # the gripper entry is the last transform dimension; the subgoal
    # fixes which side the grasp should end on
    goal_grip = 1.0 if subgoal[-1] > 0.5 else 0.0
    for t in range(max_steps):
        phi = skill.transform.apply(world.state, binding)
        out = skill.controller.predict(controller_input(phi, subgoal))[0]
        delta = np.clip(out[:3], -max_step, max_step)
        # ratchet: the grip flips only toward the subgoal's grip value,
        # so a borderline prediction cannot drop a carried object; the
        # flip is also gated on reaching the subgoal's position dims so
        # a grasp closes at the contact point, not above it
        near = (gate.size == 0 or
                np.max(np.abs(phi[gate] - subgoal[gate])) <= GRIP_GATE)
        if near and (out[3] > 0.5) == (goal_grip == 1.0):
            grip = goal_grip
        world = step(world, Action(delta, grip))
        if _effects_hold(world.state, gop, by_id):
            final_abs = abstract_state(world.state, preds)
            drift = final_abs != expected
            if drift:
                log.info("abstract drift after '%s'", gop.name)
            return world, SkillOutcome(steps=t + 1, drift=drift)
    exc = SkillTimeout(f"'{gop.name}' unmet after {max_steps} steps")
    exc.world = world
    raise exc
