"""Lifted operator induction from abstract transitions.

Every consecutive pair of abstract states yields a transition tuple;
objects touched by the effects are lifted to typed variables while the
rest stay constant. Tuples with identical lifted effects are grouped and
their precondition sets intersected into one operator.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

from .errors import NoMatch, NotApplicable
from .predicates import AbstractState, GroundedPredicate, abstract_trajectory

log = logging.getLogger(__name__)


def is_var(name):
    return isinstance(name, str) and name.startswith("?")


@dataclass(frozen=True)
class TransitionTuple:
    pre_plus: frozenset
    pre_minus: frozenset
    eff_plus: frozenset
    eff_minus: frozenset
    params: tuple  # ((var, type), ...); empty while grounded
    obj_types: dict  # object id -> type name, for lifting
    source: tuple  # (trajectory index, transition index)

    def __post_init__(self):
        if self.eff_plus & self.eff_minus:
            raise ValueError("eff_plus and eff_minus overlap")


@dataclass(frozen=True)
class Operator:
    name: str
    params: tuple  # ((var, type), ...)
    pre_plus: frozenset
    pre_minus: frozenset
    eff_plus: frozenset
    eff_minus: frozenset
    skill_id: int | None = None

    def __post_init__(self):
        variables = {v for v, _ in self.params}
        for atom in self.eff_plus | self.eff_minus:
            for arg in atom.args:
                if is_var(arg) and arg not in variables:
                    raise ValueError(
                        f"operator '{self.name}': effect var {arg} not a param")

    def param_types(self):
        return dict(self.params)


@dataclass(frozen=True)
class GroundedOperator:
    operator: Operator
    binding: dict  # var -> object id

    def __post_init__(self):
        vars_needed = {v for v, _ in self.operator.params}
        if set(self.binding) != vars_needed:
            raise ValueError("binding must cover exactly the operator params")
        if len(set(self.binding.values())) != len(self.binding):
            raise ValueError("distinct variables must bind distinct objects")

    @property
    def name(self):
        args = ",".join(self.binding[v] for v, _ in self.operator.params)
        return f"{self.operator.name}({args})"

    def ground(self, atoms):
        return frozenset(_substitute(a, self.binding) for a in atoms)


def _substitute(atom, mapping):
    args = tuple(mapping.get(a, a) for a in atom.args)
    return GroundedPredicate(atom.predicate_id, args)


def all_groundings(preds, obj_types):
    """Every type-valid grounding of preds over the given objects."""
    by_type = {}
    for oid, tname in obj_types.items():
        by_type.setdefault(tname, []).append(oid)
    atoms = set()
    for p in preds:
        pools = [by_type.get(t, []) for t in p.params]
        for combo in itertools.product(*pools):
            if len(set(combo)) == len(combo):
                atoms.add(GroundedPredicate(p.id, combo))
    return atoms


def transitions_from_abstract(abs_traj, preds, obj_types, traj_index=0):
    """Grounded transition tuples from one deduplicated abstract trajectory."""
    universe = all_groundings(preds, obj_types)
    tuples = []
    for k in range(len(abs_traj) - 1):
        s, s_next = abs_traj[k], abs_traj[k + 1]
        tuples.append(TransitionTuple(
            pre_plus=frozenset(s.trues),
            pre_minus=frozenset(universe - s.trues),
            eff_plus=frozenset(s_next.trues - s.trues),
            eff_minus=frozenset(s.trues - s_next.trues),
            params=(),
            obj_types=dict(obj_types),
            source=(traj_index, k)))
    return tuples


def state_obj_types(state):
    return {oid: obj.type.name for oid, obj in state.objects.items()}


def extract_transitions(demos, preds):
    tuples = []
    for ti, traj in enumerate(demos.trajectories):
        abs_traj = abstract_trajectory(traj, preds)
        tuples.extend(transitions_from_abstract(
            abs_traj, preds, state_obj_types(traj.states[0]), ti))
    return tuples


def lift_effects(eff_plus, eff_minus, obj_types):
    """Canonical lifted effect key: effect objects become typed
    variables in first-appearance order under sorted effect ordering.

    Returns (params, lifted eff_plus, lifted eff_minus) along with the
    object-to-variable mapping used.
    """
    order = []
    for atom in sorted(eff_plus) + sorted(eff_minus):
        for arg in atom.args:
            if arg not in order:
                order.append(arg)
    mapping = {obj: f"?v{i}" for i, obj in enumerate(order)}
    params = tuple((mapping[obj], obj_types[obj]) for obj in order)
    key = (params,
           frozenset(_substitute(a, mapping) for a in eff_plus),
           frozenset(_substitute(a, mapping) for a in eff_minus))
    return key, mapping


def lift(tup):
    """Replace effect objects with typed variables, in first-appearance
    order under canonical effect ordering; other objects stay constant."""
    key, mapping = lift_effects(tup.eff_plus, tup.eff_minus, tup.obj_types)
    params, eff_plus, eff_minus = key
    sub = lambda atoms: frozenset(_substitute(a, mapping) for a in atoms)
    return TransitionTuple(
        pre_plus=sub(tup.pre_plus), pre_minus=sub(tup.pre_minus),
        eff_plus=eff_plus, eff_minus=eff_minus,
        params=params, obj_types=dict(tup.obj_types), source=tup.source)


def _effect_signature(lifted, pred_names):
    parts = []
    for sign, atoms in (("add", lifted.eff_plus), ("del", lifted.eff_minus)):
        for atom in sorted(atoms):
            args = "_".join(a.lstrip("?") for a in atom.args)
            parts.append(f"{sign}-{pred_names[atom.predicate_id]}-{args}")
    return "--".join(parts)


def induce_operators(demos, preds, transitions=None):
    """Group lifted tuples by identical effects; intersect preconditions."""
    if transitions is None:
        transitions = extract_transitions(demos, preds)
    pred_names = {p.id: p.name for p in preds}
    groups = {}
    for tup in transitions:
        lifted = lift(tup)
        key = (lifted.params, lifted.eff_plus, lifted.eff_minus)
        groups.setdefault(key, []).append(lifted)

    operators = []
    for k, key in enumerate(sorted(groups, key=_group_sort_key)):
        members = groups[key]
        params, eff_plus, eff_minus = key
        pre_plus = frozenset.intersection(*(m.pre_plus for m in members))
        pre_minus = frozenset.intersection(*(m.pre_minus for m in members))
        sig = _effect_signature(members[0], pred_names)
        operators.append(Operator(
            name=f"op{k:02d}_{sig}", params=params,
            pre_plus=pre_plus, pre_minus=pre_minus,
            eff_plus=eff_plus, eff_minus=eff_minus))
    return sorted(operators, key=lambda o: o.name)


def _group_sort_key(key):
    params, eff_plus, eff_minus = key
    return (tuple(params), tuple(sorted(eff_plus)), tuple(sorted(eff_minus)))


def applicable(gop, state):
    """Exact membership test of the grounded preconditions."""
    trues = state.trues
    return (all(a in trues for a in gop.ground(gop.operator.pre_plus))
            and not (gop.ground(gop.operator.pre_minus) & trues))


def apply_op(gop, state):
    if not applicable(gop, state):
        raise NotApplicable(f"{gop.name} not applicable")
    trues = (state.trues - gop.ground(gop.operator.eff_minus)) \
        | gop.ground(gop.operator.eff_plus)
    return AbstractState(frozenset(trues))


def _unify_atoms(op_atoms, observed, binding):
    """Backtracking match of lifted atoms onto grounded ones; yields
    bindings consistent with every atom."""
    if not op_atoms:
        yield binding
        return
    atom, rest = op_atoms[0], op_atoms[1:]
    for obs in sorted(observed):
        if obs.predicate_id != atom.predicate_id:
            continue
        new_binding = dict(binding)
        ok = True
        for a, o in zip(atom.args, obs.args):
            if is_var(a):
                if new_binding.get(a, o) != o:
                    ok = False
                    break
                new_binding[a] = o
            elif a != o:
                ok = False
                break
        if not ok:
            continue
        if len(set(new_binding.values())) != len(new_binding):
            continue
        yield from _unify_atoms(rest, observed, new_binding)


def _match_bindings(op, eff_plus, eff_minus):
    """Bindings under which op's grounded effects equal the observed sets."""
    results = []
    plus_atoms = tuple(sorted(op.eff_plus))
    minus_atoms = tuple(sorted(op.eff_minus))
    for b1 in _unify_atoms(plus_atoms, eff_plus, {}):
        for b2 in _unify_atoms(minus_atoms, eff_minus, b1):
            gop_vars = {v for v, _ in op.params}
            if set(b2) != gop_vars:
                continue
            gop = GroundedOperator(op, b2)
            if (gop.ground(op.eff_plus) == eff_plus
                    and gop.ground(op.eff_minus) == eff_minus):
                if gop not in results:
                    results.append(gop)
    return results


def match_operator_all(ops, s, s_next):
    if s == s_next:
        raise NotApplicable("no transition: states are identical")
    eff_plus = frozenset(s_next.trues - s.trues)
    eff_minus = frozenset(s.trues - s_next.trues)
    matches = []
    for op in sorted(ops, key=lambda o: o.name):
        for gop in _match_bindings(op, eff_plus, eff_minus):
            if applicable(gop, s) and apply_op(gop, s) == s_next:
                matches.append(gop)
    return sorted(matches, key=lambda g: g.name)


def match_operator(ops, s, s_next):
    """The grounded operator explaining the transition s -> s_next.

    Ambiguity is logged, not fatal: the first match in canonical order
    is returned.
    """
    matches = match_operator_all(ops, s, s_next)
    if not matches:
        raise NoMatch("no operator matches the transition")
    if len(matches) > 1:
        log.warning("ambiguous transition match: %s",
                    [g.name for g in matches])
    return matches[0]
