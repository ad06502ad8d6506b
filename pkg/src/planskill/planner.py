"""Grounded unit-cost STRIPS planning.

Blind breadth-first search with duplicate detection for shortest plans,
and a bounded K-shortest-paths variant for top-K plan enumeration.
Learned domains stay small, so no heuristics are needed.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass

from .errors import BudgetExhausted, EmptyGoal
from .operators import GroundedOperator, applicable, apply_op
from .predicates import AbstractState, abstract_state

DEFAULT_NODE_BUDGET = 200_000


@dataclass
class PlanningProblem:
    obj_types: dict  # object id -> type name
    initial: AbstractState
    goal_plus: frozenset  # of GroundedPredicate
    grounded_ops: list  # GroundedOperator, canonical order

    def goal_satisfied(self, state):
        return self.goal_plus <= state.trues


@dataclass
class Plan:
    steps: list  # GroundedOperator

    @property
    def cost(self):
        return len(self.steps)

    def labels(self):
        """Operator schema names, the alphabet for plan similarity."""
        return tuple(g.operator.name for g in self.steps)

    def names(self):
        return tuple(g.name for g in self.steps)


def ground_operators(ops, obj_types):
    """All type-valid distinct-argument bindings, canonical order."""
    by_type = {}
    for oid, tname in sorted(obj_types.items()):
        by_type.setdefault(tname, []).append(oid)
    grounded = []
    for op in sorted(ops, key=lambda o: o.name):
        pools = [by_type.get(t, []) for _, t in op.params]
        for combo in itertools.product(*pools):
            if len(set(combo)) != len(combo):
                continue
            binding = {v: o for (v, _), o in zip(op.params, combo)}
            grounded.append(GroundedOperator(op, binding))
    return sorted(grounded, key=lambda g: g.name)


def make_problem(obj_types, initial, goal_plus, ops):
    return PlanningProblem(dict(obj_types), initial, frozenset(goal_plus),
                           ground_operators(ops, obj_types))


def abstract_goal(goal_samples, preds):
    """Grounded predicates true across every goal sample."""
    if not goal_samples:
        raise ValueError("goal_samples must be non-empty")
    sets = [abstract_state(s, preds).trues for s in goal_samples]
    goal = frozenset.intersection(*map(frozenset, sets))
    if not goal:
        raise EmptyGoal("no grounded predicate holds across all goal samples")
    return goal


def shortest_plan(prob, budget=DEFAULT_NODE_BUDGET, deadline=None):
    """Minimum-length plan via BFS; None if proven unreachable.

    Ties are broken toward the lexicographically smallest grounded
    operator name sequence (guaranteed by expanding operators in
    canonical order). deadline, if given, is an absolute
    time.monotonic() cutoff enforced between node expansions.
    """
    if prob.goal_satisfied(prob.initial):
        return Plan([])
    visited = {prob.initial}
    frontier = [(prob.initial, [])]
    expanded = 0
    while frontier:
        next_frontier = []
        for state, path in frontier:
            expanded += 1
            if expanded > budget:
                raise BudgetExhausted(f"shortest_plan budget {budget} exhausted")
            if (deadline is not None and expanded % 64 == 0
                    and time.monotonic() > deadline):
                raise BudgetExhausted("shortest_plan deadline exceeded")
            for gop in prob.grounded_ops:
                if not applicable(gop, state):
                    continue
                nxt = apply_op(gop, state)
                if nxt in visited:
                    continue
                visited.add(nxt)
                new_path = path + [gop]
                if prob.goal_satisfied(nxt):
                    return Plan(new_path)
                next_frontier.append((nxt, new_path))
        frontier = next_frontier
    return None


def topk_plans(prob, k, budget=DEFAULT_NODE_BUDGET):
    """Up to k cheapest simple-path plans, non-decreasing cost.

    Best-first search over (state, path) nodes; each abstract state is
    expanded at most k times, and plans never revisit a state.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    counter = itertools.count()
    heap = [(0, (), next(counter), prob.initial, [])]
    expansions = {}
    plans = []
    popped = 0
    while heap and len(plans) < k:
        cost, names, _, state, path = heapq.heappop(heap)
        popped += 1
        if popped > budget:
            raise BudgetExhausted(f"topk_plans budget {budget} exhausted")
        count = expansions.get(state, 0)
        if count >= k:
            continue
        expansions[state] = count + 1
        if prob.goal_satisfied(state):
            plans.append(Plan(path))
            continue
        seen_states = {s for s, _ in _path_states(prob.initial, path)}
        for gop in prob.grounded_ops:
            if not applicable(gop, state):
                continue
            nxt = apply_op(gop, state)
            if nxt == state or nxt in seen_states:
                continue
            heapq.heappush(heap, (cost + 1, names + (gop.name,),
                                  next(counter), nxt, path + [gop]))
    return plans


def _path_states(initial, path):
    state = initial
    yield state, None
    for gop in path:
        state = apply_op(gop, state)
        yield state, gop


def replay(prob, plan):
    """Execute a plan symbolically; returns the final abstract state."""
    state = prob.initial
    for gop in plan.steps:
        state = apply_op(gop, state)
    return state


def levenshtein(a, b):
    """Unit-cost edit distance between two label sequences."""
    a, b = list(a), list(b)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cur.append(min(prev[j] + 1,
                           cur[j - 1] + 1,
                           prev[j - 1] + (x != y)))
        prev = cur
    return prev[len(b)]


def select_plan(plans, demo_plans):
    """Plan closest (minimum Levenshtein over demo plans) to a demo.

    Ties break toward lower cost, then lexicographic label sequence.
    """
    if not plans:
        raise ValueError("plans must be non-empty")
    demo_plans = [tuple(d) for d in demo_plans]

    def key(plan):
        labels = plan.labels()
        dist = min((levenshtein(labels, d) for d in demo_plans),
                   default=0)
        return (dist, plan.cost, labels)

    return min(plans, key=key)
