"""Abstraction selection: score candidate subsets and pick the final
predicate set by beam search under the demo-optimality constraint.

The objective trades segmentation granularity against operator-set
complexity: value = sum of abstract-trajectory lengths minus
alpha * number of induced operators.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

from .errors import BudgetExhausted, NoFeasibleAbstraction
from .operators import induce_operators, transitions_from_abstract
from .planner import make_problem, shortest_plan
from .truth import TruthTables

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AbstractionScore:
    segmentation_sum: int
    n_operators: int
    alpha: float

    @property
    def value(self):
        return self.segmentation_sum - self.alpha * self.n_operators


@dataclass
class BeamConfig:
    beam_width: int = 8
    alpha: float = 2.0
    planner_node_budget: int = 200_000
    constraint_timeout: float = 30.0  # seconds per demo check

    def __post_init__(self):
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")


class Scorer:
    """Memoized subset scoring backed by precomputed truth tables."""

    def __init__(self, demos, candidates, alpha):
        self.demos = demos
        self.candidates = list(candidates)
        self.alpha = alpha
        self.tables = TruthTables(demos, candidates)
        self._cache = {}
        self._op_cache = {}

    def _key(self, pred_ids):
        return tuple(sorted(pred_ids))

    def operators(self, pred_ids):
        key = self._key(pred_ids)
        if key not in self._op_cache:
            preds = [self.tables.by_id[i] for i in key]
            transitions = []
            for ti, table in enumerate(self.tables.tables):
                abs_traj = table.abstract_trajectory(key)
                transitions.extend(transitions_from_abstract(
                    abs_traj, preds, table.obj_types, ti))
            self._op_cache[key] = induce_operators(
                self.demos, preds, transitions=transitions)
        return self._op_cache[key]

    def score(self, pred_ids):
        key = self._key(pred_ids)
        if key not in self._cache:
            seg = 0
            groups = set()
            for table in self.tables.tables:
                seg += table.segment_count(key)
                groups |= table.effect_groups(key)
            self._cache[key] = AbstractionScore(seg, len(groups), self.alpha)
        return self._cache[key]


def score(preds, demos, alpha, scorer=None):
    """Exact objective evaluation for a predicate subset."""
    if scorer is None:
        scorer = Scorer(demos, preds, alpha)
    return scorer.score([p.id for p in preds])


def check_constraint(pred_ids, ops, scorer, budget=200_000, timeout=None):
    """True iff for every demo the shortest abstract plan to its final
    abstract state uses exactly (segments - 1) operators."""
    for table in scorer.tables.tables:
        abs_traj = table.abstract_trajectory(sorted(pred_ids))
        prob = make_problem(table.obj_types, abs_traj[0],
                            abs_traj[-1].trues, ops)
        deadline = (time.monotonic() + timeout if timeout is not None
                    else None)
        try:
            plan = shortest_plan(prob, budget, deadline=deadline)
        except BudgetExhausted:
            log.warning("constraint check: planner budget or time exhausted")
            return False
        if plan is None or plan.cost != len(abs_traj) - 1:
            return False
    return True


def beam_search(candidates, demos, cfg=None):
    """Select the abstraction: iterative beam widening over candidate
    subsets, then the best final-beam member passing the constraint."""
    cfg = cfg or BeamConfig()
    if not candidates:
        raise NoFeasibleAbstraction("empty candidate list")
    scorer = Scorer(demos, candidates, cfg.alpha)
    all_ids = [p.id for p in candidates]

    def order_key(ids):
        s = scorer.score(ids)
        return (-s.value, len(ids), tuple(sorted(ids)))

    beam = [frozenset()]
    best_value = scorer.score(beam[0]).value
    history = [{"iteration": 0,
                "beam": [_beam_entry(scorer, m) for m in beam]}]
    iteration = 0
    while True:
        iteration += 1
        expansions = set()
        for member in beam:
            for pid in all_ids:
                if pid not in member:
                    expansions.add(member | {pid})
        if not expansions:
            break
        ranked = sorted(expansions, key=order_key)[:cfg.beam_width]
        top_value = scorer.score(ranked[0]).value
        if top_value <= best_value:
            break
        beam = ranked
        best_value = top_value
        history.append({"iteration": iteration,
                        "beam": [_beam_entry(scorer, m) for m in beam]})

    constraint_results = []
    for member in sorted(beam, key=order_key):
        ops = scorer.operators(member)
        ok = check_constraint(member, ops, scorer,
                              budget=cfg.planner_node_budget,
                              timeout=cfg.constraint_timeout)
        constraint_results.append(
            {"predicates": sorted(member), "passed": bool(ok)})
        if ok:
            preds = [scorer.tables.by_id[i] for i in sorted(member)]
            report = {"iterations": history,
                      "constraint_results": constraint_results,
                      "selected": sorted(member),
                      "n_operators": len(ops)}
            return preds, ops, report
    raise NoFeasibleAbstraction(
        "no final-beam member satisfies the demo-optimality constraint")


def _beam_entry(scorer, member):
    s = scorer.score(member)
    return {"predicates": sorted(member),
            "segmentation_sum": s.segmentation_sum,
            "n_operators": s.n_operators,
            "value": s.value}
