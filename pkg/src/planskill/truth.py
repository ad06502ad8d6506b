"""Precomputed grounded-predicate truth tables over demo trajectories.

Beam search re-scores many candidate subsets; evaluating predicates
state-by-state each time is wasteful. Here every candidate's truth
value is computed once per (trajectory, grounding, state) and subsets
are scored by slicing boolean columns.
"""

from __future__ import annotations

import numpy as np

from .predicates import AbstractState, GroundedPredicate
from .worldmodel import FeatureKind, batch_distance


def _series(traj, oid, fname):
    return np.array([s.get(oid, fname) for s in traj.states])


def _rel_series(kind, a, b):
    if kind is FeatureKind.ORIENTATION:
        w1, x1, y1, z1 = a.T
        w2, x2, y2, z2 = b[:, 0], -b[:, 1], -b[:, 2], -b[:, 3]
        q = np.stack([
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ], axis=1)
        q /= np.linalg.norm(q, axis=1, keepdims=True)
        q[q[:, 0] < 0] *= -1
        return q
    return a - b


class TrajTable:
    """Boolean truth columns for all candidate groundings of one trajectory."""

    def __init__(self, traj, candidates):
        self.n_states = len(traj.states)
        self.obj_types = {oid: o.type.name
                          for oid, o in traj.states[0].objects.items()}
        series = {}

        def get_series(oid, fname):
            if (oid, fname) not in series:
                series[(oid, fname)] = _series(traj, oid, fname)
            return series[(oid, fname)]

        cols = []
        atoms = []
        self.slices = {}
        state0 = traj.states[0]
        for pred in candidates:
            start = len(atoms)
            if pred.arity == 1:
                tuples = [(o,) for o in state0.by_type(pred.params[0])]
            else:
                o1s = state0.by_type(pred.params[0])
                o2s = state0.by_type(pred.params[1])
                tuples = [(a, b) for a in o1s for b in o2s if a != b]
            for args in tuples:
                if pred.arity == 1:
                    vals = get_series(args[0], pred.feature)
                else:
                    vals = _rel_series(pred.kind,
                                       get_series(args[0], pred.feature),
                                       get_series(args[1], pred.feature))
                dists = batch_distance(pred.kind, vals, pred.cluster_points)
                cols.append(dists.min(axis=1) <= pred.epsilon)
                atoms.append(GroundedPredicate(pred.id, args))
            self.slices[pred.id] = (start, len(atoms))
        self.columns = (np.stack(cols, axis=1) if cols
                        else np.zeros((self.n_states, 0), dtype=bool))
        self.atoms = atoms

    def _col_idx(self, pred_ids):
        idx = []
        for pid in sorted(pred_ids):
            start, stop = self.slices[pid]
            idx.extend(range(start, stop))
        return np.array(idx, dtype=int)

    def boundaries(self, pred_ids):
        """State indices starting a new abstract segment (always 0 first)."""
        idx = self._col_idx(pred_ids)
        sub = self.columns[:, idx]
        if sub.shape[1] == 0:
            return [0]
        change = np.any(sub[1:] != sub[:-1], axis=1)
        return [0] + list(np.flatnonzero(change) + 1)

    def segment_count(self, pred_ids):
        return len(self.boundaries(pred_ids))

    def abstract_at(self, pred_ids, t):
        idx = self._col_idx(pred_ids)
        row = self.columns[t, idx]
        trues = frozenset(self.atoms[idx[i]] for i in np.flatnonzero(row))
        return AbstractState(trues)

    def abstract_trajectory(self, pred_ids):
        return [self.abstract_at(pred_ids, t)
                for t in self.boundaries(pred_ids)]

    def effect_groups(self, pred_ids):
        """Canonical lifted effect keys of this trajectory's transitions.

        Much cheaper than full operator induction; the number of
        distinct keys over all demos equals the operator count.
        """
        from .operators import lift_effects

        idx = self._col_idx(pred_ids)
        sub = self.columns[:, idx]
        bounds = self.boundaries(pred_ids)
        keys = set()
        for bi in range(len(bounds) - 1):
            row_a, row_b = sub[bounds[bi]], sub[bounds[bi + 1]]
            plus = [self.atoms[idx[i]] for i in np.flatnonzero(row_b & ~row_a)]
            minus = [self.atoms[idx[i]] for i in np.flatnonzero(row_a & ~row_b)]
            key, _ = lift_effects(plus, minus, self.obj_types)
            keys.add(key)
        return keys


class TruthTables:
    def __init__(self, demos, candidates):
        self.candidates = list(candidates)
        self.by_id = {p.id: p for p in self.candidates}
        self.tables = [TrajTable(t, self.candidates)
                       for t in demos.trajectories]

    def segmentation_sum(self, pred_ids):
        return sum(t.segment_count(pred_ids) for t in self.tables)

    def abstract_trajectories(self, pred_ids):
        return [t.abstract_trajectory(pred_ids) for t in self.tables]
