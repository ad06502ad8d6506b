"""Candidate predicate generation and state abstraction.

Candidates come from clustering relative (binary) and absolute (unary)
feature values that are stationary across consecutive demo states. Each
surviving cluster becomes one predicate; a grounded predicate is true
when the observed feature value lies within epsilon of the cluster.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import TypeMismatch
from .worldmodel import (EEF_TYPE, FeatureKind, batch_distance,
                         feature_distance, relative_feature)

DEFAULT_EPSILONS = {
    FeatureKind.POSITION3: 0.04,
    FeatureKind.ORIENTATION: 0.2,
    FeatureKind.SCALAR: 0.1,
}
DEFAULT_STATIONARITY_TOL = 1e-4


@dataclass
class CandidateConfig:
    epsilons: dict = field(default_factory=lambda: dict(DEFAULT_EPSILONS))
    stationarity_tol: float = DEFAULT_STATIONARITY_TOL
    max_dataset_points: int = 4000
    max_cluster_points: int = 512
    min_cluster_frac: float = 0.005  # min cluster size = max(3, frac * n)


@dataclass(frozen=True)
class Predicate:
    id: int
    name: str
    params: tuple  # 1 or 2 ObjectType names
    feature: str
    kind: FeatureKind
    cluster_points: np.ndarray  # (k, dim), read-only
    epsilon: float

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.cluster_points, dtype=float))
        pts.flags.writeable = False
        object.__setattr__(self, "cluster_points", pts)
        object.__setattr__(self, "params", tuple(self.params))
        if len(self.params) not in (1, 2):
            raise TypeMismatch(f"predicate '{self.name}': arity must be 1 or 2")

    @property
    def arity(self):
        return len(self.params)


@dataclass(frozen=True, order=True)
class GroundedPredicate:
    predicate_id: int
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class AbstractState:
    trues: frozenset  # of GroundedPredicate

    def __post_init__(self):
        object.__setattr__(self, "trues", frozenset(self.trues))

    def sorted_atoms(self):
        return sorted(self.trues)

    def __contains__(self, atom):
        return atom in self.trues

    def __len__(self):
        return len(self.trues)

    def __eq__(self, other):
        return isinstance(other, AbstractState) and self.trues == other.trues

    def __hash__(self):
        return hash(self.trues)


@dataclass
class RelFeatureDataset:
    key: tuple  # (type1, type2 or None, feature name)
    kind: FeatureKind
    points: np.ndarray  # (n, dim)


def _feature_value(pred_or_key, state, args):
    """Relative value for binary keys, absolute for unary."""
    feature, kind = pred_or_key
    if len(args) == 2:
        return relative_feature(kind, state.get(args[0], feature),
                                state.get(args[1], feature))
    return np.asarray(state.get(args[0], feature), dtype=float)


def _shared_features(t1, t2):
    feats2 = {f.name: f.kind for f in t2.features}
    return [(f.name, f.kind) for f in t1.features
            if feats2.get(f.name) == f.kind]


def _pairs(state, type1, type2):
    o1s = state.by_type(type1)
    o2s = state.by_type(type2)
    return [(a, b) for a in o1s for b in o2s if a != b]


def build_feature_datasets(demos, config=None):
    """Collect stationary relative/absolute feature values per type pair.

    A value at state t is kept iff it is (nearly) unchanged at t+1; the
    final state of each trajectory is kept unconditionally. eef-eef pairs
    are skipped. Empty datasets are dropped.
    """
    config = config or CandidateConfig()
    tol = config.stationarity_tol
    type_names = [t.name for t in demos.type_registry]
    by_name = {t.name: t for t in demos.type_registry}

    keys = []
    for t1, t2 in itertools.product(type_names, repeat=2):
        if t1 == EEF_TYPE and t2 == EEF_TYPE:
            continue
        for fname, kind in _shared_features(by_name[t1], by_name[t2]):
            keys.append((t1, t2, fname, kind))
    for t1 in type_names:
        for f in by_name[t1].features:
            keys.append((t1, None, f.name, f.kind))

    buckets = {k: [] for k in keys}
    for traj in demos.trajectories:
        states = traj.states
        n = len(states)
        s0 = states[0]
        # per-object time series, shared across all pairs in this demo
        series = {}

        def _series(oid, fname):
            if (oid, fname) not in series:
                series[(oid, fname)] = np.array(
                    [np.asarray(s.get(oid, fname), dtype=float)
                     for s in states])
            return series[(oid, fname)]

        for (t1, t2, fname, kind) in keys:
            if t2 is None:
                tuples = [(o,) for o in s0.by_type(t1)]
            else:
                tuples = _pairs(s0, t1, t2)
            if not tuples:
                continue
            out = buckets[(t1, t2, fname, kind)]
            for args in tuples:
                if kind is FeatureKind.ORIENTATION:
                    vals = np.array([_feature_value((fname, kind), s, args)
                                     for s in states])
                    dists = np.array(
                        [feature_distance(kind, vals[i], vals[i + 1])
                         for i in range(n - 1)])
                else:
                    vals = _series(args[0], fname)
                    if len(args) == 2:
                        vals = vals - _series(args[1], fname)
                    dists = np.linalg.norm(
                        np.diff(vals.reshape(n, -1), axis=0), axis=1)
                keep = (np.concatenate([dists <= tol, [True]])
                        if n > 1 else np.ones(n, dtype=bool))
                out.extend(vals[keep])

    datasets = []
    for (t1, t2, fname, kind) in keys:
        pts = buckets[(t1, t2, fname, kind)]
        if not pts:
            continue
        pts = np.array(pts)
        if len(pts) > config.max_dataset_points:
            idx = np.linspace(0, len(pts) - 1, config.max_dataset_points)
            pts = pts[np.round(idx).astype(int)]
        datasets.append(RelFeatureDataset((t1, t2, fname), kind, pts))
    return datasets


def agglomerate(points, kind, epsilon, min_cluster_size=1):
    """Single-linkage clustering halted when no two clusters are within
    epsilon; returns clusters as index lists, ordered by smallest member.

    Merging closest pairs until the minimum single-linkage distance
    exceeds epsilon yields exactly the connected components of the
    graph with edges d(i, j) <= epsilon, so the partition is computed
    via union-find (order-independent, hence deterministic).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(points)

    block = 512
    edges_i, edges_j = [], []
    for i0 in range(0, n, block):
        qi = points[i0:i0 + block]
        for j0 in range(i0, n, block):
            dists = batch_distance(kind, qi, points[j0:j0 + block])
            a, b = np.nonzero(dists <= epsilon)
            i, j = a + i0, b + j0
            mask = i < j
            edges_i.append(i[mask])
            edges_j.append(j[mask])
    ei = np.concatenate(edges_i) if edges_i else np.empty(0, dtype=int)
    ej = np.concatenate(edges_j) if edges_j else np.empty(0, dtype=int)

    # connected components by min-label propagation: hook each edge to
    # the smaller endpoint label, then pointer-jump until stable; the
    # fixpoint labels each point with its component's smallest index
    labels = np.arange(n)
    while ei.size:
        before = labels.copy()
        lo = np.minimum(labels[ei], labels[ej])
        np.minimum.at(labels, ei, lo)
        np.minimum.at(labels, ej, lo)
        while True:
            jumped = labels[labels]
            if np.array_equal(jumped, labels):
                break
            labels = jumped
        if np.array_equal(labels, before):
            break

    members = {}
    for i in range(n):
        members.setdefault(int(labels[i]), []).append(i)
    clusters = [members[r] for r in sorted(members)]
    return [c for c in clusters if len(c) >= min_cluster_size]


def farthest_point_subsample(points, kind, k):
    """Greedy farthest-point subset of size k (deterministic, seeded at 0)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(points)
    if n <= k:
        return points
    chosen = [0]
    mind = batch_distance(kind, points, points[0:1])[:, 0]
    for _ in range(k - 1):
        nxt = int(np.argmax(mind))
        chosen.append(nxt)
        d = batch_distance(kind, points, points[nxt:nxt + 1])[:, 0]
        mind = np.minimum(mind, d)
    return points[sorted(chosen)]


def generate_candidates(demos, config=None):
    """One candidate predicate per surviving cluster, deterministic ids."""
    config = config or CandidateConfig()
    datasets = build_feature_datasets(demos, config)
    datasets.sort(key=lambda d: (d.key[0], d.key[1] or "", d.key[2]))
    candidates = []
    next_id = 0
    for ds in datasets:
        eps = config.epsilons[ds.kind]
        min_size = max(3, math.ceil(config.min_cluster_frac * len(ds.points)))
        clusters = agglomerate(ds.points, ds.kind, eps, min_size)
        t1, t2, fname = ds.key
        for k, idxs in enumerate(clusters):
            pts = farthest_point_subsample(ds.points[idxs], ds.kind,
                                           config.max_cluster_points)
            params = (t1,) if t2 is None else (t1, t2)
            name = "_".join([fname, *params, str(k)])
            candidates.append(Predicate(next_id, name, params, fname,
                                        ds.kind, pts, eps))
            next_id += 1
    return candidates


def eval_predicate(pred, state, args):
    """True iff the observed feature value is within epsilon of the cluster."""
    if len(args) != pred.arity:
        raise TypeMismatch(f"predicate '{pred.name}' expects {pred.arity} args")
    for arg, tname in zip(args, pred.params):
        if state.objects[arg].type.name != tname:
            raise TypeMismatch(
                f"'{arg}' is not of type '{tname}' for predicate '{pred.name}'")
    value = _feature_value((pred.feature, pred.kind), state, args)
    dists = batch_distance(pred.kind, value[None, :], pred.cluster_points)
    return float(dists.min()) <= pred.epsilon


def groundings(pred, state):
    """All type-compatible ordered argument tuples of distinct objects."""
    if pred.arity == 1:
        return [(o,) for o in state.by_type(pred.params[0])]
    return _pairs(state, pred.params[0], pred.params[1])


def abstract_state(state, preds):
    trues = set()
    for pred in preds:
        for args in groundings(pred, state):
            if eval_predicate(pred, state, args):
                trues.add(GroundedPredicate(pred.id, args))
    return AbstractState(frozenset(trues))


def abstract_trajectory(traj, preds):
    """Per-state abstraction with consecutive duplicates collapsed."""
    out = []
    for state in traj.states:
        abs_s = abstract_state(state, preds)
        if not out or abs_s != out[-1]:
            out.append(abs_s)
    return out
