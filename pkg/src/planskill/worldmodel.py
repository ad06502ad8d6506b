"""Object-centric state/action/trajectory types and feature arithmetic.

States are keyed by object id; every object carries the feature vectors
declared by its type schema. All values are immutable after construction
and safe to share across threads.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, SchemaError

QUAT_NORM_TOL = 1e-6
EEF_TYPE = "eef"


class FeatureKind(enum.Enum):
    POSITION3 = "Position3"
    ORIENTATION = "Orientation"
    SCALAR = "Scalar"

    @property
    def dim(self):
        return {FeatureKind.POSITION3: 3,
                FeatureKind.ORIENTATION: 4,
                FeatureKind.SCALAR: 1}[self]


@dataclass(frozen=True)
class FeatureSchema:
    name: str
    kind: FeatureKind

    @property
    def dim(self):
        return self.kind.dim


@dataclass(frozen=True)
class ObjectType:
    name: str
    features: tuple[FeatureSchema, ...]

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate feature names in type '{self.name}'")

    def feature(self, name):
        for f in self.features:
            if f.name == name:
                return f
        raise SchemaError(f"type '{self.name}' has no feature '{name}'")


@dataclass(frozen=True)
class ObjectState:
    object_id: str
    type: ObjectType
    values: dict  # feature name -> np.ndarray (read-only)

    def __post_init__(self):
        for schema in self.type.features:
            if schema.name not in self.values:
                raise SchemaError(
                    f"object '{self.object_id}' missing feature '{schema.name}'")
            vec = np.asarray(self.values[schema.name], dtype=float)
            if vec.shape != (schema.dim,):
                raise SchemaError(
                    f"feature '{schema.name}' of '{self.object_id}' has dim "
                    f"{vec.shape}, expected ({schema.dim},)")
            if schema.kind is FeatureKind.ORIENTATION:
                if abs(np.linalg.norm(vec) - 1.0) > QUAT_NORM_TOL:
                    raise SchemaError(
                        f"feature '{schema.name}' of '{self.object_id}' is not "
                        f"a unit quaternion")
            vec.flags.writeable = False
            self.values[schema.name] = vec
        extra = set(self.values) - {f.name for f in self.type.features}
        if extra:
            raise SchemaError(
                f"object '{self.object_id}' has unknown features {sorted(extra)}")

    def get(self, feature_name):
        return self.values[feature_name]


@dataclass(frozen=True)
class EnvState:
    objects: dict  # object_id -> ObjectState, insertion order significant
    timestamp: int = 0

    def get(self, object_id, feature_name):
        return self.objects[object_id].get(feature_name)

    def object_ids(self):
        return tuple(self.objects)

    def by_type(self, type_name):
        return [oid for oid, obj in self.objects.items()
                if obj.type.name == type_name]


@dataclass(frozen=True)
class Action:
    delta_position: np.ndarray  # 3-vector, meters per step
    gripper: float  # 0 = open, 1 = close

    def __post_init__(self):
        vec = np.asarray(self.delta_position, dtype=float)
        if vec.shape != (3,):
            raise DimensionMismatch("delta_position must be a 3-vector")
        vec.flags.writeable = False
        object.__setattr__(self, "delta_position", vec)
        object.__setattr__(self, "gripper", float(self.gripper))


@dataclass(frozen=True)
class Trajectory:
    states: tuple  # EnvState, length N+1
    actions: tuple  # Action, length N
    task_id: str

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "actions", tuple(self.actions))
        if len(self.states) != len(self.actions) + 1:
            raise SchemaError(
                f"trajectory '{self.task_id}': {len(self.states)} states vs "
                f"{len(self.actions)} actions")
        ids = self.states[0].object_ids()
        for s in self.states[1:]:
            if s.object_ids() != ids:
                raise SchemaError(
                    f"trajectory '{self.task_id}': object set changes mid-run")

    def __len__(self):
        return len(self.actions)


@dataclass(frozen=True)
class DemoSet:
    type_registry: tuple  # ObjectType
    trajectories: tuple  # Trajectory

    def __post_init__(self):
        object.__setattr__(self, "type_registry", tuple(self.type_registry))
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        names = [t.name for t in self.type_registry]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate type names in registry")
        known = set(names)
        for traj in self.trajectories:
            for obj in traj.states[0].objects.values():
                if obj.type.name not in known:
                    raise SchemaError(
                        f"trajectory '{traj.task_id}' uses unregistered type "
                        f"'{obj.type.name}'")

    def type_named(self, name):
        for t in self.type_registry:
            if t.name == name:
                return t
        raise SchemaError(f"unknown type '{name}'")


@dataclass(frozen=True)
class TaskSpec:
    env_name: str
    initial_state: EnvState
    goal_samples: tuple  # non-empty EnvState list
    goal_checker_id: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "goal_samples", tuple(self.goal_samples))
        if not self.goal_samples:
            raise SchemaError("goal_samples must be non-empty")
        ids = set(self.initial_state.object_ids())
        for g in self.goal_samples:
            if set(g.object_ids()) != ids:
                raise SchemaError("goal sample object set differs from initial")


def _check_dim(kind, *vecs):
    out = []
    for v in vecs:
        arr = np.asarray(v, dtype=float).reshape(-1)
        if arr.shape != (kind.dim,):
            raise DimensionMismatch(
                f"{kind.value} expects dim {kind.dim}, got {arr.shape[0]}")
        out.append(arr)
    return out


def quat_multiply(a, b):
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def relative_feature(kind, a, b):
    """Difference of feature b from feature a.

    Position3/Scalar: a - b. Orientation: a * b^-1, renormalized and
    canonicalized to w >= 0 so the result is single-valued.
    """
    a, b = _check_dim(kind, a, b)
    if kind is FeatureKind.ORIENTATION:
        q = quat_multiply(a, quat_conjugate(b))
        q = q / np.linalg.norm(q)
        if q[0] < 0:
            q = -q
        return q
    return a - b


def feature_distance(kind, u, v):
    """Pseudometric between two values of the same feature kind."""
    u, v = _check_dim(kind, u, v)
    if kind is FeatureKind.ORIENTATION:
        dot = abs(float(np.dot(u, v)))
        return 2.0 * math.acos(min(dot, 1.0))
    return float(np.linalg.norm(u - v))


def batch_distance(kind, queries, points):
    """Distance matrix (n_queries, n_points) under feature_distance."""
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if kind is FeatureKind.ORIENTATION:
        dots = np.clip(np.abs(queries @ points.T), 0.0, 1.0)
        return 2.0 * np.arccos(dots)
    diff = queries[:, None, :] - points[None, :, :]
    return np.linalg.norm(diff, axis=2)
