"""Demo file I/O.

UTF-8 JSONL: first line holds the type registry, every further line one
trajectory. Floats are written with 17 significant digits so the text
round-trips 64-bit values exactly and `save(load(f))` is canonical.
"""

from __future__ import annotations

import json

from .errors import ParseError, SchemaError
from .worldmodel import (Action, DemoSet, EnvState, FeatureKind,
                         FeatureSchema, ObjectState, ObjectType, Trajectory)


def _ff(x):
    return f"{float(x):.17g}"


def _vec(v):
    return "[" + ",".join(_ff(x) for x in v) + "]"


def _registry_line(types):
    parts = []
    for t in types:
        feats = ",".join(
            f'{{"name":{json.dumps(f.name)},"kind":{json.dumps(f.kind.value)}}}'
            for f in t.features)
        parts.append(f'{{"name":{json.dumps(t.name)},"features":[{feats}]}}')
    return '{"type_registry":[' + ",".join(parts) + "]}"


def _state_json(state):
    objs = []
    for oid, obj in state.objects.items():
        feats = ",".join(f"{json.dumps(name)}:{_vec(obj.values[name])}"
                         for name in (f.name for f in obj.type.features))
        objs.append(f"{json.dumps(oid)}:{{{feats}}}")
    return "{" + ",".join(objs) + "}"


def _traj_line(traj):
    objects = ",".join(
        f"{json.dumps(oid)}:{json.dumps(obj.type.name)}"
        for oid, obj in traj.states[0].objects.items())
    states = ",".join(_state_json(s) for s in traj.states)
    actions = ",".join(
        f'{{"delta_position":{_vec(a.delta_position)},"gripper":{_ff(a.gripper)}}}'
        for a in traj.actions)
    return (f'{{"task_id":{json.dumps(traj.task_id)},'
            f'"objects":{{{objects}}},'
            f'"states":[{states}],"actions":[{actions}]}}')


def save_demos(demos, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_registry_line(demos.type_registry) + "\n")
        for traj in demos.trajectories:
            fh.write(_traj_line(traj) + "\n")


def dumps_demos(demos):
    lines = [_registry_line(demos.type_registry)]
    lines.extend(_traj_line(t) for t in demos.trajectories)
    return "\n".join(lines) + "\n"


def _parse_registry(doc, line_no):
    if not isinstance(doc, dict) or "type_registry" not in doc:
        raise ParseError("first line must carry 'type_registry'", line_no)
    types = []
    for entry in doc["type_registry"]:
        try:
            feats = tuple(FeatureSchema(f["name"], FeatureKind(f["kind"]))
                          for f in entry["features"])
            types.append(ObjectType(entry["name"], feats))
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(f"bad type entry: {exc}", line_no) from exc
    return tuple(types)


def _parse_trajectory(doc, types_by_name, line_no):
    try:
        task_id = doc["task_id"]
        obj_types = doc["objects"]
        raw_states = doc["states"]
        raw_actions = doc["actions"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"missing trajectory field: {exc}", line_no) from exc
    for oid, tname in obj_types.items():
        if tname not in types_by_name:
            raise SchemaError(f"line {line_no}: object '{oid}' has unknown "
                              f"type '{tname}'")
    states = []
    for t, raw in enumerate(raw_states):
        objects = {}
        for oid, feats in raw.items():
            if oid not in obj_types:
                raise SchemaError(f"line {line_no}: state object '{oid}' not "
                                  f"in trajectory object map")
            otype = types_by_name[obj_types[oid]]
            try:
                objects[oid] = ObjectState(oid, otype, dict(feats))
            except SchemaError as exc:
                raise SchemaError(f"line {line_no}: {exc}") from exc
        states.append(EnvState(objects, timestamp=t))
    try:
        actions = [Action(a["delta_position"], a["gripper"])
                   for a in raw_actions]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad action: {exc}", line_no) from exc
    try:
        return Trajectory(tuple(states), tuple(actions), task_id)
    except SchemaError as exc:
        raise SchemaError(f"line {line_no}: {exc}") from exc


def load_demos(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty demo file", 1)
    docs = []
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            docs.append((i, json.loads(line)))
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", i) from exc
    line_no, head = docs[0]
    types = _parse_registry(head, line_no)
    types_by_name = {t.name: t for t in types}
    trajectories = tuple(_parse_trajectory(doc, types_by_name, i)
                         for i, doc in docs[1:])
    return DemoSet(types, trajectories)
