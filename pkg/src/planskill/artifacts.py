"""Persisted learning artifacts.

Three fixed files under the output directory:

- ``artifacts.json``: symbolic state — type registry, predicates (with
  cluster points), operators, demo abstract plans, and the run manifest.
- ``skills.bin``: skill bundle — a 4-byte magic, an 8-byte little-endian
  manifest length, a JSON manifest, then the flat float64 little-endian
  arrays (controller weights, normalization stats, KDE points).
- ``domain.pddl``: the emitted STRIPS domain text.

Save followed by load reproduces the artifacts exactly: all floats are
written in full 64-bit precision.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError
from .kde import Sampler
from .mlp import Controller, Normalization
from .operators import Operator
from .pddl import emit_pddl
from .predicates import GroundedPredicate, Predicate
from .skills import Skill, build_transform
from .worldmodel import FeatureKind, FeatureSchema, ObjectType

ARTIFACTS_FILE = "artifacts.json"
SKILLS_FILE = "skills.bin"
DOMAIN_FILE = "domain.pddl"
SKILLS_MAGIC = b"SKB1"
FORMAT_VERSION = 1


@dataclass
class LearnedArtifacts:
    """Everything needed to plan and act after learning."""
    env_name: str
    type_registry: tuple  # ObjectType
    predicates: list  # Predicate
    operators: list  # Operator
    skills: dict  # operator name -> Skill
    demo_plans: list  # tuple of operator schema names per demo
    domain_pddl: str = ""
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.domain_pddl:
            self.domain_pddl = emit_pddl(self.predicates, self.operators)


def _atom_json(atom):
    return [atom.predicate_id, list(atom.args)]


def _atom_from(doc):
    return GroundedPredicate(doc[0], tuple(doc[1]))


def _predicate_json(p):
    return {"id": p.id, "name": p.name, "params": list(p.params),
            "feature": p.feature, "kind": p.kind.value,
            "epsilon": p.epsilon,
            "cluster_points": [[float(x) for x in row]
                               for row in np.atleast_2d(p.cluster_points)]}


def _predicate_from(doc):
    return Predicate(doc["id"], doc["name"], tuple(doc["params"]),
                     doc["feature"], FeatureKind(doc["kind"]),
                     np.array(doc["cluster_points"], dtype=float),
                     float(doc["epsilon"]))


def _operator_json(op):
    return {"name": op.name,
            "params": [[v, t] for v, t in op.params],
            "pre_plus": sorted(map(_atom_json, op.pre_plus)),
            "pre_minus": sorted(map(_atom_json, op.pre_minus)),
            "eff_plus": sorted(map(_atom_json, op.eff_plus)),
            "eff_minus": sorted(map(_atom_json, op.eff_minus)),
            "skill_id": op.skill_id}


def _operator_from(doc):
    return Operator(doc["name"],
                    tuple((v, t) for v, t in doc["params"]),
                    frozenset(map(_atom_from, doc["pre_plus"])),
                    frozenset(map(_atom_from, doc["pre_minus"])),
                    frozenset(map(_atom_from, doc["eff_plus"])),
                    frozenset(map(_atom_from, doc["eff_minus"])),
                    doc.get("skill_id"))


def _registry_json(types):
    return [{"name": t.name,
             "features": [{"name": f.name, "kind": f.kind.value}
                          for f in t.features]}
            for t in types]


def _registry_from(doc):
    return tuple(
        ObjectType(t["name"],
                   tuple(FeatureSchema(f["name"], FeatureKind(f["kind"]))
                         for f in t["features"]))
        for t in doc)


class _ArrayWriter:
    """Accumulates named float64 arrays for the skill bundle."""

    def __init__(self):
        self.entries = []
        self.blobs = []
        self.offset = 0  # in float64 elements

    def add(self, name, array):
        arr = np.ascontiguousarray(np.asarray(array, dtype="<f8"))
        self.entries.append({"name": name, "shape": list(arr.shape),
                             "offset": self.offset})
        self.blobs.append(arr.tobytes())
        self.offset += arr.size
        return name


def save_skills(skills, path):
    """Write the skill bundle: controllers and subgoal samplers."""
    writer = _ArrayWriter()
    entries = []
    for name in sorted(skills):
        sk = skills[name]
        c = sk.controller
        prefix = f"skill/{name}"
        arrays = {
            "x_mean": writer.add(f"{prefix}/x_mean", c.x_norm.mean),
            "x_std": writer.add(f"{prefix}/x_std", c.x_norm.std),
            "y_mean": writer.add(f"{prefix}/y_mean", c.y_norm.mean),
            "y_std": writer.add(f"{prefix}/y_std", c.y_norm.std),
            "kde_points": writer.add(f"{prefix}/kde_points",
                                     sk.sampler.points),
            "weights": [writer.add(f"{prefix}/w{i}", w)
                        for i, w in enumerate(c.weights)],
            "biases": [writer.add(f"{prefix}/b{i}", b)
                       for i, b in enumerate(c.biases)],
        }
        entries.append({"operator": name,
                        "layer_sizes": list(c.layer_sizes),
                        "bandwidth": sk.sampler.bandwidth,
                        "arrays": arrays})
    manifest = json.dumps({"version": FORMAT_VERSION, "skills": entries,
                           "arrays": writer.entries,
                           "n_floats": writer.offset},
                          sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(SKILLS_MAGIC)
        fh.write(struct.pack("<Q", len(manifest)))
        fh.write(manifest)
        for blob in writer.blobs:
            fh.write(blob)


def load_skills(path, operators, predicates):
    """Rebuild Skill objects; transforms are rederived from operators."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != SKILLS_MAGIC:
        raise ParseError(f"'{path}' is not a skill bundle")
    (mlen,) = struct.unpack("<Q", data[4:12])
    manifest = json.loads(data[12:12 + mlen].decode("utf-8"))
    if manifest.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported skill bundle version "
                         f"{manifest.get('version')}")
    floats = np.frombuffer(data[12 + mlen:], dtype="<f8")
    if floats.size != manifest["n_floats"]:
        raise ParseError(f"skill bundle truncated: expected "
                         f"{manifest['n_floats']} floats, got {floats.size}")
    index = {e["name"]: (e["offset"], tuple(e["shape"]))
             for e in manifest["arrays"]}

    def fetch(name):
        start, shape = index[name]
        size = int(np.prod(shape)) if shape else 1
        return floats[start:start + size].reshape(shape).copy()

    ops_by_name = {op.name: op for op in operators}
    skills = {}
    for entry in manifest["skills"]:
        name = entry["operator"]
        if name not in ops_by_name:
            raise ParseError(f"skill bundle names unknown operator '{name}'")
        a = entry["arrays"]
        controller = Controller(
            list(entry["layer_sizes"]),
            [fetch(n) for n in a["weights"]],
            [fetch(n) for n in a["biases"]],
            Normalization(fetch(a["x_mean"]), fetch(a["x_std"])),
            Normalization(fetch(a["y_mean"]), fetch(a["y_std"])))
        sampler = Sampler(fetch(a["kde_points"]), float(entry["bandwidth"]))
        transform = build_transform(ops_by_name[name], predicates)
        skills[name] = Skill(name, transform, controller, sampler)
    return skills


def save_artifacts(art, out_dir):
    """Persist artifacts.json, skills.bin, and domain.pddl under out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    doc = {"version": FORMAT_VERSION,
           "env": art.env_name,
           "manifest": art.manifest,
           "type_registry": _registry_json(art.type_registry),
           "predicates": [_predicate_json(p) for p in art.predicates],
           "operators": [_operator_json(op) for op in art.operators],
           "demo_plans": [list(p) for p in art.demo_plans]}
    with open(os.path.join(out_dir, ARTIFACTS_FILE), "w",
              encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, DOMAIN_FILE), "w",
              encoding="utf-8") as fh:
        fh.write(art.domain_pddl)
    save_skills(art.skills, os.path.join(out_dir, SKILLS_FILE))


def load_artifacts(out_dir):
    path = os.path.join(out_dir, ARTIFACTS_FILE)
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported artifacts version {doc.get('version')}")
    predicates = [_predicate_from(p) for p in doc["predicates"]]
    operators = [_operator_from(op) for op in doc["operators"]]
    with open(os.path.join(out_dir, DOMAIN_FILE), "r",
              encoding="utf-8") as fh:
        domain_pddl = fh.read()
    skills = load_skills(os.path.join(out_dir, SKILLS_FILE),
                         operators, predicates)
    return LearnedArtifacts(doc["env"], _registry_from(doc["type_registry"]),
                            predicates, operators, skills,
                            [tuple(p) for p in doc["demo_plans"]],
                            domain_pddl, doc.get("manifest", {}))


def dump_predicates(art, out_dir):
    """Per-predicate CSV (cluster points + epsilon) and a JSON index."""
    pred_dir = os.path.join(out_dir, "predicates")
    os.makedirs(pred_dir, exist_ok=True)
    entries = []
    for p in art.predicates:
        fname = f"{p.name}.csv"
        dims = p.cluster_points.shape[1]
        header = ",".join(f"x{i}" for i in range(dims)) + ",epsilon"
        with open(os.path.join(pred_dir, fname), "w",
                  encoding="utf-8") as fh:
            fh.write(header + "\n")
            for row in p.cluster_points:
                vals = ",".join(f"{float(x):.17g}" for x in row)
                fh.write(f"{vals},{p.epsilon:.17g}\n")
        entries.append({"id": p.id, "name": p.name, "params": list(p.params),
                        "feature": p.feature, "kind": p.kind.value,
                        "epsilon": p.epsilon, "file": fname,
                        "n_points": int(len(p.cluster_points))})
    with open(os.path.join(pred_dir, "index.json"), "w",
              encoding="utf-8") as fh:
        json.dump(entries, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return pred_dir
