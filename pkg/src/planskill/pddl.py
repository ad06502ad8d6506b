"""STRIPS-subset PDDL emission and parsing.

Emission is deterministic; the parser is a small s-expression
recursive descent that rejects anything outside the supported subset
(typing, negative preconditions, unit-cost actions).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NameCollision, PddlSyntaxError, UnsupportedFeature
from .operators import is_var

SUPPORTED_REQUIREMENTS = {":strips", ":typing", ":negative-preconditions"}


@dataclass(frozen=True)
class DomainSignature:
    """Neutral structural form used for round-trip comparison."""
    name: str
    types: tuple  # sorted type names
    constants: tuple  # sorted (object, type)
    predicates: frozenset  # of (name, (param types...))
    actions: frozenset  # of (name, params, pre+, pre-, eff+, eff-)


def _atom_key(atom, pred_names):
    return (pred_names[atom.predicate_id], tuple(atom.args))


def domain_signature(preds, ops, name="learned"):
    pred_names = {p.id: p.name for p in preds}
    types = set()
    for p in preds:
        types.update(p.params)
    constants = {}
    for op in ops:
        types.update(t for _, t in op.params)
        for atom in op.pre_plus | op.pre_minus | op.eff_plus | op.eff_minus:
            pred = next(p for p in preds if p.id == atom.predicate_id)
            for arg, tname in zip(atom.args, pred.params):
                if not is_var(arg):
                    constants[arg] = tname

    def norm_atoms(atoms):
        return frozenset(_atom_key(a, pred_names) for a in atoms)

    actions = frozenset(
        (op.name, tuple(op.params),
         norm_atoms(op.pre_plus), norm_atoms(op.pre_minus),
         norm_atoms(op.eff_plus), norm_atoms(op.eff_minus))
        for op in ops)
    predicates = frozenset((p.name, tuple(p.params)) for p in preds)
    return DomainSignature(name, tuple(sorted(types)),
                           tuple(sorted(constants.items())),
                           predicates, actions)


def _fmt_atom(name, args):
    return "(" + " ".join([name, *args]) + ")" if args else f"({name})"


def _fmt_condition(plus, minus):
    parts = [_fmt_atom(n, a) for n, a in sorted(plus)]
    parts += [f"(not {_fmt_atom(n, a)})" for n, a in sorted(minus)]
    if not parts:
        return "(and)"
    return "(and " + " ".join(parts) + ")"


def emit_pddl(preds, ops, name="learned"):
    """Domain text for the learned predicates and operators."""
    sig = domain_signature(preds, ops, name)
    pred_decls = sorted((p.name, tuple(p.params)) for p in preds)
    if len({n for n, _ in pred_decls}) != len(pred_decls):
        raise NameCollision("duplicate predicate names")
    if len({op.name for op in ops}) != len(ops):
        raise NameCollision("duplicate operator names")

    lines = [f"(define (domain {name})",
             "  (:requirements :strips :typing :negative-preconditions)"]
    if sig.types:
        lines.append("  (:types " + " ".join(sig.types) + " - object)")
    if sig.constants:
        decls = " ".join(f"{obj} - {t}" for obj, t in sig.constants)
        lines.append(f"  (:constants {decls})")
    decls = []
    for pname, ptypes in pred_decls:
        params = " ".join(f"?x{i} - {t}" for i, t in enumerate(ptypes))
        decls.append(_fmt_atom(pname, params.split()) if params
                     else f"({pname})")
    lines.append("  (:predicates " + " ".join(decls) + ")"
                 if decls else "  (:predicates )")
    pred_names = {p.id: p.name for p in preds}
    for op in sorted(ops, key=lambda o: o.name):
        params = " ".join(f"{v} - {t}" for v, t in op.params)
        pre = _fmt_condition({_atom_key(a, pred_names) for a in op.pre_plus},
                             {_atom_key(a, pred_names) for a in op.pre_minus})
        eff = _fmt_condition({_atom_key(a, pred_names) for a in op.eff_plus},
                             {_atom_key(a, pred_names) for a in op.eff_minus})
        lines.append(f"  (:action {op.name}")
        lines.append(f"    :parameters ({params})")
        lines.append(f"    :precondition {pre}")
        lines.append(f"    :effect {eff})")
    lines.append(")")
    return "\n".join(lines) + "\n"


def emit_problem(prob, preds, domain_name="learned", problem_name="task"):
    pred_names = {p.id: p.name for p in preds}
    lines = [f"(define (problem {problem_name})",
             f"  (:domain {domain_name})"]
    objs = " ".join(f"{o} - {t}" for o, t in sorted(prob.obj_types.items()))
    lines.append(f"  (:objects {objs})")
    init = [_fmt_atom(*_atom_key(a, pred_names))
            for a in sorted(prob.initial.trues)]
    lines.append("  (:init " + " ".join(init) + ")")
    goal = _fmt_condition({_atom_key(a, pred_names) for a in prob.goal_plus},
                          set())
    lines.append(f"  (:goal {goal})")
    lines.append(")")
    return "\n".join(lines) + "\n"


# --- parsing ---------------------------------------------------------------

def _tokenize(text):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in "()":
            tokens.append((c, i))
            i += 1
        elif c.isspace():
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();":
                j += 1
            tokens.append((text[i:j], i))
            i = j
    return tokens


def _parse_sexpr(tokens, pos):
    if pos >= len(tokens):
        raise PddlSyntaxError("unexpected end of input",
                              tokens[-1][1] if tokens else 0)
    tok, offset = tokens[pos]
    if tok == "(":
        items = []
        pos += 1
        while True:
            if pos >= len(tokens):
                raise PddlSyntaxError("unbalanced parenthesis", offset)
            if tokens[pos][0] == ")":
                return items, pos + 1
            item, pos = _parse_sexpr(tokens, pos)
            items.append(item)
    if tok == ")":
        raise PddlSyntaxError("unexpected ')'", offset)
    return tok.lower(), pos + 1


def _parse_typed_list(items, offset=0):
    """[a b - t c - u] -> [(a, t), (b, t), (c, u)]"""
    out = []
    pending = []
    i = 0
    while i < len(items):
        if items[i] == "-":
            if i + 1 >= len(items) or not pending:
                raise PddlSyntaxError("malformed typed list", offset)
            for name in pending:
                out.append((name, items[i + 1]))
            pending = []
            i += 2
        else:
            pending.append(items[i])
            i += 1
    for name in pending:
        out.append((name, "object"))
    return out


def _parse_condition(expr):
    """-> (plus, minus) sets of (name, args)."""
    plus, minus = set(), set()
    if not isinstance(expr, list):
        raise PddlSyntaxError("condition must be a list")
    items = [expr]
    if expr and expr[0] == "and":
        items = expr[1:]
    for item in items:
        if not isinstance(item, list) or not item:
            raise PddlSyntaxError("malformed condition element")
        if item[0] == "not":
            inner = item[1]
            minus.add((inner[0], tuple(inner[1:])))
        elif item[0] in ("or", "imply", "exists", "forall", "when"):
            raise UnsupportedFeature(f"'{item[0]}' is outside the STRIPS subset")
        else:
            plus.add((item[0], tuple(item[1:])))
    return frozenset(plus), frozenset(minus)


def parse_pddl(text):
    """Parse a domain into a DomainSignature."""
    tokens = _tokenize(text)
    expr, pos = _parse_sexpr(tokens, 0)
    if pos != len(tokens):
        raise PddlSyntaxError("trailing tokens after domain", tokens[pos][1])
    if not isinstance(expr, list) or not expr or expr[0] != "define":
        raise PddlSyntaxError("expected (define (domain ...))", 0)
    name = None
    types, constants, predicates, actions = [], [], set(), set()
    for section in expr[1:]:
        if not isinstance(section, list) or not section:
            raise PddlSyntaxError("malformed section")
        head = section[0]
        if head == "domain":
            name = section[1]
        elif head == ":requirements":
            bad = set(section[1:]) - SUPPORTED_REQUIREMENTS
            if bad:
                raise UnsupportedFeature(f"requirements {sorted(bad)}")
        elif head == ":types":
            types = [t for t, parent in _parse_typed_list(section[1:])]
        elif head == ":constants":
            constants = _parse_typed_list(section[1:])
        elif head == ":predicates":
            for decl in section[1:]:
                params = _parse_typed_list(decl[1:])
                predicates.add((decl[0], tuple(t for _, t in params)))
        elif head == ":action":
            actions.add(_parse_action(section))
        elif head in (":functions", ":axioms", ":derived"):
            raise UnsupportedFeature(f"section '{head}'")
        else:
            raise UnsupportedFeature(f"section '{head}'")
    if name is None:
        raise PddlSyntaxError("missing (domain NAME)")
    return DomainSignature(name, tuple(sorted(types)),
                           tuple(sorted(constants)),
                           frozenset(predicates), frozenset(actions))


def _parse_action(section):
    name = section[1]
    fields = {}
    i = 2
    while i < len(section):
        key = section[i]
        fields[key] = section[i + 1]
        i += 2
    params = tuple(_parse_typed_list(fields.get(":parameters", [])))
    pre_plus, pre_minus = _parse_condition(fields.get(":precondition", ["and"]))
    eff_plus, eff_minus = _parse_condition(fields.get(":effect", ["and"]))
    return (name, params, pre_plus, pre_minus, eff_plus, eff_minus)
