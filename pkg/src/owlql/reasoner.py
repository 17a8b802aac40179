"""Entailment between basic concepts and roles, ontology depth and KB consistency.

Everything is answered from a saturated index that is built once per ontology and
cached. Predicates that do not occur in the ontology entail only themselves.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

from .syntax import (
    AtomicConcept,
    ConceptDisj,
    ConceptExpr,
    ConceptIncl,
    DataInstance,
    ExistsRole,
    Ontology,
    Role,
    RoleDisj,
    RoleIncl,
    concept_key,
)


OMEGA = "omega"


def _closure(graph: dict, start) -> frozenset:
    seen = {start}
    todo = [start]
    while todo:
        node = todo.pop()
        for nxt in graph.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return frozenset(seen)


class Index:
    """Saturated entailment index of one ontology. Treat as read-only."""

    def __init__(self, tbox: Ontology):
        self.tbox = tbox
        self.roles = frozenset(
            r for name in sorted(tbox.role_names) for r in (Role(name), Role(name, True))
        )
        role_edges = defaultdict(set)
        for ax in tbox.axioms:
            if isinstance(ax, RoleIncl):
                role_edges[ax.lhs].add(ax.rhs)
                role_edges[ax.lhs.inv].add(ax.rhs.inv)
        self._sup_roles = {r: _closure(role_edges, r) for r in self.roles}
        self._sub_roles = defaultdict(set)
        for r, sups in self._sup_roles.items():
            for s in sups:
                self._sub_roles[s].add(r)

        self.basic_concepts = frozenset(
            [AtomicConcept(n) for n in tbox.concept_names] + [ExistsRole(r) for r in self.roles]
        )
        concept_edges = defaultdict(set)
        for ax in tbox.axioms:
            if isinstance(ax, ConceptIncl):
                concept_edges[ax.lhs].add(ax.rhs)
        for r, sups in self._sup_roles.items():
            for s in sups:
                if s != r:
                    concept_edges[ExistsRole(r)].add(ExistsRole(s))
        self._sup_concepts = {c: _closure(concept_edges, c) for c in self.basic_concepts}
        self._sub_concepts = defaultdict(set)
        for c, sups in self._sup_concepts.items():
            for s in sups:
                self._sub_concepts[s].add(c)

        self.concept_disj = []
        self.role_disj = []
        for ax in tbox.axioms:
            if isinstance(ax, ConceptDisj):
                self.concept_disj.append((ax.first, ax.second))
            elif isinstance(ax, RoleDisj):
                self.role_disj.append((ax.first, ax.second))
                self.role_disj.append((ax.first.inv, ax.second.inv))
        self._compute_unsat()
        self._compute_generating()

    # entailment

    def sup_roles(self, r: Role) -> frozenset:
        return self._sup_roles.get(r) or frozenset((r,))

    def sub_roles(self, r: Role) -> frozenset:
        return frozenset(self._sub_roles.get(r) or (r,))

    def sup_concepts(self, c: ConceptExpr) -> frozenset:
        return self._sup_concepts.get(c) or frozenset((c,))

    def sub_concepts(self, c: ConceptExpr) -> frozenset:
        return frozenset(self._sub_concepts.get(c) or (c,))

    def entails_role(self, r1: Role, r2: Role) -> bool:
        return r2 in self.sup_roles(r1)

    def entails_concept(self, c1: ConceptExpr, c2: ConceptExpr) -> bool:
        return c2 in self.sup_concepts(c1)

    def closure(self, concepts: Iterable[ConceptExpr]) -> frozenset:
        out = set()
        for c in concepts:
            out |= self.sup_concepts(c)
        return frozenset(out)

    def role_closure(self, roles: Iterable[Role]) -> frozenset:
        out = set()
        for r in roles:
            out |= self.sup_roles(r)
        return frozenset(out)

    # satisfiability

    def _compute_unsat(self):
        unsat_c: set = set()
        unsat_r: set = set()
        changed = True
        while changed:
            changed = False
            for r in self.roles:
                if r in unsat_r:
                    continue
                if (
                    self.roles_clash(self.sup_roles(r))
                    or ExistsRole(r) in unsat_c
                    or ExistsRole(r.inv) in unsat_c
                ):
                    unsat_r.add(r)
                    changed = True
            for c in self.basic_concepts:
                if c in unsat_c:
                    continue
                sups = self.sup_concepts(c)
                if self._concepts_clash(sups) or any(
                    isinstance(s, ExistsRole) and s.role in unsat_r for s in sups
                ):
                    unsat_c.add(c)
                    changed = True
        self.unsat_concepts = frozenset(unsat_c)
        self.unsat_roles = frozenset(unsat_r)

    def _concepts_clash(self, concepts: frozenset) -> bool:
        return any(a in concepts and b in concepts for a, b in self.concept_disj)

    def roles_clash(self, roles: frozenset) -> bool:
        return any(a in roles and b in roles for a, b in self.role_disj)

    def type_consistent(self, concepts: frozenset) -> bool:
        """Is a saturated concept set (the type of one element) satisfiable?"""
        return not self._concepts_clash(concepts) and not (concepts & self.unsat_concepts)

    def role_satisfiable(self, r: Role) -> bool:
        return r not in self.unsat_roles

    # generating structure of the canonical model

    def _compute_generating(self):
        succ = {}
        for r in self.roles:
            if r in self.unsat_roles:
                continue
            sups = self.sup_concepts(ExistsRole(r.inv))
            succ[r] = self.most_specific(
                s
                for s in self.roles
                if s not in self.unsat_roles
                and ExistsRole(s) in sups
                and not self.entails_role(r.inv, s)
            )
        self.generating_successors = succ

        starts = set()
        for c in self.basic_concepts:
            if c in self.unsat_concepts:
                continue
            witnessed = self.sup_roles(c.role) if isinstance(c, ExistsRole) else frozenset()
            starts.update(self.generated_at(self.sup_concepts(c), witnessed))
        self.startable_roles = frozenset(starts)
        reach = set(starts)
        todo = list(starts)
        while todo:
            for s in self.successors(todo.pop()):
                if s not in reach:
                    reach.add(s)
                    todo.append(s)
        self.generatable_roles = frozenset(reach)

    def most_specific(self, roles: Iterable[Role]) -> tuple:
        """Drop every role strictly entailed by another role of the collection."""
        roles = set(roles)
        keep = [
            r
            for r in roles
            if not any(s != r and self.entails_role(s, r) and not self.entails_role(r, s) for s in roles)
        ]
        return tuple(sorted(keep))

    def successors(self, r: Role) -> tuple:
        """Roles that an element reached by ``r`` generates in the canonical model."""
        return self.generating_successors.get(r, ())

    def generated_at(self, concepts: frozenset, witnessed: frozenset) -> tuple:
        """Roles generated at an individual with saturated type ``concepts``.

        ``witnessed`` is the set of roles already realised by data edges. Only the
        most specific roles are kept: a child for ``P`` already serves every role
        that ``P`` entails.
        """
        return self.most_specific(
            c.role
            for c in concepts
            if isinstance(c, ExistsRole) and c.role not in witnessed and c.role not in self.unsat_roles
        )

    def concepts_of_anonymous(self, r: Role) -> frozenset:
        """Saturated type of an anonymous element whose word ends in ``r``."""
        return self.sup_concepts(ExistsRole(r.inv))

    @property
    def depth(self):
        return self._depth()

    def _depth(self):
        if hasattr(self, "_depth_value"):
            return self._depth_value
        longest = {}
        state = {}

        def visit(r) -> int | None:
            if state.get(r) == 1:
                return None
            if state.get(r) == 2:
                return longest[r]
            state[r] = 1
            best = 1
            for s in self.successors(r):
                sub = visit(s)
                if sub is None:
                    return None
                best = max(best, 1 + sub)
            state[r] = 2
            longest[r] = best
            return best

        value = 0
        for r in sorted(self.startable_roles):
            d = visit(r)
            if d is None:
                value = OMEGA
                break
            value = max(value, d)
        self._depth_value = value
        return value


@lru_cache(maxsize=256)
def index(tbox: Ontology) -> Index:
    return Index(tbox)


def entails_role(tbox: Ontology, r1: Role, r2: Role) -> bool:
    return index(tbox).entails_role(r1, r2)


def entails_concept(tbox: Ontology, c1: ConceptExpr, c2: ConceptExpr) -> bool:
    return index(tbox).entails_concept(c1, c2)


def ontology_depth(tbox: Ontology):
    """Depth as an int, or ``OMEGA`` when some canonical model is infinite."""
    return index(tbox).depth


def is_finite_depth(tbox: Ontology) -> bool:
    return ontology_depth(tbox) != OMEGA


def format_depth(d) -> str:
    return "omega" if d == OMEGA else str(d)


# ABox-level facts


@dataclass(frozen=True)
class AboxView:
    """Asserted types and role edges of the individuals of a data instance."""

    asserted: dict
    edges: dict  # (a, b) -> frozenset of asserted roles from a to b
    out_roles: dict  # a -> {role: set of b}

    @classmethod
    def of(cls, abox: DataInstance) -> "AboxView":
        asserted = defaultdict(set)
        edges = defaultdict(set)
        out_roles = defaultdict(lambda: defaultdict(set))
        for a in abox.inds:
            asserted[a]
        for f in abox.facts:
            if f.is_unary:
                asserted[f.args[0]].add(AtomicConcept(f.pred))
            else:
                a, b = f.args
                r = Role(f.pred)
                asserted[a].add(ExistsRole(r))
                asserted[b].add(ExistsRole(r.inv))
                edges[(a, b)].add(r)
                edges[(b, a)].add(r.inv)
                out_roles[a][r].add(b)
                out_roles[b][r.inv].add(a)
        return cls(
            {a: frozenset(s) for a, s in asserted.items()},
            {k: frozenset(v) for k, v in edges.items()},
            {a: {r: frozenset(bs) for r, bs in m.items()} for a, m in out_roles.items()},
        )


def individual_types(tbox: Ontology, abox: DataInstance) -> dict:
    """Saturated concept set of every individual."""
    idx = index(tbox)
    view = AboxView.of(abox)
    return {a: idx.closure(cs) for a, cs in view.asserted.items()}


def edge_roles(tbox: Ontology, abox: DataInstance) -> dict:
    """For each ordered pair with a data edge, every role entailed between them."""
    idx = index(tbox)
    view = AboxView.of(abox)
    return {pair: idx.role_closure(rs) for pair, rs in view.edges.items()}


def is_consistent(tbox: Ontology, abox: DataInstance) -> bool:
    idx = index(tbox)
    for concepts in individual_types(tbox, abox).values():
        if not idx.type_consistent(concepts):
            return False
    for roles in edge_roles(tbox, abox).values():
        if idx.roles_clash(roles):
            return False
    return True


def sorted_concepts(concepts: Iterable[ConceptExpr]) -> list:
    return sorted(concepts, key=concept_key)
