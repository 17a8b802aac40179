"""Canonical models (chase), single-generator models and homomorphism search.

An element is a pair ``(a, word)`` where ``a`` is an individual and ``word`` a tuple
of roles; individuals have the empty word. Both the lazy :class:`ChaseView` and the
materialized :class:`CanonicalModel` expose the same navigation interface, so the
homomorphism backtracker runs over either.
"""

from __future__ import annotations

from collections import deque
from itertools import product
from typing import Iterable, Iterator

from . import reasoner
from .reasoner import OMEGA, AboxView
from .syntax import (
    Atom,
    AtomicConcept,
    ConceptIncl,
    ConjunctiveQuery,
    DataInstance,
    ExistsRole,
    Ontology,
    Role,
    natural_key,
)


class InconsistentKB(ValueError):
    pass


def elem_str(e) -> str:
    a, word = e
    return ".".join([a] + [str(r) for r in word])


def parse_elem(text: str):
    parts = text.split(".")
    return (parts[0], tuple(Role.parse(p) for p in parts[1:]))


class ChaseView:
    """The canonical model of a consistent KB, explored on demand up to ``bound``."""

    def __init__(self, tbox: Ontology, abox: DataInstance, bound: int, force_role: Role | None = None):
        self.tbox = tbox
        self.abox = abox
        self.bound = bound
        self.idx = reasoner.index(tbox)
        view = AboxView.of(abox)
        self.types = {a: self.idx.closure(cs) for a, cs in view.asserted.items()}
        self.edge_roles = {p: self.idx.role_closure(rs) for p, rs in view.edges.items()}
        out = {a: {} for a in self.types}
        for (a, b), roles in self.edge_roles.items():
            for r in roles:
                out[a].setdefault(r, set()).add(b)
        self.out = out
        self.generated = {
            a: self.idx.generated_at(self.types[a], frozenset(out[a])) for a in self.types
        }
        if force_role is not None:
            # generator models always keep the child for their own role
            for a, roles in self.generated.items():
                if force_role not in roles and force_role not in out[a]:
                    self.generated[a] = tuple(sorted(roles + (force_role,)))
        self.individuals = tuple(sorted(self.types, key=natural_key))

    # navigation interface

    def concept_names(self, e) -> frozenset:
        a, word = e
        concepts = self.types[a] if not word else self.idx.concepts_of_anonymous(word[-1])
        return frozenset(c.name for c in concepts if isinstance(c, AtomicConcept))

    def has_concept(self, name: str, e) -> bool:
        a, word = e
        c = AtomicConcept(name)
        if not word:
            return c in self.types[a]
        return c in self.idx.concepts_of_anonymous(word[-1])

    def children(self, e) -> tuple:
        a, word = e
        if len(word) >= self.bound:
            return ()
        roles = self.generated[a] if not word else self.idx.successors(word[-1])
        return tuple((a, word + (r,)) for r in roles)

    def neighbors(self, e, role: Role) -> list:
        """Elements ``e2`` with ``(e, e2)`` in the extension of ``role``."""
        a, word = e
        out = []
        if not word:
            out.extend((b, ()) for b in sorted(self.out[a].get(role, ()), key=natural_key))
        elif self.idx.entails_role(word[-1], role.inv):
            out.append((a, word[:-1]))
        for child in self.children(e):
            if self.idx.entails_role(child[1][-1], role):
                out.append(child)
        return out

    def has_edge(self, e1, role: Role, e2) -> bool:
        a1, w1 = e1
        a2, w2 = e2
        if a1 != a2:
            return not w1 and not w2 and role in self.edge_roles.get((a1, a2), ())
        if not w1 and not w2:
            return role in self.edge_roles.get((a1, a2), ())
        if len(w2) == len(w1) + 1 and w2[:-1] == w1:
            return self.idx.entails_role(w2[-1], role)
        if len(w1) == len(w2) + 1 and w1[:-1] == w2:
            return self.idx.entails_role(w1[-1], role.inv)
        return False

    def elements(self) -> Iterator:
        """Every element in breadth-first creation order."""
        todo = deque((a, ()) for a in self.individuals)
        while todo:
            e = todo.popleft()
            yield e
            todo.extend(self.children(e))

    def subtree_representatives(self, top) -> list:
        """``top`` followed by the shortest element below it ending in each role."""
        seen = {top[1][-1]}
        out = [top]
        todo = deque([top])
        while todo:
            e = todo.popleft()
            for child in self.children(e):
                if child[1][-1] not in seen:
                    seen.add(child[1][-1])
                    out.append(child)
                    todo.append(child)
        return out

    def realized_roles(self) -> dict:
        """Shortest element ending in each role that occurs in the model."""
        reps = {}
        todo = deque()
        for a in self.individuals:
            for r in self.generated[a]:
                if r not in reps and self.bound >= 1:
                    reps[r] = (a, (r,))
                    todo.append(reps[r])
        while todo:
            e = todo.popleft()
            if len(e[1]) >= self.bound:
                continue
            for r in self.idx.successors(e[1][-1]):
                if r not in reps:
                    reps[r] = (e[0], e[1] + (r,))
                    todo.append(reps[r])
        return reps


class CanonicalModel:
    """A materialized, depth-truncated canonical model."""

    def __init__(self, elements, unary_ext, binary_ext, depth_bound, complete):
        self.elements = tuple(elements)
        self.unary_ext = {k: frozenset(v) for k, v in unary_ext.items()}
        self.binary_ext = {k: frozenset(v) for k, v in binary_ext.items()}
        self.depth_bound = depth_bound
        self.complete = complete
        self._concepts = {}
        for name, es in self.unary_ext.items():
            for e in es:
                self._concepts.setdefault(e, set()).add(name)
        self._adj = {}
        for name, pairs in self.binary_ext.items():
            fwd, bwd = Role(name), Role(name, True)
            for e1, e2 in pairs:
                self._adj.setdefault((e1, fwd), []).append(e2)
                self._adj.setdefault((e2, bwd), []).append(e1)
        order = {e: i for i, e in enumerate(self.elements)}
        for key in self._adj:
            self._adj[key].sort(key=order.__getitem__)
        self.individuals = tuple(e[0] for e in self.elements if not e[1])

    @property
    def anonymous(self) -> tuple:
        return tuple(e for e in self.elements if e[1])

    def has_concept(self, name: str, e) -> bool:
        return name in self._concepts.get(e, ())

    def concept_names(self, e) -> frozenset:
        return frozenset(self._concepts.get(e, ()))

    def neighbors(self, e, role: Role) -> list:
        return self._adj.get((e, role), [])

    def has_edge(self, e1, role: Role, e2) -> bool:
        if role.inverted:
            e1, e2 = e2, e1
        return (e1, e2) in self.binary_ext.get(role.name, ())

    def lines(self) -> list:
        """Line-oriented dump: ``elem``, ``in`` and ``edge`` records."""
        out = [f"elem {elem_str(e)}" for e in self.elements]
        for name in sorted(self.unary_ext):
            out += [f"in {name} {elem_str(e)}" for e in self.elements if e in self.unary_ext[name]]
        order = {e: i for i, e in enumerate(self.elements)}
        for name in sorted(self.binary_ext):
            pairs = sorted(self.binary_ext[name], key=lambda p: (order[p[0]], order[p[1]]))
            out += [f"edge {name} {elem_str(a)} {elem_str(b)}" for a, b in pairs]
        return out


def build_canonical(
    tbox: Ontology, abox: DataInstance, depth_bound: int, force_role: Role | None = None
) -> CanonicalModel:
    if not reasoner.is_consistent(tbox, abox):
        raise InconsistentKB("the knowledge base is inconsistent")
    view = ChaseView(tbox, abox, depth_bound, force_role)
    elements = list(view.elements())
    names_1 = set(tbox.concept_names) | set(abox.concept_names)
    names_2 = set(tbox.role_names) | set(abox.role_names)
    unary = {n: set() for n in names_1}
    binary = {n: set() for n in names_2}
    for e in elements:
        for n in view.concept_names(e):
            unary.setdefault(n, set()).add(e)
        for n in names_2:
            for e2 in view.neighbors(e, Role(n)):
                binary[n].add((e, e2))
    depth = reasoner.ontology_depth(tbox)
    complete = depth != OMEGA and depth <= depth_bound
    return CanonicalModel(elements, unary, binary, depth_bound, complete)


def generator_extension(tbox: Ontology, role: Role) -> tuple:
    """``T`` plus ``A_role -> exists role`` for a fresh concept, and that concept's name."""
    fresh = f"Gen_{role.name}{'_inv' if role.inverted else ''}"
    while fresh in tbox.signature:
        fresh += "_"
    return tbox.extend([ConceptIncl(AtomicConcept(fresh), ExistsRole(role))]), fresh


def build_generator_model(tbox: Ontology, role: Role, depth_bound: int) -> CanonicalModel:
    ext, fresh = generator_extension(tbox, role)
    return build_canonical(ext, DataInstance({Atom(fresh, ("a",))}), depth_bound, role)


def generator_view(tbox: Ontology, role: Role, depth_bound: int) -> ChaseView:
    ext, fresh = generator_extension(tbox, role)
    return ChaseView(ext, DataInstance({Atom(fresh, ("a",))}), depth_bound, role)


# Homomorphisms


def _atoms_by_var(atoms: Iterable[Atom]) -> dict:
    out = {}
    for a in atoms:
        for v in set(a.args):
            out.setdefault(v, []).append(a)
    return out


def _plan(atoms: list, start: str, graph: dict) -> list:
    """Order the variables of one connected component breadth-first from ``start``.

    Returns ``(var, via_atom, via_var)`` triples; ``via_atom`` links ``var`` to an
    earlier variable ``via_var`` (``None`` for the start).
    """
    binary = [a for a in atoms if len(a.args) == 2 and a.args[0] != a.args[1]]
    plan = [(start, None, None)]
    seen = {start}
    todo = deque([start])
    while todo:
        u = todo.popleft()
        nxt = sorted(graph.get(u, ()), key=lambda v: (-len(graph.get(v, ())), natural_key(v)))
        for v in nxt:
            if v in seen:
                continue
            link = next(a for a in binary if set(a.args) == {u, v})
            plan.append((v, link, u))
            seen.add(v)
            todo.append(v)
    return plan


def _atom_holds(model, atom: Atom, h: dict) -> bool:
    if len(atom.args) == 1:
        return model.has_concept(atom.pred, h[atom.args[0]])
    return model.has_edge(h[atom.args[0]], Role(atom.pred), h[atom.args[1]])


def _search(model, plan: list, checks: dict, h: dict, start_candidates) -> Iterator[dict]:
    n = len(plan)

    def rec(i):
        if i == n:
            yield dict(h)
            return
        var, link, via = plan[i]
        if var in h:
            if all(_atom_holds(model, a, h) for a in checks[var]):
                yield from rec(i + 1)
            return
        if link is None:
            cands = start_candidates
        else:
            role = Role(link.pred, link.args[0] == var)
            cands = model.neighbors(h[via], role)
        for e in cands:
            h[var] = e
            if all(_atom_holds(model, a, h) for a in checks[var]):
                yield from rec(i + 1)
            del h[var]

    yield from rec(0)


def _checks(plan: list, atoms: list, fixed: set) -> dict:
    """Atoms to test once each planned variable is assigned."""
    pos = {v: i for i, (v, _, _) in enumerate(plan)}
    checks = {v: [] for v, _, _ in plan}
    for a in atoms:
        last = max(a.args, key=lambda v: pos[v])
        checks[last].append(a)
    return checks


def components(q: ConjunctiveQuery) -> list:
    """Connected components of the query graph as (variables, atoms) pairs."""
    graph = q.graph
    seen = set()
    out = []
    for v in q.variables:
        if v in seen:
            continue
        comp = []
        todo = [v]
        seen.add(v)
        while todo:
            u = todo.pop()
            comp.append(u)
            for w in graph[u]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        cs = set(comp)
        atoms = sorted((a for a in q.atoms if a.args[0] in cs), key=lambda a: (a.pred, a.args))
        order = {x: i for i, x in enumerate(q.variables)}
        out.append((sorted(comp, key=order.__getitem__), atoms))
    return out


def find_homomorphisms(q: ConjunctiveQuery, model, bind: dict | None = None) -> Iterator[dict]:
    """All homomorphisms of ``q`` into a materialized model that extend ``bind``.

    Unbound component roots range over every element of ``model``.
    """
    bind = dict(bind or {})
    comps = components(q)
    per = []
    for vars_, atoms in comps:
        graph = q.graph
        start = next((v for v in vars_ if v in bind), None)
        if start is None:
            start = max(vars_, key=lambda v: (len(graph[v]), -vars_.index(v)))
        plan = _plan(atoms, start, graph)
        checks = _checks(plan, atoms, set())
        h = {v: bind[v] for v in vars_ if v in bind}
        per.append(list(_search(model, plan, checks, h, model.elements)))
    for parts in product(*per):
        out = {}
        for p in parts:
            out.update(p)
        yield out


def _projections(model, plan: list, checks: dict, answer: set, start_candidates) -> tuple:
    """Answer-variable projections (individuals only) of all maps following ``plan``.

    The result of a plan suffix depends only on the values of the variables it
    still refers to, so suffix results are memoized on those values. This keeps
    path-like queries polynomial where plain backtracking is exponential.
    """
    n = len(plan)
    live = []
    for i in range(n + 1):
        before = {v for v, _, _ in plan[:i]}
        used = set()
        for v, _, via in plan[i:]:
            used.add(via)
            used.update(x for a in checks[v] for x in a.args)
        live.append(tuple(v for v, _, _ in plan[:i] if v in used & before))
    h: dict = {}
    memo: dict = {}

    def rec(i) -> frozenset:
        if i == n:
            return frozenset([()])
        key = (i,) + tuple(h[v] for v in live[i])
        if key in memo:
            return memo[key]
        var, link, via = plan[i]
        if link is None:
            cands = start_candidates
        else:
            cands = model.neighbors(h[via], Role(link.pred, link.args[0] == var))
        out = set()
        for e in cands:
            if var in answer and e[1]:
                continue
            h[var] = e
            if all(_atom_holds(model, a, h) for a in checks[var]):
                rest = rec(i + 1)
                out.update(((e[0],) + t for t in rest) if var in answer else rest)
            del h[var]
        memo[key] = frozenset(out)
        return memo[key]

    order = [v for v, _, _ in plan if v in answer]
    return set(rec(0)), order


def _component_maps(view: ChaseView, q: ConjunctiveQuery, vars_: list, atoms: list, answer: set) -> set:
    """Projections onto answer variables of all maps of one component into the chase."""
    graph = q.graph
    avs = [v for v in vars_ if v in answer]
    if avs:
        plan = _plan(atoms, avs[0], graph)
        checks = _checks(plan, atoms, set())
        found, order = _projections(view, plan, checks, answer, [(a, ()) for a in view.individuals])
        pos = [order.index(v) for v in avs]
        return {tuple(t[k] for k in pos) for t in found}
    anchors = [(a, ()) for a in view.individuals] + sorted(
        view.realized_roles().values(), key=lambda e: (len(e[1]), e[1])
    )
    for start in vars_:
        plan = _plan(atoms, start, graph)
        checks = _checks(plan, atoms, set())
        for anchor in anchors:
            found, _ = _projections(view, plan, checks, set(), [anchor])
            if found:
                return {()}
    return set()


def default_bound(tbox: Ontology, q: ConjunctiveQuery) -> int:
    return 2 * tbox.size + q.size


def certain_answers_brute(
    tbox: Ontology, abox: DataInstance, q: ConjunctiveQuery, depth_bound: int | None = None
) -> set:
    """Certain answers by homomorphisms into the canonical model.

    The model is explored lazily to ``depth_bound`` (default ``2|T| + |q|``). A
    component without answer variables is tried from every individual and from the
    shortest element ending in each generated role; any anonymous image can be
    shifted onto one of those.
    """
    inds = sorted(abox.inds, key=natural_key)
    n = len(q.answer_vars)
    if not reasoner.is_consistent(tbox, abox):
        return set(product(inds, repeat=n))
    bound = default_bound(tbox, q) if depth_bound is None else depth_bound
    view = ChaseView(tbox, abox, bound)
    answer = set(q.answer_vars)
    partial = [set([()])]
    keys = []
    for vars_, atoms in components(q):
        maps = _component_maps(view, q, vars_, atoms, answer)
        if not maps:
            return set()
        keys.append([v for v in vars_ if v in answer])
        partial.append(maps)
    out = set()
    for parts in product(*partial[1:]):
        val = {}
        for ks, vals in zip(keys, parts):
            val.update(zip(ks, vals))
        out.add(tuple(val[x] for x in q.answer_vars))
    return out


def certain_answers_materialized(
    tbox: Ontology, abox: DataInstance, q: ConjunctiveQuery, depth_bound: int | None = None
) -> set:
    """Reference route: materialize the truncated model and search it exhaustively."""
    inds = sorted(abox.inds, key=natural_key)
    if not reasoner.is_consistent(tbox, abox):
        return set(product(inds, repeat=len(q.answer_vars)))
    bound = default_bound(tbox, q) if depth_bound is None else depth_bound
    model = build_canonical(tbox, abox, bound)
    out = set()
    for h in find_homomorphisms(q, model):
        if all(not h[x][1] for x in q.answer_vars):
            out.add(tuple(h[x][0] for x in q.answer_vars))
    return out
