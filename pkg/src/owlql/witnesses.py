"""Tree witnesses: subqueries that fold into the anonymous tree generated by a role.

A tree witness is a pair ``(roots, interior)``. Its atoms are those with all
variables in ``roots | interior`` and at least one in ``interior``; role ``r``
generates it when those atoms map into the model of ``{A_r -> exists r}, {A_r(a)}``
with the roots sent to ``a`` and the interior into the subtree below ``a.r``.
Only roles that occur in some canonical model are considered as generators.
Interiors are connected: a disconnected interior is a union of independent
witnesses over the same roots and adds nothing to the witness functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable

from . import canonical, reasoner
from .syntax import Atom, ConjunctiveQuery, Ontology, Role, natural_key

DEFAULT_CAP = 10_000


class WitnessOverflow(RuntimeError):
    """More tree witnesses (or independent sets) than the configured cap."""


@dataclass(frozen=True)
class TreeWitness:
    roots: frozenset
    interior: frozenset
    atoms: frozenset = field(compare=False)
    generators: frozenset = field(compare=False, default=frozenset())

    @property
    def key(self) -> tuple:
        return (
            tuple(sorted(self.roots, key=natural_key)),
            tuple(sorted(self.interior, key=natural_key)),
        )

    @cached_property
    def variables(self) -> frozenset:
        return self.roots | self.interior

    def __str__(self) -> str:
        r, i = self.key
        gens = ",".join(str(g) for g in sorted(self.generators))
        return f"roots={{{','.join(r)}}} interior={{{','.join(i)}}} generators={{{gens}}}"


def witness_atoms(q: ConjunctiveQuery, roots: Iterable[str], interior: Iterable[str]) -> frozenset:
    roots, interior = set(roots), set(interior)
    span = roots | interior
    return frozenset(
        a for a in q.atoms if set(a.args) <= span and not set(a.args) <= roots
    )


def _atoms_of(q: ConjunctiveQuery) -> dict:
    out = {v: [] for v in q.variables}
    for a in sorted(q.atoms):
        for v in set(a.args):
            out[v].append(a)
    return out


def _grow(q, view, by_var, answer, seed, start):
    """All splits reachable by extending ``seed -> start`` through interior atoms.

    Yields ``(roots, interior)`` for every complete homomorphism of the grown
    subquery; ``a`` is the only root element.
    """
    root = ("a", ())
    found = set()

    def holds(atom, h):
        if len(atom.args) == 1:
            return view.has_concept(atom.pred, h[atom.args[0]])
        return view.has_edge(h[atom.args[0]], Role(atom.pred), h[atom.args[1]])

    def rec(h, todo):
        # todo: interior variables whose atoms still need exploring
        if not todo:
            roots = frozenset(v for v, e in h.items() if e == root)
            interior = frozenset(v for v, e in h.items() if e != root)
            found.add((roots, interior))
            return
        u = todo[0]
        rest = todo[1:]
        pending = [a for a in by_var[u] if any(v not in h for v in a.args)]
        if not pending:
            rec(h, rest)
            return
        atom = pending[0]
        v = atom.args[1] if atom.args[0] == u else atom.args[0]
        role = Role(atom.pred, atom.args[0] != u)
        for e in view.neighbors(h[u], role):
            if e != root and v in answer:
                continue
            h[v] = e
            if all(holds(a, h) for a in by_var[v] if all(x in h for x in a.args) and _in_scope(a, h, root)):
                nxt = [u] + list(rest) + ([v] if e != root else [])
                rec(h, tuple(nxt))
            del h[v]

    h = {seed: start}
    if all(holds(a, h) for a in by_var[seed] if all(x in h for x in a.args)):
        rec(h, (seed,))
    return found


def _in_scope(atom, h, root) -> bool:
    """Atoms among roots only are not part of the witness."""
    return any(h[x] != root for x in atom.args)


def _candidate_roles(tbox: Ontology, q: ConjunctiveQuery) -> list:
    """Roles that label some anonymous element of some canonical model.

    A witness generated only by other roles can never be realised, so those are
    skipped.
    """
    return sorted(reasoner.index(tbox).generatable_roles)


def enumerate_tree_witnesses(
    q: ConjunctiveQuery, tbox: Ontology, cap: int = DEFAULT_CAP
) -> list:
    """All tree witnesses of ``q`` over ``tbox``, each with its full generator set."""
    answer = set(q.answer_vars)
    existential = [v for v in q.variables if v not in answer]
    if not existential:
        return []
    by_var = _atoms_of(q)
    depth = max(1, q.size)
    gens: dict = {}
    for role in _candidate_roles(tbox, q):
        view = canonical.generator_view(tbox, role, depth)
        top = ("a", (role,))
        splits = set()
        for y in existential:
            splits |= _grow(q, view, by_var, answer, y, top)
        # interiors that never touch a.r sit deeper, with no roots
        for rep in view.subtree_representatives(top)[1:]:
            for y in existential:
                splits |= _grow(q, view, by_var, answer, y, rep)
        for roots, interior in splits:
            gens.setdefault((roots, interior), set()).add(role)
            if len(gens) > cap:
                raise WitnessOverflow(f"more than {cap} tree witnesses")
    out = [
        TreeWitness(roots, interior, witness_atoms(q, roots, interior), frozenset(g))
        for (roots, interior), g in gens.items()
    ]
    out.sort(key=lambda t: (len(t.interior), t.key))
    return out


def independent(ts: Iterable[TreeWitness]) -> bool:
    ts = list(ts)
    return all(not (s.atoms & t.atoms) for s, t in combinations(ts, 2))


def independent_subsets(ts: list, cap: int = DEFAULT_CAP) -> list:
    """Every independent subset of ``ts`` (as index tuples), the empty set first."""
    n = len(ts)
    clash = [[bool(ts[i].atoms & ts[j].atoms) for j in range(n)] for i in range(n)]
    out = []

    def rec(start, chosen):
        out.append(tuple(chosen))
        if len(out) > cap:
            raise WitnessOverflow(f"more than {cap} independent sets of tree witnesses")
        for i in range(start, n):
            if not any(clash[i][j] for j in chosen):
                chosen.append(i)
                rec(i + 1, chosen)
                chosen.pop()

    rec(0, [])
    return out
